#pragma once

#include <cstdint>
#include <vector>

namespace afc {

/// Protocol revision announced in the hello handshake.
constexpr uint32_t kProtocolVersion = 1;

/// Hard cap on payload length (number of 64-bit floats per frame).
constexpr size_t kMaxPayloadFloats = size_t{1} << 24;

enum class MsgType : uint8_t {
    hello = 0,       ///< worker: [version, obs_size, act_size]; coordinator: [version, episode_seed]
    state = 1,       ///< [prev_blended_reward, prev_local_reward, observation...]
    action = 2,      ///< [jet amplitude]
    reward = 3,      ///< [blended_reward, local_reward] (stand-alone variant)
    episode_end = 4, ///< empty payload, marl_id 0
    shutdown = 5,    ///< empty payload
};

/// One framed message of the solver <-> agent coupling. Every frame is
/// addressed by (cfd_id, marl_id, step) so concurrent workers multiplex
/// over independent channels without ambiguity.
struct WireMessage {
    MsgType type = MsgType::hello;
    uint32_t cfd_id = 0;
    uint32_t marl_id = 0;
    uint32_t step = 0;
    std::vector<double> payload;

    bool operator==(const WireMessage&) const = default;
};

/// Byte layout: u32 little-endian length of everything that follows,
/// then u8 type, u32 cfd_id, u32 marl_id, u32 step (little-endian), then
/// the payload as little-endian IEEE-754 doubles.
std::vector<uint8_t> encode_message(const WireMessage& msg);

/// Inverse of encode_message over one complete frame. Truncated input
/// raises FramingError carrying the byte offset where data ran out;
/// an unknown type byte or an ill-sized payload raises ProtocolError.
WireMessage decode_message(const std::vector<uint8_t>& bytes);

} // namespace afc
