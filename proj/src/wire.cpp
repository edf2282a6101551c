#include "afc/wire.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "afc/errors.hpp"

namespace afc {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<uint8_t>(v >> (8 * b)));
}

void put_f64(std::vector<uint8_t>& out, double v) {
    const auto bits = std::bit_cast<uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<uint8_t>(bits >> (8 * b)));
}

uint32_t get_u32(const uint8_t* p) {
    uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<uint32_t>(p[b]) << (8 * b);
    return v;
}

double get_f64(const uint8_t* p) {
    uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<uint64_t>(p[b]) << (8 * b);
    return std::bit_cast<double>(bits);
}

constexpr size_t kHeaderBytes = 1 + 3 * 4; // type byte plus three u32 ids

} // namespace

std::vector<uint8_t> encode_message(const WireMessage& msg) {
    if (static_cast<uint8_t>(msg.type) > static_cast<uint8_t>(MsgType::shutdown))
        throw ProtocolError("encode: unknown message type " +
                            std::to_string(static_cast<unsigned>(msg.type)));
    if (msg.payload.size() > kMaxPayloadFloats)
        throw ProtocolError("encode: payload of " + std::to_string(msg.payload.size()) +
                            " floats exceeds the frame cap");

    std::vector<uint8_t> out;
    out.reserve(4 + kHeaderBytes + 8 * msg.payload.size());
    put_u32(out, static_cast<uint32_t>(kHeaderBytes + 8 * msg.payload.size()));
    out.push_back(static_cast<uint8_t>(msg.type));
    put_u32(out, msg.cfd_id);
    put_u32(out, msg.marl_id);
    put_u32(out, msg.step);
    for (double v : msg.payload) put_f64(out, v);
    return out;
}

WireMessage decode_message(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 4)
        throw FramingError("frame truncated at byte offset " + std::to_string(bytes.size()) +
                               ": length prefix incomplete",
                           bytes.size());
    const size_t body = get_u32(bytes.data());
    if (body < kHeaderBytes || (body - kHeaderBytes) % 8 != 0)
        throw ProtocolError("frame body length " + std::to_string(body) +
                            " cannot hold a header plus whole doubles");
    if ((body - kHeaderBytes) / 8 > kMaxPayloadFloats)
        throw ProtocolError("frame payload exceeds the " +
                            std::to_string(kMaxPayloadFloats) + "-float cap");
    if (bytes.size() < 4 + body)
        throw FramingError("frame truncated at byte offset " + std::to_string(bytes.size()) +
                               ": expected " + std::to_string(4 + body) + " bytes",
                           bytes.size());
    if (bytes.size() > 4 + body)
        throw FramingError("frame has " + std::to_string(bytes.size() - 4 - body) +
                               " trailing bytes past offset " + std::to_string(4 + body),
                           4 + body);

    const uint8_t* p = bytes.data() + 4;
    const uint8_t type_byte = *p++;
    if (type_byte > static_cast<uint8_t>(MsgType::shutdown))
        throw ProtocolError("unknown message type " + std::to_string(type_byte));

    WireMessage msg;
    msg.type = static_cast<MsgType>(type_byte);
    msg.cfd_id = get_u32(p);
    msg.marl_id = get_u32(p + 4);
    msg.step = get_u32(p + 8);
    p += 12;
    const size_t n = (body - kHeaderBytes) / 8;
    msg.payload.resize(n);
    for (size_t i = 0; i < n; ++i) msg.payload[i] = get_f64(p + 8 * i);
    return msg;
}

} // namespace afc
