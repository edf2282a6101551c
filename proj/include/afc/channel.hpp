#pragma once

#include <memory>
#include <string>
#include <utility>

#include "afc/wire.hpp"

namespace afc {

/// Blocking, message-oriented duplex transport for WireMessage frames.
/// Implementations must be safe for one sender thread and one receiver
/// thread per endpoint.
class Channel {
public:
    virtual ~Channel() = default;

    /// Queues or writes one frame. Throws IoError once the peer is gone.
    virtual void send(const WireMessage& msg) = 0;

    /// Blocks for the next frame. Throws IoError on orderly close with an
    /// empty queue, FramingError if the stream dies mid-frame.
    virtual WireMessage recv() = 0;

    /// Releases the endpoint and wakes any blocked peer. Idempotent.
    virtual void close() = 0;
};

/// Builds two connected in-memory endpoints. Frames still pass through
/// encode_message/decode_message so both transports exercise the same
/// byte path.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_inprocess_pair();

/// Listening TCP socket on 127.0.0.1. Pass port 0 to let the kernel pick;
/// port() reports the bound value.
class TcpListener {
public:
    explicit TcpListener(uint16_t port);
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    uint16_t port() const { return port_; }

    /// Blocks until one client connects.
    std::unique_ptr<Channel> accept();

private:
    int fd_ = -1;
    uint16_t port_ = 0;
};

/// Connects to a listener on 127.0.0.1.
std::unique_ptr<Channel> tcp_connect(uint16_t port);

} // namespace afc
