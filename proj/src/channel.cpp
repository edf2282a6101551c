#include "afc/channel.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cerrno>
#include <cstring>
#include <deque>
#include <mutex>

#include "afc/errors.hpp"

namespace afc {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw IoError(what + ": " + std::strerror(errno));
}

/// Shared state of an in-memory duplex pair; queue[i] feeds endpoint i.
struct Duplex {
    std::mutex m;
    std::condition_variable cv;
    std::deque<std::vector<uint8_t>> queue[2];
    bool closed[2] = {false, false};
};

class InProcessChannel final : public Channel {
public:
    InProcessChannel(std::shared_ptr<Duplex> d, int side) : d_(std::move(d)), side_(side) {}
    ~InProcessChannel() override { close(); }

    void send(const WireMessage& msg) override {
        auto bytes = encode_message(msg);
        std::lock_guard lock(d_->m);
        if (d_->closed[side_]) throw IoError("send on closed channel endpoint");
        if (d_->closed[1 - side_]) throw IoError("channel peer is gone");
        d_->queue[1 - side_].push_back(std::move(bytes));
        d_->cv.notify_all();
    }

    WireMessage recv() override {
        std::unique_lock lock(d_->m);
        d_->cv.wait(lock, [&] {
            return !d_->queue[side_].empty() || d_->closed[side_] || d_->closed[1 - side_];
        });
        if (d_->queue[side_].empty()) throw IoError("channel closed");
        auto bytes = std::move(d_->queue[side_].front());
        d_->queue[side_].pop_front();
        lock.unlock();
        return decode_message(bytes);
    }

    void close() override {
        std::lock_guard lock(d_->m);
        d_->closed[side_] = true;
        d_->cv.notify_all();
    }

private:
    std::shared_ptr<Duplex> d_;
    int side_;
};

class SocketChannel final : public Channel {
public:
    explicit SocketChannel(int fd) : fd_(fd) {
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }
    ~SocketChannel() override { close(); }

    void send(const WireMessage& msg) override {
        const auto bytes = encode_message(msg);
        size_t off = 0;
        std::lock_guard lock(send_m_);
        while (off < bytes.size()) {
            const ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw_errno("socket send");
            }
            off += static_cast<size_t>(n);
        }
    }

    WireMessage recv() override {
        std::lock_guard lock(recv_m_);
        std::vector<uint8_t> frame(4);
        read_exact(frame.data(), 4, 0);
        const uint32_t body = static_cast<uint32_t>(frame[0]) |
                              static_cast<uint32_t>(frame[1]) << 8 |
                              static_cast<uint32_t>(frame[2]) << 16 |
                              static_cast<uint32_t>(frame[3]) << 24;
        frame.resize(4 + body);
        read_exact(frame.data() + 4, body, 4);
        return decode_message(frame);
    }

    void close() override {
        std::lock_guard lock(close_m_);
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    /// Fills buf with exactly n bytes. EOF at the start of a frame means an
    /// orderly close (IoError); EOF inside a frame is a truncation.
    void read_exact(uint8_t* buf, size_t n, size_t frame_off) {
        size_t got = 0;
        while (got < n) {
            const ssize_t r = ::recv(fd_, buf + got, n - got, 0);
            if (r < 0) {
                if (errno == EINTR) continue;
                throw_errno("socket recv");
            }
            if (r == 0) {
                if (frame_off == 0 && got == 0) throw IoError("connection closed");
                throw FramingError("stream truncated at byte offset " +
                                       std::to_string(frame_off + got),
                                   frame_off + got);
            }
            got += static_cast<size_t>(r);
        }
    }

    int fd_;
    std::mutex send_m_, recv_m_, close_m_;
};

} // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_inprocess_pair() {
    auto d = std::make_shared<Duplex>();
    return {std::make_unique<InProcessChannel>(d, 0), std::make_unique<InProcessChannel>(d, 1)};
}

TcpListener::TcpListener(uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw_errno("socket");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) throw_errno("bind");
    if (::listen(fd_, 64) < 0) throw_errno("listen");
    socklen_t len = sizeof(addr);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) < 0)
        throw_errno("getsockname");
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Channel> TcpListener::accept() {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) throw_errno("accept");
    return std::make_unique<SocketChannel>(fd);
}

std::unique_ptr<Channel> tcp_connect(uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        ::close(fd);
        throw_errno("connect");
    }
    return std::make_unique<SocketChannel>(fd);
}

} // namespace afc
