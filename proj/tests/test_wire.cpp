#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "afc/channel.hpp"
#include "afc/errors.hpp"
#include "afc/rng.hpp"
#include "afc/wire.hpp"

using namespace afc;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<uint64_t>(a[i]) != std::bit_cast<uint64_t>(b[i])) return false;
    return true;
}

WireMessage random_message(Rng& rng) {
    WireMessage m;
    m.type = static_cast<MsgType>(rng.uniform_u64(6));
    m.cfd_id = static_cast<uint32_t>(rng.raw());
    m.marl_id = static_cast<uint32_t>(rng.raw());
    m.step = static_cast<uint32_t>(rng.raw());
    m.payload.resize(rng.uniform_u64(65));
    for (double& v : m.payload) {
        switch (rng.uniform_u64(8)) {
        case 0: v = 0.0; break;
        case 1: v = -0.0; break;
        case 2: v = std::numeric_limits<double>::infinity(); break;
        case 3: v = std::numeric_limits<double>::quiet_NaN(); break;
        case 4: v = std::bit_cast<double>(rng.raw()); break;
        default: v = 2e3 * (rng.uniform() - 0.5); break;
        }
    }
    return m;
}

} // namespace

TEST_CASE("single-float state frame matches the documented 25-byte layout") {
    WireMessage m;
    m.type = MsgType::state;
    m.cfd_id = 7;
    m.marl_id = 2;
    m.step = 5;
    m.payload = {0.0};

    const auto bytes = encode_message(m);
    REQUIRE(bytes.size() == 25);

    const std::vector<uint8_t> expected = {
        21, 0, 0, 0,      // body length: 1 + 12 + 8
        1,                // state
        7, 0, 0, 0,       // cfd_id
        2, 0, 0, 0,       // marl_id
        5, 0, 0, 0,       // step
        0, 0, 0, 0, 0, 0, 0, 0, // 0.0
    };
    CHECK(bytes == expected);
    CHECK(decode_message(bytes) == m);

    SUBCASE("ids and floats are little-endian") {
        WireMessage big;
        big.type = MsgType::action;
        big.cfd_id = 0x01020304u;
        big.payload = {1.0};
        const auto enc = encode_message(big);
        CHECK(enc[5] == 0x04);
        CHECK(enc[8] == 0x01);
        // 1.0 = 0x3FF0000000000000, least significant byte first
        CHECK(enc[17] == 0x00);
        CHECK(enc[24] == 0x3F);
    }
}

TEST_CASE("randomized frames survive an encode/decode roundtrip") {
    Rng rng(20260822);
    for (int i = 0; i < 10000; ++i) {
        const WireMessage m = random_message(rng);
        const auto bytes = encode_message(m);
        CHECK(bytes.size() == 4 + 13 + 8 * m.payload.size());
        const WireMessage back = decode_message(bytes);
        const bool ok = back.type == m.type && back.cfd_id == m.cfd_id &&
                        back.marl_id == m.marl_id && back.step == m.step &&
                        same_bits(back.payload, m.payload);
        CHECK(ok);
        if (!ok) break; // one report is enough
    }

    SUBCASE("empty payload and a large observation block both roundtrip") {
        WireMessage none;
        none.type = MsgType::episode_end;
        CHECK(decode_message(encode_message(none)) == none);

        WireMessage wide;
        wide.type = MsgType::state;
        wide.payload.resize(100000);
        for (size_t i = 0; i < wide.payload.size(); ++i)
            wide.payload[i] = static_cast<double>(i) * 0.25;
        CHECK(decode_message(encode_message(wide)) == wide);
    }
}

TEST_CASE("every truncation of a frame raises FramingError with the offset") {
    WireMessage m;
    m.type = MsgType::reward;
    m.cfd_id = 3;
    m.marl_id = 1;
    m.step = 41;
    m.payload = {0.25, -7.5, 1e9};
    const auto bytes = encode_message(m);
    REQUIRE(bytes.size() == 41);

    for (size_t cut = 0; cut < bytes.size(); ++cut) {
        const std::vector<uint8_t> partial(bytes.begin(), bytes.begin() + cut);
        try {
            (void)decode_message(partial);
            CHECK_MESSAGE(false, "cut at ", cut, " decoded");
        } catch (const FramingError& e) {
            // the reported offset is where the bytes ran out
            CHECK(e.offset() == cut);
            CHECK(std::string(e.what()).find("offset " + std::to_string(cut)) !=
                  std::string::npos);
        }
    }

    SUBCASE("trailing garbage is rejected too") {
        auto extra = bytes;
        extra.push_back(0xAB);
        try {
            (void)decode_message(extra);
            CHECK(false);
        } catch (const FramingError& e) {
            CHECK(e.offset() == bytes.size());
        }
    }
}

TEST_CASE("malformed headers raise ProtocolError") {
    SUBCASE("unknown type byte") {
        WireMessage m;
        m.type = MsgType::hello;
        auto bytes = encode_message(m);
        for (uint8_t bad : {uint8_t{6}, uint8_t{9}, uint8_t{255}}) {
            bytes[4] = bad;
            CHECK_THROWS_AS((void)decode_message(bytes), ProtocolError);
        }
    }
    SUBCASE("body too short for the header") {
        std::vector<uint8_t> bytes = {12, 0, 0, 0};
        bytes.resize(4 + 12, 0);
        CHECK_THROWS_AS((void)decode_message(bytes), ProtocolError);
    }
    SUBCASE("payload bytes not a whole number of doubles") {
        std::vector<uint8_t> bytes = {17, 0, 0, 0};
        bytes.resize(4 + 17, 0);
        CHECK_THROWS_AS((void)decode_message(bytes), ProtocolError);
    }
    SUBCASE("declared payload beyond the float cap") {
        // length field promises > 2^24 doubles; rejected before any allocation
        const uint32_t body = 13 + 8 * (uint32_t(1) << 24) + 8;
        std::vector<uint8_t> bytes = {
            static_cast<uint8_t>(body), static_cast<uint8_t>(body >> 8),
            static_cast<uint8_t>(body >> 16), static_cast<uint8_t>(body >> 24), 1};
        CHECK_THROWS_AS((void)decode_message(bytes), ProtocolError);
    }
    SUBCASE("oversized payload refuses to encode") {
        WireMessage m;
        m.type = MsgType::state;
        m.payload.resize(kMaxPayloadFloats + 1);
        CHECK_THROWS_AS((void)encode_message(m), ProtocolError);
    }
}

TEST_CASE("in-process channel delivers frames in order and signals close") {
    auto [a, b] = make_inprocess_pair();

    SUBCASE("threaded echo of 200 frames") {
        std::thread echo([&b] {
            while (true) {
                WireMessage m = b->recv();
                if (m.type == MsgType::shutdown) return;
                m.step += 1;
                b->send(m);
            }
        });
        Rng rng(99);
        for (int i = 0; i < 200; ++i) {
            WireMessage m = random_message(rng);
            m.type = MsgType::state;
            m.step = static_cast<uint32_t>(i);
            a->send(m);
            const WireMessage back = a->recv();
            CHECK(back.step == m.step + 1);
            CHECK(same_bits(back.payload, m.payload));
        }
        a->send(WireMessage{MsgType::shutdown, 0, 0, 0, {}});
        echo.join();
    }

    SUBCASE("queued frames drain after peer close, then recv throws") {
        WireMessage m;
        m.type = MsgType::reward;
        m.payload = {1.5};
        a->send(m);
        a->send(m);
        a->close();
        CHECK(b->recv() == m);
        CHECK(b->recv() == m);
        CHECK_THROWS_AS((void)b->recv(), IoError);
        CHECK_THROWS_AS(b->send(m), IoError);
    }

    SUBCASE("recv blocked on a live channel wakes on close") {
        std::thread closer([&a] {
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            a->close();
        });
        CHECK_THROWS_AS((void)b->recv(), IoError);
        closer.join();
    }
}

TEST_CASE("tcp loopback channel carries frames and reports truncation") {
    TcpListener listener(0);
    REQUIRE(listener.port() != 0);

    SUBCASE("bidirectional echo over 500 frames") {
        std::thread server([&listener] {
            auto ch = listener.accept();
            while (true) {
                WireMessage m = ch->recv();
                if (m.type == MsgType::shutdown) return;
                ch->send(m);
            }
        });
        auto client = tcp_connect(listener.port());
        Rng rng(7);
        for (int i = 0; i < 500; ++i) {
            WireMessage m = random_message(rng);
            if (m.type == MsgType::shutdown) m.type = MsgType::state;
            client->send(m);
            const WireMessage back = client->recv();
            const bool ok = back.type == m.type && back.cfd_id == m.cfd_id &&
                            back.marl_id == m.marl_id && back.step == m.step &&
                            same_bits(back.payload, m.payload);
            CHECK(ok);
            if (!ok) break;
        }
        client->send(WireMessage{MsgType::shutdown, 0, 0, 0, {}});
        server.join();
    }

    SUBCASE("orderly close surfaces as IoError") {
        std::thread server([&listener] {
            auto ch = listener.accept();
            ch->close();
        });
        auto client = tcp_connect(listener.port());
        CHECK_THROWS_AS((void)client->recv(), IoError);
        server.join();
    }

    SUBCASE("peer death mid-frame surfaces as FramingError with the offset") {
        std::thread server([&listener] {
            const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
            REQUIRE(fd >= 0);
            sockaddr_in addr{};
            addr.sin_family = AF_INET;
            addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
            addr.sin_port = htons(listener.port());
            REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
            WireMessage m;
            m.type = MsgType::state;
            m.payload = {1.0, 2.0, 3.0};
            const auto bytes = encode_message(m);
            // write 11 of 37 bytes, then vanish
            REQUIRE(::send(fd, bytes.data(), 11, MSG_NOSIGNAL) == 11);
            ::close(fd);
        });
        auto ch = listener.accept();
        try {
            (void)ch->recv();
            CHECK(false);
        } catch (const FramingError& e) {
            CHECK(e.offset() == 11);
        }
        server.join();
    }
}
