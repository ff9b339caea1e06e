#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/read.hpp>
#include <boost/asio/write.hpp>
#include <boost/beast/core/buffers_to_string.hpp>
#include <boost/beast/core/flat_buffer.hpp>
#include <boost/beast/websocket.hpp>

#include "tiltxter/mirror.hpp"
#include "tiltxter/transport.hpp"

using namespace tiltxter;
using namespace tiltxter::net;
namespace asio = boost::asio;
namespace websocket = boost::beast::websocket;
using tcp = asio::ip::tcp;
using namespace std::chrono_literals;

namespace {

template <typename Pred>
bool wait_for(Pred&& p, std::chrono::milliseconds limit = 5000ms) {
    const auto end = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < end) {
        if (p()) return true;
        std::this_thread::sleep_for(5ms);
    }
    return p();
}

struct WsClient {
    asio::io_context io;
    websocket::stream<tcp::socket> ws{io};

    explicit WsClient(std::uint16_t port) {
        ws.next_layer().connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), port));
        ws.handshake("127.0.0.1", "/");
        ws.text(true);
    }
    nlohmann::json read() {
        boost::beast::flat_buffer buf;
        ws.read(buf);
        return nlohmann::json::parse(boost::beast::buffers_to_string(buf.data()));
    }
    void send(const std::string& text) { ws.write(asio::buffer(text)); }
};

}  // namespace

TEST(Endpoint, Parsing) {
    auto ep = parse_endpoint("localhost:7000");
    EXPECT_EQ(ep.host, "localhost");
    EXPECT_EQ(ep.port, 7000);
    ep = parse_endpoint(":7001");
    EXPECT_EQ(ep.host, "127.0.0.1");
    EXPECT_EQ(ep.port, 7001);
    ep = parse_endpoint("7002");
    EXPECT_EQ(ep.port, 7002);
    EXPECT_EQ(to_string(ep), "127.0.0.1:7002");
    for (const char* bad : {"", "host:", "host:abc", "host:70000", "12x", ":-1"})
        EXPECT_THROW(parse_endpoint(bad), DomainError) << bad;
}

TEST(Mirror, PublishesLinesAndAcceptsOnlyCommands) {
    asio::io_context io;
    std::mutex mu;
    std::vector<wire::Command> got;
    MirrorServer mirror(io, Endpoint{"127.0.0.1", 0}, [&](const wire::Command& c) {
        std::lock_guard lock(mu);
        got.push_back(c);
    });
    ASSERT_NE(mirror.port(), 0);
    auto guard = asio::make_work_guard(io);
    std::thread t([&] { io.run(); });

    WsClient client(mirror.port());
    // The session attaches asynchronously; publish until the first line arrives.
    std::atomic<bool> reading{true};
    std::thread pub([&] {
        std::uint32_t seq = 0;
        while (reading) {
            mirror.publish(wire::Heartbeat{seq++, 5});
            std::this_thread::sleep_for(2ms);
        }
    });
    const auto line = client.read();
    reading = false;
    pub.join();
    EXPECT_EQ(line.at("type"), "Heartbeat");
    EXPECT_EQ(line.at("t_us"), 5);

    client.send(R"({"type":"Command","target_tilt_deg":30,"gripper_pos":18,"mode":2,"grasp":true})");
    client.send(R"({"type":"Heartbeat","seq":1,"t_us":2})");
    client.send("not json");
    ASSERT_TRUE(wait_for([&] { return mirror.rejected() == 2; }));
    {
        std::lock_guard lock(mu);
        ASSERT_EQ(got.size(), 1u);
        EXPECT_EQ(got[0].target_tilt_deg, 30);
        EXPECT_EQ(got[0].mode, FeedbackMode::CnnPattern);
        EXPECT_TRUE(got[0].grasp);
    }
    mirror.close();
    guard.reset();
    io.stop();
    t.join();
}

TEST(Nodes, LocalhostLoopWithMirrorConsole) {
    RemoteServeConfig rcfg;
    rcfg.listen = Endpoint{"127.0.0.1", 0};
    rcfg.node.holder_tilt_deg = 90.0;
    rcfg.node.initial_orientation_deg = 0.0;
    RemoteServer remote(rcfg);
    remote.start();

    LocalServeConfig lcfg;
    lcfg.remote = Endpoint{"127.0.0.1", remote.port()};
    lcfg.node.mode = FeedbackMode::Downsized;
    lcfg.mirror = Endpoint{"127.0.0.1", 0};
    LocalClient local(lcfg);
    local.start();
    ASSERT_TRUE(local.mirror_port());

    WsClient console(*local.mirror_port());
    bool saw_sensor = false, saw_electrode = false;
    for (int i = 0; i < 400 && !(saw_sensor && saw_electrode); ++i) {
        const auto j = console.read();
        saw_sensor |= j.at("type") == "SensorPair";
        if (j.at("type") == "Electrode") {
            saw_electrode = true;
            EXPECT_EQ(j.at("left").size(), 20u);
            EXPECT_EQ(j.at("predicted"), 255);
        }
    }
    EXPECT_TRUE(saw_sensor);
    EXPECT_TRUE(saw_electrode);

    // Relative angle 90 - 0 = 90: a grasp now misses.
    console.send(R"({"type":"Command","target_tilt_deg":0,"gripper_pos":18,"mode":1,"grasp":true})");
    ASSERT_TRUE(wait_for([&] { return remote.last_grasp().has_value(); }));
    EXPECT_FALSE(remote.last_grasp()->success);
    EXPECT_GE(remote.commands(), 1u);

    ASSERT_TRUE(wait_for([&] { return local.electrodes() >= 30; }));
    EXPECT_EQ(local.faults(), 0u);
    EXPECT_EQ(local.protocol_errors(), 0u);

    local.stop();
    local.wait();
    remote.stop();
    remote.wait();
    EXPECT_GT(local.stats().count(Stage::Total), 0u);
}

TEST(Nodes, RemoteHangsUpOnGarbage) {
    RemoteServeConfig rcfg;
    rcfg.listen = Endpoint{"127.0.0.1", 0};
    RemoteServer remote(rcfg);
    remote.start();

    asio::io_context io;
    tcp::socket s(io);
    s.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), remote.port()));
    const std::uint8_t junk[] = {0x05, 0, 0, 0, 0x09, 1, 2, 3, 4};
    asio::write(s, asio::buffer(junk));
    // Drain SensorPairs until the server closes the socket.
    std::array<std::uint8_t, 4096> buf{};
    boost::system::error_code ec;
    const auto deadline = std::chrono::steady_clock::now() + 5s;
    while (!ec && std::chrono::steady_clock::now() < deadline) s.read_some(asio::buffer(buf), ec);
    EXPECT_TRUE(ec == asio::error::eof || ec == asio::error::connection_reset) << ec.message();
    EXPECT_EQ(remote.commands(), 0u);
    remote.stop();
    remote.wait();
}

TEST(Nodes, LocalFailsFastWithoutRemote) {
    // Grab a free port, then release it so nothing listens there.
    std::uint16_t port = 0;
    {
        asio::io_context io;
        tcp::acceptor a(io, tcp::endpoint(asio::ip::make_address("127.0.0.1"), 0));
        port = a.local_endpoint().port();
    }
    LocalServeConfig lcfg;
    lcfg.remote = Endpoint{"127.0.0.1", port};
    lcfg.connect_timeout_s = 0.3;
    LocalClient local(lcfg);
    EXPECT_THROW(local.start(), DomainError);
}

TEST(Nodes, LocalStopsWhenRemoteEnds) {
    RemoteServeConfig rcfg;
    rcfg.listen = Endpoint{"127.0.0.1", 0};
    rcfg.max_ticks = 30;
    RemoteServer remote(rcfg);
    remote.start();
    LocalServeConfig lcfg;
    lcfg.remote = Endpoint{"127.0.0.1", remote.port()};
    lcfg.node.mode = FeedbackMode::None;
    LocalClient local(lcfg);
    local.start();
    remote.wait();
    EXPECT_EQ(remote.ticks(), 30u);
    EXPECT_TRUE(wait_for([&] { return local.stopped(); }));
    local.wait();
}
