#pragma once

// TCP transport for the two nodes. Each node runs one I/O thread (Asio) and
// one fixed-rate tick thread; they meet only in latest-value mailboxes.

#include <array>
#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/strand.hpp>

#include "tiltxter/nodes.hpp"

namespace tiltxter::net {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

/// "host:port", ":port" or "port". Throws DomainError.
Endpoint parse_endpoint(std::string_view text);
std::string to_string(const Endpoint& ep);

/// Length-prefixed frames over one TCP socket. Incoming frames are split
/// and header-checked, then handed over raw; outgoing frames queue in a
/// bounded outbox that drops the oldest frame when full, so a slow peer can
/// never stall the sender.
class FramedConnection : public std::enable_shared_from_this<FramedConnection> {
public:
    using FrameHandler = std::function<void(std::vector<std::uint8_t> frame)>;
    using CloseHandler = std::function<void(const std::string& reason)>;

    static constexpr std::size_t kDefaultOutbox = 64;

    FramedConnection(boost::asio::ip::tcp::socket socket, FrameHandler on_frame, CloseHandler on_close,
                     std::size_t max_outbox = kDefaultOutbox);

    void start();
    /// Thread-safe.
    void send(const wire::WireMessage& m);
    void close();

    bool open() const { return open_.load(); }
    std::uint64_t dropped() const { return dropped_.load(); }

private:
    void read_some();
    void write_next();
    void fail(const std::string& reason);

    boost::asio::ip::tcp::socket socket_;
    boost::asio::strand<boost::asio::any_io_executor> strand_;
    FrameHandler on_frame_;
    CloseHandler on_close_;
    std::size_t max_outbox_;
    wire::FrameDecoder decoder_;
    std::array<std::uint8_t, 4096> rbuf_{};
    std::deque<std::vector<std::uint8_t>> outbox_;
    bool writing_ = false;
    std::atomic<bool> open_{true};
    std::atomic<std::uint64_t> dropped_{0};
};

struct RemoteServeConfig {
    Endpoint listen;
    RemoteConfig node;
    std::uint64_t max_ticks = 0;  // 0 = until stopped
};

/// Simulated rig: accepts one local node at a time, publishes a SensorPair
/// per tick and applies the newest Command.
class RemoteServer {
public:
    explicit RemoteServer(RemoteServeConfig cfg);
    ~RemoteServer();
    RemoteServer(const RemoteServer&) = delete;
    RemoteServer& operator=(const RemoteServer&) = delete;

    std::uint16_t port() const { return port_; }
    void start();
    void stop();
    /// Blocks until the tick loop ends (max_ticks reached or stop()).
    void wait();

    bool stopped() const { return stop_.load(); }
    std::uint64_t ticks() const { return ticks_.load(); }
    std::uint64_t commands() const { return commands_.load(); }
    std::uint64_t overruns() const { return overruns_.load(); }
    std::optional<GraspOutcome> last_grasp() const;

private:
    void accept();
    void tick_loop();

    RemoteServeConfig cfg_;
    boost::asio::io_context io_;
    boost::asio::ip::tcp::acceptor acceptor_;
    std::uint16_t port_ = 0;
    mutable std::mutex conn_mu_;
    std::shared_ptr<FramedConnection> conn_;  // guarded by conn_mu_
    Mailbox<wire::Command> command_box_;
    wire::SeqGuard guard_;
    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> ticks_{0}, commands_{0}, overruns_{0};
    mutable std::mutex grasp_mu_;
    std::optional<GraspOutcome> last_grasp_;
    std::thread io_thread_, tick_thread_;
};

class MirrorServer;

struct LocalServeConfig {
    Endpoint remote;
    LocalConfig node;
    std::optional<Endpoint> mirror;
    std::uint64_t max_ticks = 0;  // 0 = until stopped
    double connect_timeout_s = 5.0;
};

/// Rendering node: connects to the remote, renders the newest SensorPair
/// each tick, publishes Electrode frames to the JSON mirror and forwards
/// mirror Commands to the remote.
class LocalClient {
public:
    explicit LocalClient(LocalServeConfig cfg);
    ~LocalClient();
    LocalClient(const LocalClient&) = delete;
    LocalClient& operator=(const LocalClient&) = delete;

    /// Connects (retrying until the timeout) and starts both threads.
    void start();
    void stop();
    void wait();

    std::optional<std::uint16_t> mirror_port() const;
    /// True once stopped locally or after the remote hung up.
    bool stopped() const { return stop_.load(); }
    std::uint64_t ticks() const { return ticks_.load(); }
    std::uint64_t electrodes() const { return electrodes_.load(); }
    /// SensorPairs superseded before a tick consumed them.
    std::uint64_t stale_dropped() const { return sensor_box_.overwritten(); }
    std::uint64_t overruns() const { return overruns_.load(); }
    std::uint64_t faults() const { return faults_.load(); }
    std::uint64_t protocol_errors() const { return protocol_errors_.load(); }
    /// Latency statistics; only valid after wait() returned.
    const LatencyStats& stats() const { return node_.stats(); }

private:
    void tick_loop();
    void forward(wire::Command c);

    LocalServeConfig cfg_;
    LocalNode node_;
    boost::asio::io_context io_;
    std::shared_ptr<FramedConnection> conn_;
    std::unique_ptr<MirrorServer> mirror_;
    Mailbox<std::vector<std::uint8_t>> sensor_box_;
    Mailbox<wire::Command> command_box_;
    wire::SeqCounter seqs_;
    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> ticks_{0}, electrodes_{0}, overruns_{0}, faults_{0}, protocol_errors_{0};
    std::thread io_thread_, tick_thread_;
};

}  // namespace tiltxter::net
