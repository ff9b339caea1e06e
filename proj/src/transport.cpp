#include "tiltxter/transport.hpp"

#include <charconv>

#include <boost/asio/bind_executor.hpp>
#include <boost/asio/buffer.hpp>
#include <boost/asio/connect.hpp>
#include <boost/asio/executor_work_guard.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/write.hpp>
#include <spdlog/spdlog.h>

#include "tiltxter/mirror.hpp"

namespace tiltxter::net {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

Endpoint parse_endpoint(std::string_view text) {
    Endpoint ep;
    std::string_view port_text = text;
    if (const auto colon = text.rfind(':'); colon != std::string_view::npos) {
        if (colon > 0) ep.host = std::string(text.substr(0, colon));
        port_text = text.substr(colon + 1);
    }
    unsigned port = 0;
    const auto [end, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || end != port_text.data() + port_text.size() || port > 65535 || port_text.empty())
        throw DomainError("bad address '" + std::string(text) + "', expected host:port");
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

std::string to_string(const Endpoint& ep) { return ep.host + ":" + std::to_string(ep.port); }

namespace {

tcp::endpoint resolve(asio::io_context& io, const Endpoint& ep) {
    tcp::resolver resolver(io);
    const auto results = resolver.resolve(ep.host, std::to_string(ep.port));
    if (results.empty()) throw DomainError("cannot resolve " + to_string(ep));
    return *results.begin();
}

}  // namespace

FramedConnection::FramedConnection(tcp::socket socket, FrameHandler on_frame, CloseHandler on_close,
                                   std::size_t max_outbox)
    : socket_(std::move(socket)),
      strand_(asio::make_strand(socket_.get_executor())),
      on_frame_(std::move(on_frame)),
      on_close_(std::move(on_close)),
      max_outbox_(std::max<std::size_t>(1, max_outbox)) {
    socket_.set_option(tcp::no_delay(true));
}

void FramedConnection::start() {
    asio::post(strand_, [self = shared_from_this()] { self->read_some(); });
}

void FramedConnection::read_some() {
    socket_.async_read_some(
        asio::buffer(rbuf_),
        asio::bind_executor(strand_, [self = shared_from_this()](boost::system::error_code ec, std::size_t n) {
            if (ec) {
                self->fail(ec == asio::error::eof ? "peer closed the connection" : ec.message());
                return;
            }
            if (!self->open_) return;
            try {
                self->decoder_.feed(std::span(self->rbuf_.data(), n));
                while (auto frame = self->decoder_.next_frame()) self->on_frame_(std::move(*frame));
            } catch (const wire::ProtocolError& e) {
                self->fail(std::string("protocol error: ") + e.what() + " at byte " + std::to_string(e.offset()));
                return;
            }
            self->read_some();
        }));
}

void FramedConnection::send(const wire::WireMessage& m) {
    if (!open_) return;
    asio::post(strand_, [self = shared_from_this(), bytes = wire::encode_msg(m)]() mutable {
        if (!self->open_) return;
        if (self->outbox_.size() >= self->max_outbox_) {
            // Never drop the frame currently being written.
            const auto victim = self->writing_ ? std::next(self->outbox_.begin()) : self->outbox_.begin();
            if (victim != self->outbox_.end()) {
                self->outbox_.erase(victim);
                ++self->dropped_;
            }
        }
        self->outbox_.push_back(std::move(bytes));
        if (!self->writing_) self->write_next();
    });
}

void FramedConnection::write_next() {
    if (outbox_.empty() || !open_) {
        writing_ = false;
        return;
    }
    writing_ = true;
    asio::async_write(socket_, asio::buffer(outbox_.front()),
                      asio::bind_executor(strand_, [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
                          if (ec) {
                              self->fail(ec.message());
                              return;
                          }
                          // fail() may have emptied the outbox while this
                          // completion was queued.
                          if (!self->open_) return;
                          self->outbox_.pop_front();
                          self->write_next();
                      }));
}

void FramedConnection::fail(const std::string& reason) {
    if (!open_.exchange(false)) return;
    boost::system::error_code ignored;
    socket_.shutdown(tcp::socket::shutdown_both, ignored);
    socket_.close(ignored);
    outbox_.clear();
    writing_ = false;
    if (on_close_) on_close_(reason);
}

void FramedConnection::close() {
    asio::post(strand_, [self = shared_from_this()] { self->fail("closed locally"); });
}

// ---------------------------------------------------------------------------

RemoteServer::RemoteServer(RemoteServeConfig cfg) : cfg_(std::move(cfg)), acceptor_(io_) {
    const auto ep = resolve(io_, cfg_.listen);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(tcp::acceptor::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
}

RemoteServer::~RemoteServer() {
    stop();
    wait();
}

std::optional<GraspOutcome> RemoteServer::last_grasp() const {
    std::lock_guard lock(grasp_mu_);
    return last_grasp_;
}

void RemoteServer::accept() {
    acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
        if (ec) {
            if (ec != asio::error::operation_aborted) spdlog::error("accept failed: {}", ec.message());
            return;
        }
        spdlog::info("remote: local node connected from {}", socket.remote_endpoint().address().to_string());
        guard_ = wire::SeqGuard{};
        auto conn = std::make_shared<FramedConnection>(
            std::move(socket),
            [this](std::vector<std::uint8_t> frame) {
                const auto msg = wire::decode_msg(frame);
                guard_.check(msg);
                if (const auto* c = std::get_if<wire::Command>(&msg)) {
                    command_box_.put(*c);
                    ++commands_;
                }
            },
            [](const std::string& why) { spdlog::warn("remote: connection closed: {}", why); });
        {
            std::lock_guard lock(conn_mu_);
            if (conn_) conn_->close();
            conn_ = conn;
        }
        conn->start();
        accept();
    });
}

void RemoteServer::start() {
    accept();
    io_thread_ = std::thread([this] {
        auto guard = asio::make_work_guard(io_);
        try {
            io_.run();
        } catch (const std::exception& e) {
            spdlog::error("remote io: {}", e.what());
        }
    });
    tick_thread_ = std::thread([this] { tick_loop(); });
    spdlog::info("remote: listening on port {}", port_);
}

void RemoteServer::tick_loop() {
    RemoteNode node(cfg_.node);
    wire::SeqCounter seqs;
    FixedRateLoop loop(kTickPeriod);
    loop.run([&] {
        if (stop_) return false;
        const auto cmd = command_box_.take();
        const auto sp = node.tick(cmd, now_us());
        if (cmd && cmd->grasp) {
            std::lock_guard lock(grasp_mu_);
            last_grasp_ = node.last_grasp();
        }
        const auto n = ++ticks_;
        std::shared_ptr<FramedConnection> conn;
        {
            std::lock_guard lock(conn_mu_);
            conn = conn_;
        }
        if (conn && conn->open()) {
            conn->send(sp);
            if (n % 60 == 0) conn->send(wire::Heartbeat{seqs.next(wire::Tag::Heartbeat), now_us()});
        }
        overruns_ = loop.overruns();
        return cfg_.max_ticks == 0 || n < cfg_.max_ticks;
    });
    overruns_ = loop.overruns();
}

void RemoteServer::stop() {
    stop_ = true;
    asio::post(io_, [this] {
        boost::system::error_code ignored;
        acceptor_.close(ignored);
        std::lock_guard lock(conn_mu_);
        if (conn_) conn_->close();
    });
}

void RemoteServer::wait() {
    if (tick_thread_.joinable()) tick_thread_.join();
    stop_ = true;
    if (io_thread_.joinable()) {
        stop();
        io_.stop();
        io_thread_.join();
        // Run the close handlers queued by stop() so the peer sees the
        // connection end now rather than at destruction.
        io_.restart();
        io_.poll();
    }
}

// ---------------------------------------------------------------------------

LocalClient::LocalClient(LocalServeConfig cfg) : cfg_(std::move(cfg)), node_(cfg_.node) {}

LocalClient::~LocalClient() {
    stop();
    wait();
}

std::optional<std::uint16_t> LocalClient::mirror_port() const {
    if (!mirror_) return std::nullopt;
    return mirror_->port();
}

void LocalClient::start() {
    const auto ep = resolve(io_, cfg_.remote);
    tcp::socket socket(io_);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(cfg_.connect_timeout_s);
    while (true) {
        boost::system::error_code ec;
        socket.connect(ep, ec);
        if (!ec) break;
        socket.close();
        if (std::chrono::steady_clock::now() >= deadline)
            throw DomainError("cannot connect to remote node at " + to_string(cfg_.remote) + ": " + ec.message());
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    spdlog::info("local: connected to remote at {}", to_string(cfg_.remote));

    conn_ = std::make_shared<FramedConnection>(
        std::move(socket),
        [this](std::vector<std::uint8_t> frame) {
            if (frame[4] == static_cast<std::uint8_t>(wire::Tag::SensorPair)) sensor_box_.put(std::move(frame));
        },
        [this](const std::string& why) {
            spdlog::warn("local: remote connection closed: {}", why);
            stop_ = true;
        });
    conn_->start();

    if (cfg_.mirror) {
        mirror_ = std::make_unique<MirrorServer>(io_, *cfg_.mirror,
                                                 [this](const wire::Command& c) { command_box_.put(c); });
        spdlog::info("local: JSON mirror on port {}", mirror_->port());
    }

    io_thread_ = std::thread([this] {
        auto guard = asio::make_work_guard(io_);
        try {
            io_.run();
        } catch (const std::exception& e) {
            spdlog::error("local io: {}", e.what());
        }
    });
    tick_thread_ = std::thread([this] { tick_loop(); });
}

void LocalClient::tick_loop() {
    wire::SeqGuard guard;
    FixedRateLoop loop(kTickPeriod);
    loop.run([&] {
        if (stop_) return false;
        const auto n = ++ticks_;

        if (auto cmd = command_box_.take()) {
            node_.apply(*cmd);
            cmd->seq = seqs_.next(wire::Tag::Command);
            cmd->t_us = now_us();
            conn_->send(*cmd);
            if (mirror_) mirror_->publish(*cmd);
        }

        if (auto frame = sensor_box_.take()) {
            try {
                const auto bytes = node_.tick_bytes(*frame);
                const auto in = wire::decode_msg(*frame);
                guard.check(in);
                ++electrodes_;
                if (mirror_) {
                    mirror_->publish(in);
                    mirror_->publish(wire::decode_msg(bytes));
                }
            } catch (const wire::ProtocolError& e) {
                ++protocol_errors_;
                spdlog::error("local: dropped frame: {}", e.what());
            }
            faults_ = node_.faults();
        }

        if (n % 60 == 0) {
            const wire::Heartbeat hb{seqs_.next(wire::Tag::Heartbeat), now_us()};
            conn_->send(hb);
            if (mirror_) mirror_->publish(hb);
        }
        overruns_ = loop.overruns();
        return cfg_.max_ticks == 0 || n < cfg_.max_ticks;
    });
    overruns_ = loop.overruns();
}

void LocalClient::stop() {
    stop_ = true;
    asio::post(io_, [this] {
        if (conn_) conn_->close();
        if (mirror_) mirror_->close();
    });
}

void LocalClient::wait() {
    if (tick_thread_.joinable()) tick_thread_.join();
    stop_ = true;
    if (io_thread_.joinable()) {
        stop();
        io_.stop();
        io_thread_.join();
        // Run the close handlers queued by stop() so the peer sees the
        // connection end now rather than at destruction.
        io_.restart();
        io_.poll();
    }
}

}  // namespace tiltxter::net
