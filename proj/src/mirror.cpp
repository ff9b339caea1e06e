#include "tiltxter/mirror.hpp"

#include <atomic>
#include <deque>
#include <string>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/beast/core/buffers_to_string.hpp>
#include <boost/beast/core/flat_buffer.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

namespace tiltxter::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

struct Session : std::enable_shared_from_this<Session> {
    explicit Session(tcp::socket s) : ws(std::move(s)) {}

    websocket::stream<tcp::socket> ws;
    beast::flat_buffer rbuf;
    std::deque<std::string> outbox;
    bool writing = false;
    bool open = false;
};

}  // namespace

struct MirrorServer::Impl : std::enable_shared_from_this<MirrorServer::Impl> {
    Impl(asio::io_context& io, CommandHandler h) : io(io), acceptor(io), on_command(std::move(h)) {}

    asio::io_context& io;
    tcp::acceptor acceptor;
    CommandHandler on_command;
    std::shared_ptr<Session> session;
    std::uint16_t port = 0;
    std::atomic<std::uint64_t> dropped{0}, rejected{0};

    void accept() {
        acceptor.async_accept([self = shared_from_this()](boost::system::error_code ec, tcp::socket socket) {
            if (ec) return;
            auto s = std::make_shared<Session>(std::move(socket));
            s->ws.text(true);
            s->ws.async_accept([self, s](boost::system::error_code ec2) {
                if (ec2) {
                    spdlog::warn("mirror: handshake failed: {}", ec2.message());
                    return;
                }
                if (self->session) self->drop(self->session);
                s->open = true;
                self->session = s;
                spdlog::info("mirror: console attached");
                self->read(s);
            });
            self->accept();
        });
    }

    void read(const std::shared_ptr<Session>& s) {
        s->ws.async_read(s->rbuf, [self = shared_from_this(), s](boost::system::error_code ec, std::size_t) {
            if (ec) {
                if (ec != websocket::error::closed && ec != asio::error::operation_aborted)
                    spdlog::info("mirror: console detached: {}", ec.message());
                self->drop(s);
                return;
            }
            const auto text = beast::buffers_to_string(s->rbuf.data());
            s->rbuf.consume(s->rbuf.size());
            self->handle(text);
            self->read(s);
        });
    }

    void handle(const std::string& text) {
        const auto j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) {
            ++rejected;
            spdlog::warn("mirror: ignoring non-JSON message");
            return;
        }
        try {
            const auto m = wire::from_json(j);
            if (const auto* c = std::get_if<wire::Command>(&m)) {
                on_command(*c);
                return;
            }
            ++rejected;
            spdlog::warn("mirror: only Command messages are accepted");
        } catch (const wire::ProtocolError& e) {
            ++rejected;
            spdlog::warn("mirror: {}", e.what());
        }
    }

    void enqueue(std::string line) {
        const auto& s = session;
        if (!s || !s->open) return;
        if (s->outbox.size() >= kMaxOutbox) {
            const auto victim = s->writing ? std::next(s->outbox.begin()) : s->outbox.begin();
            if (victim != s->outbox.end()) {
                s->outbox.erase(victim);
                ++dropped;
            }
        }
        s->outbox.push_back(std::move(line));
        if (!s->writing) write(s);
    }

    void write(const std::shared_ptr<Session>& s) {
        if (s->outbox.empty() || !s->open) {
            s->writing = false;
            return;
        }
        s->writing = true;
        s->ws.async_write(asio::buffer(s->outbox.front()),
                          [self = shared_from_this(), s](boost::system::error_code ec, std::size_t) {
                              if (ec) {
                                  self->drop(s);
                                  return;
                              }
                              if (!s->open) return;
                              s->outbox.pop_front();
                              self->write(s);
                          });
    }

    void drop(const std::shared_ptr<Session>& s) {
        if (!s->open) return;
        s->open = false;
        s->outbox.clear();
        boost::system::error_code ignored;
        beast::get_lowest_layer(s->ws).close(ignored);
        if (session == s) session.reset();
    }
};

MirrorServer::MirrorServer(asio::io_context& io, const Endpoint& ep, CommandHandler on_command)
    : impl_(std::make_shared<Impl>(io, std::move(on_command))) {
    tcp::resolver resolver(io);
    const auto results = resolver.resolve(ep.host, std::to_string(ep.port));
    if (results.empty()) throw DomainError("cannot resolve mirror address " + to_string(ep));
    const tcp::endpoint bind_ep = *results.begin();
    impl_->acceptor.open(bind_ep.protocol());
    impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
    impl_->acceptor.bind(bind_ep);
    impl_->acceptor.listen();
    impl_->port = impl_->acceptor.local_endpoint().port();
    impl_->accept();
}

MirrorServer::~MirrorServer() = default;

std::uint16_t MirrorServer::port() const { return impl_->port; }

void MirrorServer::publish(const wire::WireMessage& m) {
    asio::post(impl_->io, [impl = impl_, line = wire::to_json_line(m)]() mutable { impl->enqueue(std::move(line)); });
}

void MirrorServer::close() {
    asio::post(impl_->io, [impl = impl_] {
        boost::system::error_code ignored;
        impl->acceptor.close(ignored);
        if (impl->session) impl->drop(impl->session);
    });
}

std::uint64_t MirrorServer::dropped() const { return impl_->dropped.load(); }
std::uint64_t MirrorServer::rejected() const { return impl_->rejected.load(); }

}  // namespace tiltxter::net
