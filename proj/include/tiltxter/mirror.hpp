#pragma once

// JSON mirror of the local node's traffic over a WebSocket, one JSON object
// per text message. A single console may be attached; a new connection
// replaces the old one.

#include <cstdint>
#include <functional>
#include <memory>

#include <boost/asio/io_context.hpp>

#include "tiltxter/transport.hpp"
#include "tiltxter/wire.hpp"

namespace tiltxter::net {

class MirrorServer {
public:
    using CommandHandler = std::function<void(const wire::Command&)>;

    static constexpr std::size_t kMaxOutbox = 256;

    /// Binds immediately; serving happens on `io`'s thread.
    MirrorServer(boost::asio::io_context& io, const Endpoint& ep, CommandHandler on_command);
    ~MirrorServer();

    std::uint16_t port() const;
    /// Thread-safe. Dropped silently when no console is attached.
    void publish(const wire::WireMessage& m);
    void close();

    std::uint64_t dropped() const;
    std::uint64_t rejected() const;

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

}  // namespace tiltxter::net
