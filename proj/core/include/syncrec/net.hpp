// Minimal blocking TCP sockets (POSIX).
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>

namespace syncrec::net {

/// Owning socket descriptor.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket() { reset(); }
    Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            reset();
            fd_ = std::exchange(other.fd_, -1);
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    void reset();
    /// Unblocks pending reads/writes on other threads without closing.
    void shutdown();

private:
    int fd_ = -1;
};

class TcpStream {
public:
    TcpStream() = default;
    explicit TcpStream(Socket socket) : socket_(std::move(socket)) {}

    /// Throws Error("connect-failed").
    static TcpStream connect(const std::string& host, std::uint16_t port);

    /// Throws Error("io") on failure.
    void send_all(std::span<const std::uint8_t> data);
    /// Bytes read; 0 on orderly shutdown. Throws Error("io") on failure.
    std::size_t recv_some(std::span<std::uint8_t> buffer);
    /// Waits up to `timeout_ms` for readable data.
    bool wait_readable(int timeout_ms);

    bool valid() const { return socket_.valid(); }
    void shutdown() { socket_.shutdown(); }
    void close() { socket_.reset(); }

private:
    Socket socket_;
};

class TcpListener {
public:
    /// Binds to all interfaces; port 0 selects an ephemeral port.
    static TcpListener bind(std::uint16_t port);

    std::uint16_t port() const { return port_; }
    /// nullopt once the listener has been shut down.
    std::optional<TcpStream> accept();
    void shutdown() { socket_.shutdown(); }

private:
    Socket socket_;
    std::uint16_t port_ = 0;
};

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

/// Parses "HOST:PORT" (or ":PORT" / "PORT" for localhost). Throws Error("bad-address").
Endpoint parse_endpoint(const std::string& text, std::uint16_t default_port);

} // namespace syncrec::net
