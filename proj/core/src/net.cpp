#include "syncrec/net.hpp"

#include "syncrec/error.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace syncrec::net {

namespace {

std::string errno_text() { return std::strerror(errno); }

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

} // namespace

void Socket::reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
}

void Socket::shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

TcpStream TcpStream::connect(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const auto service = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &result); rc != 0)
        throw Error("connect-failed", host + ": " + ::gai_strerror(rc));
    std::string last_error = "no addresses";
    for (auto* ai = result; ai != nullptr; ai = ai->ai_next) {
        Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
        if (!s.valid()) continue;
        if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
            ::freeaddrinfo(result);
            set_nodelay(s.fd());
            return TcpStream(std::move(s));
        }
        last_error = errno_text();
    }
    ::freeaddrinfo(result);
    throw Error("connect-failed", host + ":" + service + ": " + last_error);
}

void TcpStream::send_all(std::span<const std::uint8_t> data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const auto n = ::send(socket_.fd(), data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error("io", "send: " + errno_text());
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::size_t TcpStream::recv_some(std::span<std::uint8_t> buffer) {
    while (true) {
        const auto n = ::recv(socket_.fd(), buffer.data(), buffer.size(), 0);
        if (n >= 0) return static_cast<std::size_t>(n);
        if (errno == EINTR) continue;
        throw Error("io", "recv: " + errno_text());
    }
}

bool TcpStream::wait_readable(int timeout_ms) {
    pollfd p{socket_.fd(), POLLIN, 0};
    return ::poll(&p, 1, timeout_ms) > 0;
}

TcpListener TcpListener::bind(std::uint16_t port) {
    TcpListener l;
    l.socket_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!l.socket_.valid()) throw Error("bind-failed", errno_text());
    int one = 1;
    ::setsockopt(l.socket_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(l.socket_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw Error("bind-failed", "port " + std::to_string(port) + ": " + errno_text());
    if (::listen(l.socket_.fd(), 64) != 0) throw Error("bind-failed", errno_text());
    socklen_t len = sizeof(addr);
    ::getsockname(l.socket_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    l.port_ = ntohs(addr.sin_port);
    return l;
}

std::optional<TcpStream> TcpListener::accept() {
    while (true) {
        const int fd = ::accept(socket_.fd(), nullptr, nullptr);
        if (fd >= 0) {
            set_nodelay(fd);
            return TcpStream(Socket(fd));
        }
        if (errno == EINTR) continue;
        return std::nullopt;
    }
}

Endpoint parse_endpoint(const std::string& text, std::uint16_t default_port) {
    Endpoint ep;
    ep.port = default_port;
    if (text.empty()) return ep;
    const auto colon = text.rfind(':');
    std::string host = colon == std::string::npos ? text : text.substr(0, colon);
    std::string port = colon == std::string::npos ? std::string{} : text.substr(colon + 1);
    if (colon == std::string::npos && !host.empty() && host.find_first_not_of("0123456789") == std::string::npos) {
        port = host;
        host.clear();
    }
    if (!host.empty()) ep.host = host;
    if (!port.empty()) {
        unsigned value = 0;
        auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
        if (ec != std::errc{} || ptr != port.data() + port.size() || value == 0 || value > 65535)
            throw Error("bad-address", "invalid port in '" + text + "'");
        ep.port = static_cast<std::uint16_t>(value);
    }
    return ep;
}

} // namespace syncrec::net
