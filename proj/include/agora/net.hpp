#pragma once

// Thin POSIX TCP helpers. Blocking sockets with short poll loops; everything
// here returns errors as values so callers can drive retry/backoff.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <string>

#include "agora/error.hpp"

namespace agora::net {

inline std::uint64_t wall_clock_us() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::microseconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
}

inline std::uint64_t steady_clock_us() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::microseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = o.fd_;
      o.fd_ = -1;
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  void close() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

  bool send_all(const void* buf, size_t n) const {
    const char* p = static_cast<const char*>(buf);
    while (n > 0) {
      const ssize_t w = ::send(fd_, p, n, MSG_NOSIGNAL);
      if (w < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      p += w;
      n -= static_cast<size_t>(w);
    }
    return true;
  }

  bool send_all(const std::string& s) const { return send_all(s.data(), s.size()); }

  // Reads exactly n bytes; false on EOF or error.
  bool recv_all(void* buf, size_t n) const {
    char* p = static_cast<char*>(buf);
    while (n > 0) {
      const ssize_t r = ::recv(fd_, p, n, 0);
      if (r < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      if (r == 0) return false;
      p += r;
      n -= static_cast<size_t>(r);
    }
    return true;
  }

 private:
  int fd_ = -1;
};

inline Socket connect_to(const std::string& host, std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return Socket();
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    return Socket();
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    return Socket();
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return Socket(fd);
}

class Listener {
 public:
  Listener() = default;
  Listener(Listener&&) = default;
  Listener& operator=(Listener&&) = default;

  // Binds and listens; port 0 picks an ephemeral port.
  static Listener open(const std::string& host, std::uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) fail(ErrorCode::IoError, "socket() failed");
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd);
      fail(ErrorCode::ConfigError, "bad listen address " + host);
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd);
      fail(ErrorCode::IoError, "bind failed on " + host + ":" + std::to_string(port));
    }
    if (::listen(fd, 128) != 0) {
      ::close(fd);
      fail(ErrorCode::IoError, "listen failed");
    }
    Listener l;
    l.sock_ = Socket(fd);
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
    l.port_ = ntohs(bound.sin_port);
    return l;
  }

  // Waits up to timeout_ms for a connection; invalid Socket on timeout/close.
  Socket accept(int timeout_ms) const {
    pollfd pfd{sock_.fd(), POLLIN, 0};
    const int r = ::poll(&pfd, 1, timeout_ms);
    if (r <= 0) return Socket();
    const int Client = ::accept(sock_.fd(), nullptr, nullptr);
    if (Client < 0) return Socket();
    const int one = 1;
    ::setsockopt(Client, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return Socket(Client);
  }

  std::uint16_t port() const { return port_; }
  bool valid() const { return sock_.valid(); }
  void close() { sock_.close(); }

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  static Endpoint parse(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) {
      fail(ErrorCode::ConfigError, "address '" + s + "' must be host:port");
    }
    Endpoint e;
    e.host = s.substr(0, colon);
    try {
      e.port = static_cast<std::uint16_t>(std::stoul(s.substr(colon + 1)));
    } catch (const std::exception&) {
      fail(ErrorCode::ConfigError, "bad port in '" + s + "'");
    }
    return e;
  }

  std::string str() const { return host + ":" + std::to_string(port); }
};

}  // namespace agora::net
