#include "replicant/net.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <stdexcept>
#include <system_error>

namespace replicant::net {

namespace {

[[noreturn]] void ThrowErrno(char const* what) {
  throw std::system_error(errno, std::generic_category(), what);
}

sockaddr_in Resolve(HostPort const& address) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(address.port);
  auto const& host = address.host.empty() ? std::string("0.0.0.0") : address.host;
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1)
    return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  int rc = getaddrinfo(host.c_str(), nullptr, &hints, &result);
  if (rc != 0 || result == nullptr)
    throw std::system_error(EHOSTUNREACH, std::generic_category(),
                            "cannot resolve " + host);
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(result->ai_addr)->sin_addr;
  freeaddrinfo(result);
  return addr;
}

}  // namespace

HostPort HostPort::Parse(std::string_view address) {
  auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon + 1 == address.size())
    throw std::invalid_argument("expected host:port, got '" +
                                std::string(address) + "'");
  HostPort hp;
  hp.host = std::string(address.substr(0, colon));
  auto digits = address.substr(colon + 1);
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || value > 65535)
    throw std::invalid_argument("bad port in '" + std::string(address) + "'");
  hp.port = static_cast<std::uint16_t>(value);
  return hp;
}

std::string HostPort::ToString() const {
  return host + ":" + std::to_string(port);
}

void UniqueFd::Reset() {
  if (fd_ >= 0)
    ::close(fd_);
  fd_ = -1;
}

UniqueFd Listen(HostPort const& address, int backlog) {
  UniqueFd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd.valid())
    ThrowErrno("socket");
  int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  auto addr = Resolve(address);
  if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
    ThrowErrno(("bind " + address.ToString()).c_str());
  if (::listen(fd.get(), backlog) != 0)
    ThrowErrno("listen");
  return fd;
}

UniqueFd Connect(HostPort const& address, Nanos timeout) {
  auto addr = Resolve(address);
  UniqueFd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
  if (!fd.valid())
    ThrowErrno("socket");
  int rc = ::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (rc != 0) {
    if (errno != EINPROGRESS)
      ThrowErrno("connect");
    pollfd pfd{fd.get(), POLLOUT, 0};
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(timeout).count();
    rc = ::poll(&pfd, 1, static_cast<int>(std::max<long long>(ms, 1)));
    if (rc == 0) {
      errno = ETIMEDOUT;
      ThrowErrno("connect");
    }
    if (rc < 0)
      ThrowErrno("poll");
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      errno = err;
      ThrowErrno("connect");
    }
  }
  int flags = ::fcntl(fd.get(), F_GETFL, 0);
  ::fcntl(fd.get(), F_SETFL, flags & ~O_NONBLOCK);
  SetNoDelay(fd.get());
  return fd;
}

UniqueFd Accept(int listen_fd) {
  while (true) {
    int fd = ::accept4(listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) {
      UniqueFd out(fd);
      SetNoDelay(out.get());
      return out;
    }
    if (errno == EINTR || errno == ECONNABORTED)
      continue;
    if (errno == EMFILE || errno == ENFILE) {
      ::usleep(10000);
      continue;
    }
    return UniqueFd();
  }
}

void SetNoDelay(int fd) {
  int one = 1;
  if (::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one)) != 0)
    ThrowErrno("setsockopt(TCP_NODELAY)");
  if (!HasNoDelay(fd))
    throw std::system_error(EINVAL, std::generic_category(),
                            "TCP_NODELAY did not stick");
}

bool HasNoDelay(int fd) {
  int value = 0;
  socklen_t len = sizeof(value);
  if (::getsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &value, &len) != 0)
    return false;
  return value != 0;
}

bool WriteAll(int fd, std::string_view data) {
  while (!data.empty()) {
    auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR)
        continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

long ReadSome(int fd, char* buffer, std::size_t size) {
  while (true) {
    auto n = ::recv(fd, buffer, size, 0);
    if (n < 0 && errno == EINTR)
      continue;
    return static_cast<long>(n);
  }
}

void ShutdownBoth(int fd) {
  if (fd >= 0)
    ::shutdown(fd, SHUT_RDWR);
}

std::uint16_t LocalPort(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0)
    ThrowErrno("getsockname");
  return ntohs(addr.sin_port);
}

std::uint16_t PickFreePort() {
  auto fd = Listen(HostPort{"127.0.0.1", 0});
  return LocalPort(fd.get());
}

}  // namespace replicant::net
