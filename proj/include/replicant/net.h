#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "replicant/types.h"

namespace replicant::net {

struct HostPort {
  std::string host;
  std::uint16_t port = 0;

  // "host:port"; throws std::invalid_argument.
  static HostPort Parse(std::string_view address);
  std::string ToString() const;
};

// Owning file descriptor.
class UniqueFd {
 public:
  UniqueFd() = default;
  explicit UniqueFd(int fd) : fd_(fd) {}
  ~UniqueFd() { Reset(); }

  UniqueFd(UniqueFd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  UniqueFd& operator=(UniqueFd&& other) noexcept {
    if (this != &other) {
      Reset();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  UniqueFd(UniqueFd const&) = delete;
  UniqueFd& operator=(UniqueFd const&) = delete;

  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() { return std::exchange(fd_, -1); }
  void Reset();

 private:
  int fd_ = -1;
};

// Listening socket with SO_REUSEADDR. Throws std::system_error.
UniqueFd Listen(HostPort const& address, int backlog = 512);

// Connected socket with TCP_NODELAY set. Throws std::system_error.
UniqueFd Connect(HostPort const& address, Nanos timeout);

// accept(2) wrapper; returns an invalid fd when the listener was shut down.
// The accepted socket has TCP_NODELAY set.
UniqueFd Accept(int listen_fd);

// Disables Nagle's algorithm; throws std::system_error if the option does
// not stick.
void SetNoDelay(int fd);
bool HasNoDelay(int fd);

bool WriteAll(int fd, std::string_view data);

// Reads up to `size` bytes; 0 on EOF, negative on error.
long ReadSome(int fd, char* buffer, std::size_t size);

void ShutdownBoth(int fd);
std::uint16_t LocalPort(int fd);

// Finds a currently free loopback port (racy by nature; tests only).
std::uint16_t PickFreePort();

}  // namespace replicant::net
