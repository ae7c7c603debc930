#pragma once

#include <optional>
#include <string>

#include "replicant/net.h"
#include "replicant/wire.h"

namespace replicant::testing {

// Minimal blocking client for the text protocol: one connection, no retries.
class LineClient {
 public:
  explicit LineClient(std::string const& address)
      : fd_(net::Connect(net::HostPort::Parse(address), std::chrono::seconds(2))) {}

  std::optional<std::string> Send(std::string const& line) {
    if (!net::WriteAll(fd_.get(), line + "\n"))
      return std::nullopt;
    return Read();
  }

  std::optional<std::string> Read() {
    char buf[4096];
    while (true) {
      if (auto line = framer_.Next())
        return line;
      auto n = net::ReadSome(fd_.get(), buf, sizeof buf);
      if (n <= 0)
        return std::nullopt;
      framer_.Feed(std::string_view(buf, static_cast<std::size_t>(n)));
    }
  }

  int fd() const { return fd_.get(); }
  void Close() { fd_.Reset(); }

 private:
  net::UniqueFd fd_;
  LineFramer framer_;
};

}  // namespace replicant::testing
