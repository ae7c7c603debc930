#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "replicant/net.h"
#include "replicant/types.h"
#include "replicant/wire.h"

namespace replicant::loadgen {

using namespace std::chrono_literals;

struct ClientReply {
  enum class Status { kOk, kNotFound, kError };
  Status status = Status::kError;
  std::string line;   // final reply line, or the failure reason
  std::size_t retries = 0;

  bool Succeeded() const { return status != Status::kError; }
};

// Blocking client for the text protocol. Follows "retry <addr>" redirects,
// rotates through the cluster on "retry"/"retry unknown" and on connection
// failures.
class KvClient {
 public:
  explicit KvClient(std::vector<std::string> cluster,
                    Nanos op_timeout = 10s,
                    std::size_t max_retries = 200);

  ClientReply Execute(std::string_view line);

  // One request/reply exchange with the current target, no retry handling.
  // nullopt on I/O failure or timeout.
  std::optional<std::string> RoundTrip(std::string_view line, Nanos timeout);

  void Close();
  std::string Target() const;

 private:
  bool Connect();
  void Advance();

  std::vector<net::HostPort> cluster_;
  std::size_t target_ = 0;
  Nanos op_timeout_;
  std::size_t max_retries_;
  net::UniqueFd fd_;
  LineFramer framer_;
};

}  // namespace replicant::loadgen
