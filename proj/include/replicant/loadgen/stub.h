#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "replicant/net.h"
#include "replicant/types.h"

namespace replicant::loadgen {

// Latency profile of the stub. All requests, across connections, are served
// one at a time in arrival order, so a slow request delays those behind it.
struct StubProfile {
  enum class Kind : std::uint8_t {
    kInstant,   // no service time
    kFixed,     // every request takes `fixed`
    kStall,     // within every 100 requests, #1-96 take 1 ms, #97-100 take 250 ms
    kCapacity,  // every request takes 1/capacity seconds
  };
  Kind kind = Kind::kInstant;
  Nanos fixed{0};
  double capacity = 0;

  // "instant", "fixed:<ms>", "co", "capacity:<ops/s>". Throws
  // std::invalid_argument.
  static StubProfile Parse(std::string_view text);

  // Service time of the k-th request (0-based).
  Nanos ServiceTime(std::uint64_t k) const;
};

// Text-protocol server for load generator tests: "put" and "del" answer "ok",
// "get" answers "notfound", "stats" reports the served count.
class StubServer {
 public:
  explicit StubServer(StubProfile profile, std::string const& address = "127.0.0.1:0");
  ~StubServer();
  StubServer(StubServer const&) = delete;
  StubServer& operator=(StubServer const&) = delete;

  void Start();
  void Stop();

  std::uint16_t Port() const { return port_; }
  std::string Address() const;
  std::uint64_t Served() const { return served_.load(); }

 private:
  struct Connection {
    net::UniqueFd fd;
    std::mutex write_mu;
  };
  struct Request {
    std::shared_ptr<Connection> conn;
    std::string line;
  };

  void AcceptLoop();
  void ReadLoop(std::shared_ptr<Connection> conn);
  void ServeLoop();
  std::string Reply(std::string_view line) const;

  StubProfile profile_;
  net::UniqueFd listener_;
  std::uint16_t port_ = 0;
  std::string host_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> served_{0};

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Request> queue_;
  std::vector<std::shared_ptr<Connection>> connections_;
  std::vector<std::thread> readers_;
  std::thread acceptor_;
  std::thread server_;
};

}  // namespace replicant::loadgen
