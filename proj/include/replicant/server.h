#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <variant>

#include "replicant/config.h"
#include "replicant/kvstore.h"
#include "replicant/log.h"
#include "replicant/multipaxos.h"
#include "replicant/net.h"
#include "replicant/scheduler.h"
#include "replicant/tcp_transport.h"

namespace replicant {

// Client text protocol:
//   get <key> | put <key> <value> | del <key> | stats
// Replies: ok | ok <value> | notfound | retry [addr] | err <reason>
struct StatsRequest {};
using ClientRequest = std::variant<Command, StatsRequest>;

// nullopt for anything malformed (answered with "err bad-command").
std::optional<ClientRequest> ParseClientLine(std::string_view line);

// Reply line (without '\n') for an executed command.
std::string FormatResult(CommandKind kind, CommandResult const& result);

// A Replicant peer: consensus engine, executor and client sessions.
class Server {
 public:
  explicit Server(ServerConfig config);
  ~Server();

  Server(Server const&) = delete;
  Server& operator=(Server const&) = delete;

  // Binds both listeners and starts all workers. Throws std::system_error on
  // bind failure.
  void Start();

  // Idempotent; joins every thread.
  void Stop();

  std::size_t SessionCount() const;
  // Client sessions plus peer connections of this process.
  SocketStats Sockets() const;

  MultiPaxos& Engine() { return *engine_; }
  Log& ReplicatedLog() { return log_; }
  ServerConfig const& Config() const { return config_; }

 private:
  struct Session {
    ClientId id = 0;
    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};

    std::mutex mu;
    std::condition_variable cv;
    bool awaiting = false;
    LogIndex pending_index = 0;
    std::unordered_map<LogIndex, std::string> early;
    std::optional<std::string> reply;
  };

  void AcceptLoop();
  void ServeSession(std::shared_ptr<Session> session);
  std::string Submit(std::shared_ptr<Session> const& session, Command command);
  void ExecutorLoop();
  void Deliver(Execution const& execution);
  void ReapSessions();
  std::string RetryLine(std::optional<PeerId> hint) const;
  std::string StatsLine() const;

  ServerConfig const config_;
  ThreadScheduler scheduler_;
  Log log_;
  KVStore store_;
  TcpTransport transport_;
  std::unique_ptr<MultiPaxos> engine_;

  net::UniqueFd client_listener_;
  std::thread acceptor_;
  std::thread executor_;
  std::atomic<ClientId> next_client_{1};
  std::atomic<bool> stopping_{false};
  bool started_ = false;

  mutable std::mutex sessions_mu_;
  std::unordered_map<ClientId, std::shared_ptr<Session>> sessions_;
  std::list<std::shared_ptr<Session>> threads_;
};

}  // namespace replicant
