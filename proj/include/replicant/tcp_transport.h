#pragma once

#include <atomic>
#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "replicant/net.h"
#include "replicant/scheduler.h"
#include "replicant/transport.h"

namespace replicant {

struct SocketStats {
  std::size_t total = 0;
  std::size_t nodelay = 0;
};

// Newline-framed JSON over TCP. One persistent outbound connection per peer
// multiplexes concurrent RPCs by tag; inbound connections are served one
// thread each. Requests to Self() are answered by the local handler without
// touching the network.
class TcpTransport final : public Transport {
 public:
  TcpTransport(PeerId self, std::vector<std::string> peers, Scheduler& scheduler);
  ~TcpTransport() override;

  TcpTransport(TcpTransport const&) = delete;
  TcpTransport& operator=(TcpTransport const&) = delete;

  // Binds peers[self] and starts accepting peer connections. Throws
  // std::system_error if the address cannot be bound.
  void Serve(MessageHandler handler);

  void Rpc(PeerId peer,
           PeerMessage request,
           Nanos deadline,
           RpcCallback done) override;

  PeerId Self() const override { return self_; }
  std::size_t NumPeers() const override { return peers_.size(); }

  // Closes every connection and joins all threads. Outstanding RPCs complete
  // with Disconnected.
  void Shutdown();

  std::uint16_t ListenPort() const;
  SocketStats Sockets() const;

 private:
  class Channel;
  struct Inbound {
    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void AcceptLoop();
  void ServeConnection(Inbound* conn);
  void ReapInbound();

  PeerId self_;
  std::vector<std::string> peers_;
  Scheduler& scheduler_;
  MessageHandler handler_;
  std::atomic<std::uint64_t> next_tag_{1};
  std::vector<std::shared_ptr<Channel>> channels_;

  net::UniqueFd listener_;
  std::thread acceptor_;
  mutable std::mutex inbound_mu_;
  std::list<Inbound> inbound_;
  std::atomic<bool> stopping_{false};
};

}  // namespace replicant
