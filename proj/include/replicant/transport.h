#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>

#include "replicant/messages.h"
#include "replicant/types.h"

namespace replicant {

enum class RpcStatus : std::uint8_t { kReply, kTimeout, kDisconnected };

struct RpcOutcome {
  RpcStatus status = RpcStatus::kTimeout;
  std::optional<PeerMessage> reply;

  static RpcOutcome Reply(PeerMessage message) {
    return {RpcStatus::kReply, std::move(message)};
  }
  static RpcOutcome Timeout() { return {RpcStatus::kTimeout, std::nullopt}; }
  static RpcOutcome Disconnected() {
    return {RpcStatus::kDisconnected, std::nullopt};
  }
};

using MessageHandler = std::function<PeerMessage(PeerMessage const&)>;
using RpcCallback = std::function<void(RpcOutcome)>;

// Peer RPC contract. Rpc never throws: every call ends in exactly one
// callback, at the latest when the deadline expires. The callback may run
// synchronously (always so for requests addressed to Self(), which go
// straight to the local handler), so callers must not hold locks the
// callback needs.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual void Rpc(PeerId peer,
                   PeerMessage request,
                   Nanos deadline,
                   RpcCallback done) = 0;

  virtual PeerId Self() const = 0;
  virtual std::size_t NumPeers() const = 0;

  // Blocking convenience wrapper. Not for single-threaded drivers.
  RpcOutcome Call(PeerId peer, PeerMessage request, Nanos deadline);
};

// Sends `request` to every peer (self first) and feeds each outcome into
// `accumulator`, which must provide
//
//   using Result = ...;
//   std::optional<Result> Add(PeerId, RpcOutcome const&);  // nullopt: go on
//   Result Finish();                     // all outcomes in, none decisive
//
// `done` runs exactly once with the first decisive result. Peers not yet
// contacted when a decision arrives are skipped.
template <typename Accumulator>
void Broadcast(Transport& transport,
               PeerMessage const& request,
               Nanos deadline,
               Accumulator accumulator,
               std::function<void(typename Accumulator::Result)> done) {
  using Result = typename Accumulator::Result;
  struct State {
    State(Accumulator a, std::size_t n, std::function<void(Result)> d)
        : acc(std::move(a)), outstanding(n), done(std::move(d)) {}
    std::mutex mu;
    Accumulator acc;
    std::size_t outstanding;
    bool finished = false;
    std::function<void(Result)> done;
  };

  auto const n = transport.NumPeers();
  auto state = std::make_shared<State>(std::move(accumulator), n,
                                       std::move(done));
  auto on_outcome = [state](PeerId peer, RpcOutcome const& outcome) {
    std::optional<Result> result;
    {
      std::scoped_lock lock(state->mu);
      if (state->finished)
        return;
      --state->outstanding;
      result = state->acc.Add(peer, outcome);
      if (!result && state->outstanding == 0)
        result = state->acc.Finish();
      if (result)
        state->finished = true;
    }
    if (result)
      state->done(std::move(*result));
  };

  auto const self = transport.Self();
  for (std::size_t i = 0; i < n; ++i) {
    auto const peer = static_cast<PeerId>((self + i) % n);
    {
      std::scoped_lock lock(state->mu);
      if (state->finished)
        return;
    }
    transport.Rpc(peer, request, deadline,
                  [on_outcome, peer](RpcOutcome outcome) {
                    on_outcome(peer, outcome);
                  });
  }
}

}  // namespace replicant
