#include "replicant/transport.h"

#include <condition_variable>

namespace replicant {

RpcOutcome Transport::Call(PeerId peer, PeerMessage request, Nanos deadline) {
  struct Slot {
    std::mutex mu;
    std::condition_variable cv;
    std::optional<RpcOutcome> outcome;
  };
  auto slot = std::make_shared<Slot>();
  Rpc(peer, std::move(request), deadline, [slot](RpcOutcome outcome) {
    std::scoped_lock lock(slot->mu);
    slot->outcome = std::move(outcome);
    slot->cv.notify_all();
  });
  std::unique_lock lock(slot->mu);
  slot->cv.wait(lock, [&] { return slot->outcome.has_value(); });
  return std::move(*slot->outcome);
}

}  // namespace replicant
