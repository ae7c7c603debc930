#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace replicant {

using PeerId = std::uint32_t;
using LogIndex = std::int64_t;
using ClientId = std::uint64_t;
using Nanos = std::chrono::nanoseconds;

inline constexpr PeerId kMaxPeers = 256;

// Leadership token: raw = round * 256 + peer id. Round 0 means no leader has
// been elected yet; ballots from distinct peers never collide.
class Ballot {
 public:
  static constexpr std::uint64_t kRoundIncrement = kMaxPeers;

  constexpr Ballot() = default;
  constexpr explicit Ballot(std::uint64_t raw) : raw_(raw) {}

  static constexpr Ballot Make(std::uint64_t round, PeerId peer) {
    return Ballot(round * kRoundIncrement + peer);
  }

  constexpr std::uint64_t raw() const { return raw_; }
  constexpr std::uint64_t round() const { return raw_ / kRoundIncrement; }
  constexpr PeerId peer() const {
    return static_cast<PeerId>(raw_ % kRoundIncrement);
  }
  constexpr bool IsNone() const { return round() == 0; }

  std::optional<PeerId> Leader() const {
    if (IsNone())
      return std::nullopt;
    return peer();
  }

  constexpr auto operator<=>(Ballot const&) const = default;

 private:
  std::uint64_t raw_ = 0;
};

inline std::string ToString(Ballot b) {
  return std::to_string(b.raw()) + "(r" + std::to_string(b.round()) + ",p" +
         std::to_string(b.peer()) + ")";
}

}  // namespace replicant
