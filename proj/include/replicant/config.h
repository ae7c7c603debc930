#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "replicant/multipaxos.h"
#include "replicant/types.h"

namespace replicant {

struct PeerAddress {
  PeerId id = 0;
  std::string address;         // peer-to-peer listen address
  std::string client_address;  // client protocol listen address
};

// JSON document:
//   {
//     "id": 0,
//     "peers": [{"id": 0, "address": "127.0.0.1:7000",
//                "client_address": "127.0.0.1:8000"}, ...],
//     "commit_interval_ms": 150,       optional
//     "election_timeout_ms": 450,      optional, default 3 x interval
//     "election_jitter_ms": 150        optional, default 1 x interval
//   }
// Peer ids must be exactly 0..n-1 (any order).
struct ServerConfig {
  PeerId id = 0;
  std::vector<PeerAddress> peers;  // sorted by id after parsing
  Nanos commit_interval = 150ms;
  Nanos election_timeout_base = 450ms;
  Nanos election_jitter_max = 150ms;

  // Throws std::invalid_argument with a readable message.
  static ServerConfig Parse(std::string_view json_text);
  static ServerConfig Load(std::string const& path);

  void Validate() const;
  PeerConfig ToPeerConfig() const;
  std::string ToJson() const;
};

}  // namespace replicant
