#pragma once

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

#include "replicant/instance.h"
#include "replicant/types.h"

namespace replicant {

enum class ResponseStatus : std::uint8_t { kOk, kReject };

struct PrepareRequest {
  Ballot ballot;
  bool operator==(PrepareRequest const&) const = default;
};

struct PrepareResponse {
  ResponseStatus status = ResponseStatus::kReject;
  Ballot ballot;
  std::vector<Instance> instances;
  bool operator==(PrepareResponse const&) const = default;
};

struct AcceptRequest {
  Instance instance;
  bool operator==(AcceptRequest const&) const = default;
};

struct AcceptResponse {
  ResponseStatus status = ResponseStatus::kReject;
  Ballot ballot;
  bool operator==(AcceptResponse const&) const = default;
};

struct CommitRequest {
  Ballot ballot;
  LogIndex last_executed = 0;
  LogIndex global_last_executed = 0;
  bool operator==(CommitRequest const&) const = default;
};

struct CommitResponse {
  ResponseStatus status = ResponseStatus::kReject;
  Ballot ballot;
  LogIndex last_executed = 0;
  bool operator==(CommitResponse const&) const = default;
};

// Order matches the payload variant alternatives.
enum class MessageType : std::uint8_t {
  kPrepare,
  kPrepareResp,
  kAccept,
  kAcceptResp,
  kCommit,
  kCommitResp,
};

using Payload = std::variant<PrepareRequest,
                             PrepareResponse,
                             AcceptRequest,
                             AcceptResponse,
                             CommitRequest,
                             CommitResponse>;

// Envelope for peer RPCs. Responses echo the request's tag.
struct PeerMessage {
  std::uint64_t tag = 0;
  PeerId from = 0;
  Payload payload;

  MessageType type() const { return static_cast<MessageType>(payload.index()); }

  template <typename T>
  T const* As() const {
    return std::get_if<T>(&payload);
  }

  bool operator==(PeerMessage const&) const = default;
};

bool IsRequest(MessageType type);
MessageType ResponseTypeFor(MessageType request);
std::string_view ToString(MessageType type);

}  // namespace replicant
