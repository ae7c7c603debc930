#include "replicant/messages.h"

#include <stdexcept>

namespace replicant {

bool IsRequest(MessageType type) {
  return type == MessageType::kPrepare || type == MessageType::kAccept ||
         type == MessageType::kCommit;
}

MessageType ResponseTypeFor(MessageType request) {
  switch (request) {
    case MessageType::kPrepare:
      return MessageType::kPrepareResp;
    case MessageType::kAccept:
      return MessageType::kAcceptResp;
    case MessageType::kCommit:
      return MessageType::kCommitResp;
    default:
      throw std::invalid_argument("not a request type");
  }
}

std::string_view ToString(MessageType type) {
  switch (type) {
    case MessageType::kPrepare:
      return "prepare";
    case MessageType::kPrepareResp:
      return "prepare_resp";
    case MessageType::kAccept:
      return "accept";
    case MessageType::kAcceptResp:
      return "accept_resp";
    case MessageType::kCommit:
      return "commit";
    case MessageType::kCommitResp:
      return "commit_resp";
  }
  return "?";
}

}  // namespace replicant
