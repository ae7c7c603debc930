#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "replicant/messages.h"

namespace replicant {

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One JSON object per line. Byte strings (keys, values) travel base64
// encoded; ballots, indexes and ids are JSON numbers. The returned string
// ends with exactly one '\n' and contains no other newline.
std::string EncodeMessage(PeerMessage const& message);

// Accepts the line with or without its trailing '\n'. Throws WireError.
PeerMessage DecodeMessage(std::string_view line);

std::string Base64Encode(std::string_view bytes);
std::string Base64Decode(std::string_view text);  // throws WireError

// Reassembles '\n'-terminated lines from arbitrary read boundaries.
class LineFramer {
 public:
  static constexpr std::size_t kDefaultMaxLine = std::size_t{64} << 20;

  explicit LineFramer(std::size_t max_line = kDefaultMaxLine)
      : max_line_(max_line) {}

  void Feed(std::string_view bytes);

  // Next complete line without its terminator. Throws WireError once the
  // buffered partial line exceeds the limit.
  std::optional<std::string> Next();

  std::size_t Buffered() const { return buffer_.size() - consumed_; }

 private:
  std::string buffer_;
  std::size_t consumed_ = 0;
  std::size_t scanned_ = 0;
  std::size_t max_line_;
};

}  // namespace replicant
