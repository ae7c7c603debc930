#include "replicant/wire.h"

#include <array>
#include <cstdint>
#include <utility>

#include <json.hpp>

namespace replicant {

using nlohmann::json;

namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

constexpr std::array<std::int8_t, 256> MakeDecodeTable() {
  std::array<std::int8_t, 256> table{};
  for (auto& v : table)
    v = -1;
  for (int i = 0; i < 64; ++i)
    table[static_cast<unsigned char>(kAlphabet[i])] = static_cast<std::int8_t>(i);
  return table;
}

constexpr auto kDecodeTable = MakeDecodeTable();

json CommandToJson(Command const& command) {
  json j = {{"kind", ToString(command.kind)}, {"key", Base64Encode(command.key)}};
  if (command.kind == CommandKind::kPut)
    j["value"] = Base64Encode(command.value);
  return j;
}

Command CommandFromJson(json const& j) {
  auto kind = ParseCommandKind(j.at("kind").get<std::string>());
  if (!kind)
    throw WireError("unknown command kind");
  Command command;
  command.kind = *kind;
  command.key = Base64Decode(j.at("key").get<std::string>());
  if (auto it = j.find("value"); it != j.end())
    command.value = Base64Decode(it->get<std::string>());
  if (!IsWellFormed(command))
    throw WireError("malformed command");
  return command;
}

InstanceState StateFromString(std::string const& s) {
  if (s == "in_progress")
    return InstanceState::kInProgress;
  if (s == "committed")
    return InstanceState::kCommitted;
  if (s == "executed")
    return InstanceState::kExecuted;
  throw WireError("unknown instance state: " + s);
}

void PutInstance(json& j, Instance const& instance) {
  j["ballot"] = instance.ballot.raw();
  j["index"] = instance.index;
  j["client_id"] = instance.client_id;
  j["command"] = CommandToJson(instance.command);
  j["state"] = ToString(instance.state);
}

Instance GetInstance(json const& j) {
  Instance instance;
  instance.ballot = Ballot(j.at("ballot").get<std::uint64_t>());
  instance.index = j.at("index").get<LogIndex>();
  instance.client_id = j.at("client_id").get<ClientId>();
  instance.command = CommandFromJson(j.at("command"));
  instance.state = StateFromString(j.at("state").get<std::string>());
  if (instance.index < 1)
    throw WireError("instance index must be positive");
  return instance;
}

std::string_view StatusName(ResponseStatus status) {
  return status == ResponseStatus::kOk ? "ok" : "reject";
}

ResponseStatus StatusFromJson(json const& j) {
  auto s = j.at("status").get<std::string>();
  if (s == "ok")
    return ResponseStatus::kOk;
  if (s == "reject")
    return ResponseStatus::kReject;
  throw WireError("unknown status: " + s);
}

MessageType TypeFromString(std::string const& s) {
  for (auto t : {MessageType::kPrepare, MessageType::kPrepareResp,
                 MessageType::kAccept, MessageType::kAcceptResp,
                 MessageType::kCommit, MessageType::kCommitResp}) {
    if (ToString(t) == s)
      return t;
  }
  throw WireError("unknown message type: " + s);
}

struct PayloadWriter {
  json& j;

  void operator()(PrepareRequest const& m) const { j["ballot"] = m.ballot.raw(); }
  void operator()(PrepareResponse const& m) const {
    j["status"] = StatusName(m.status);
    j["ballot"] = m.ballot.raw();
    auto& list = j["instances"] = json::array();
    for (auto const& instance : m.instances) {
      json item;
      PutInstance(item, instance);
      list.push_back(std::move(item));
    }
  }
  void operator()(AcceptRequest const& m) const { PutInstance(j, m.instance); }
  void operator()(AcceptResponse const& m) const {
    j["status"] = StatusName(m.status);
    j["ballot"] = m.ballot.raw();
  }
  void operator()(CommitRequest const& m) const {
    j["ballot"] = m.ballot.raw();
    j["last_executed"] = m.last_executed;
    j["global_last_executed"] = m.global_last_executed;
  }
  void operator()(CommitResponse const& m) const {
    j["status"] = StatusName(m.status);
    j["ballot"] = m.ballot.raw();
    j["last_executed"] = m.last_executed;
  }
};

Payload ReadPayload(MessageType type, json const& j) {
  auto ballot = [&j] { return Ballot(j.at("ballot").get<std::uint64_t>()); };
  switch (type) {
    case MessageType::kPrepare:
      return PrepareRequest{ballot()};
    case MessageType::kPrepareResp: {
      PrepareResponse m{StatusFromJson(j), ballot(), {}};
      for (auto const& item : j.at("instances"))
        m.instances.push_back(GetInstance(item));
      return m;
    }
    case MessageType::kAccept:
      return AcceptRequest{GetInstance(j)};
    case MessageType::kAcceptResp:
      return AcceptResponse{StatusFromJson(j), ballot()};
    case MessageType::kCommit:
      return CommitRequest{ballot(), j.at("last_executed").get<LogIndex>(),
                           j.at("global_last_executed").get<LogIndex>()};
    case MessageType::kCommitResp:
      return CommitResponse{StatusFromJson(j), ballot(),
                            j.at("last_executed").get<LogIndex>()};
  }
  throw WireError("unhandled message type");
}

}  // namespace

std::string Base64Encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    std::uint32_t v = (std::uint8_t(bytes[i]) << 16) |
                      (std::uint8_t(bytes[i + 1]) << 8) | std::uint8_t(bytes[i + 2]);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  auto rest = bytes.size() - i;
  if (rest == 1) {
    std::uint32_t v = std::uint8_t(bytes[i]) << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    std::uint32_t v = (std::uint8_t(bytes[i]) << 16) | (std::uint8_t(bytes[i + 1]) << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string Base64Decode(std::string_view text) {
  if (text.size() % 4 != 0)
    throw WireError("base64 length not a multiple of 4");
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      char c = text[i + k];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2)
          throw WireError("misplaced base64 padding");
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad > 0)
        throw WireError("misplaced base64 padding");
      auto d = kDecodeTable[static_cast<unsigned char>(c)];
      if (d < 0)
        throw WireError("invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out += static_cast<char>((v >> 16) & 0xff);
    if (pad < 2)
      out += static_cast<char>((v >> 8) & 0xff);
    if (pad < 1)
      out += static_cast<char>(v & 0xff);
  }
  return out;
}

std::string EncodeMessage(PeerMessage const& message) {
  json j;
  j["type"] = ToString(message.type());
  j["tag"] = message.tag;
  j["from"] = message.from;
  std::visit(PayloadWriter{j}, message.payload);
  auto line = j.dump();
  line += '\n';
  return line;
}

PeerMessage DecodeMessage(std::string_view line) {
  if (!line.empty() && line.back() == '\n')
    line.remove_suffix(1);
  try {
    auto j = json::parse(line);
    if (!j.is_object())
      throw WireError("message is not a JSON object");
    PeerMessage message;
    auto type = TypeFromString(j.at("type").get<std::string>());
    message.tag = j.at("tag").get<std::uint64_t>();
    message.from = j.at("from").get<PeerId>();
    message.payload = ReadPayload(type, j);
    return message;
  } catch (json::exception const& e) {
    throw WireError(std::string("bad message: ") + e.what());
  }
}

void LineFramer::Feed(std::string_view bytes) {
  if (consumed_ > 0 && consumed_ * 2 >= buffer_.size()) {
    buffer_.erase(0, consumed_);
    scanned_ -= consumed_;
    consumed_ = 0;
  }
  buffer_.append(bytes);
}

std::optional<std::string> LineFramer::Next() {
  auto pos = buffer_.find('\n', scanned_);
  if (pos == std::string::npos) {
    scanned_ = buffer_.size();
    if (buffer_.size() - consumed_ > max_line_)
      throw WireError("line exceeds maximum length");
    return std::nullopt;
  }
  std::string line = buffer_.substr(consumed_, pos - consumed_);
  consumed_ = pos + 1;
  scanned_ = consumed_;
  return line;
}

}  // namespace replicant
