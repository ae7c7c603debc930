#include "replicant/loadgen/client.h"

#include <poll.h>

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <system_error>
#include <thread>

namespace replicant::loadgen {

namespace {

using Clock = std::chrono::steady_clock;

bool StartsWith(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

}  // namespace

KvClient::KvClient(std::vector<std::string> cluster, Nanos op_timeout,
                   std::size_t max_retries)
    : op_timeout_(op_timeout), max_retries_(max_retries) {
  for (auto const& address : cluster)
    cluster_.push_back(net::HostPort::Parse(address));
  if (cluster_.empty())
    throw std::invalid_argument("cluster address list is empty");
}

std::string KvClient::Target() const { return cluster_[target_].ToString(); }

void KvClient::Close() {
  fd_.Reset();
  framer_ = LineFramer();
}

void KvClient::Advance() {
  Close();
  target_ = (target_ + 1) % cluster_.size();
}

bool KvClient::Connect() {
  if (fd_.valid())
    return true;
  try {
    fd_ = net::Connect(cluster_[target_], 500ms);
    return true;
  } catch (std::system_error const&) {
    return false;
  }
}

std::optional<std::string> KvClient::RoundTrip(std::string_view line,
                                               Nanos timeout) {
  if (!Connect())
    return std::nullopt;
  std::string request(line);
  request += '\n';
  if (!net::WriteAll(fd_.get(), request)) {
    Close();
    return std::nullopt;
  }
  auto const deadline = Clock::now() + timeout;
  char buffer[4096];
  while (true) {
    if (auto reply = framer_.Next())
      return reply;
    auto const left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - Clock::now());
    if (left.count() <= 0) {
      Close();
      return std::nullopt;
    }
    pollfd pfd{fd_.get(), POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(std::max<long long>(left.count(), 1)));
    if (rc < 0 && errno == EINTR)
      continue;
    if (rc <= 0)
      continue;
    auto n = net::ReadSome(fd_.get(), buffer, sizeof(buffer));
    if (n <= 0) {
      Close();
      return std::nullopt;
    }
    framer_.Feed(std::string_view(buffer, static_cast<std::size_t>(n)));
  }
}

ClientReply KvClient::Execute(std::string_view line) {
  ClientReply out;
  auto const deadline = Clock::now() + op_timeout_;
  while (true) {
    auto const left = std::chrono::duration_cast<Nanos>(deadline - Clock::now());
    if (left <= Nanos::zero()) {
      out.line = "timeout";
      return out;
    }
    auto reply = RoundTrip(line, left);
    if (reply && !StartsWith(*reply, "retry")) {
      out.line = std::move(*reply);
      if (out.line == "ok" || StartsWith(out.line, "ok "))
        out.status = ClientReply::Status::kOk;
      else if (out.line == "notfound")
        out.status = ClientReply::Status::kNotFound;
      return out;
    }
    if (++out.retries > max_retries_) {
      out.line = reply ? "too many retries" : "connection failed";
      return out;
    }
    bool redirected = false;
    if (reply && reply->size() > 6) {
      auto address = reply->substr(6);
      if (address != "unknown") {
        try {
          auto hp = net::HostPort::Parse(address);
          auto it = std::find_if(cluster_.begin(), cluster_.end(), [&](auto const& c) {
            return c.host == hp.host && c.port == hp.port;
          });
          if (it == cluster_.end()) {
            cluster_.push_back(hp);
            it = cluster_.end() - 1;
          }
          auto const index = static_cast<std::size_t>(it - cluster_.begin());
          if (index != target_) {
            Close();
            target_ = index;
            redirected = true;
          }
        } catch (std::invalid_argument const&) {
        }
      }
    }
    if (!redirected) {
      if (!reply)
        Advance();
      else if (reply->size() <= 6 || reply->substr(6) == "unknown")
        Advance();
      auto const backoff = std::min<std::size_t>(out.retries, 25) * 2;
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    }
  }
}

}  // namespace replicant::loadgen
