#include "replicant/loadgen/stub.h"

#include <charconv>
#include <stdexcept>

#include "replicant/wire.h"

namespace replicant::loadgen {

namespace {

using Clock = std::chrono::steady_clock;
using namespace std::chrono_literals;

// Timer wakeups on a loaded host overshoot by milliseconds; the last stretch
// of each service time is waited out by yielding instead.
constexpr auto kSpinWindow = 2ms;

void WaitUntil(Clock::time_point deadline) {
  if (deadline - Clock::now() > kSpinWindow)
    std::this_thread::sleep_until(deadline - kSpinWindow);
  while (Clock::now() < deadline)
    std::this_thread::yield();
}

double ParseNumber(std::string_view text) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !(v > 0))
    throw std::invalid_argument("bad stub profile number: " + std::string(text));
  return v;
}

}  // namespace

StubProfile StubProfile::Parse(std::string_view text) {
  StubProfile p;
  if (text == "instant")
    return p;
  if (text == "co") {
    p.kind = Kind::kStall;
    return p;
  }
  if (text.starts_with("fixed:")) {
    p.kind = Kind::kFixed;
    p.fixed = std::chrono::duration_cast<Nanos>(
        std::chrono::duration<double, std::milli>(ParseNumber(text.substr(6))));
    return p;
  }
  if (text.starts_with("capacity:")) {
    p.kind = Kind::kCapacity;
    p.capacity = ParseNumber(text.substr(9));
    return p;
  }
  throw std::invalid_argument("unknown stub profile: " + std::string(text));
}

Nanos StubProfile::ServiceTime(std::uint64_t k) const {
  switch (kind) {
    case Kind::kInstant:
      return Nanos::zero();
    case Kind::kFixed:
      return fixed;
    case Kind::kStall:
      return k % 100 >= 96 ? Nanos(250ms) : Nanos(1ms);
    case Kind::kCapacity:
      return Nanos(static_cast<std::int64_t>(1e9 / capacity));
  }
  return Nanos::zero();
}

StubServer::StubServer(StubProfile profile, std::string const& address)
    : profile_(profile) {
  auto hp = net::HostPort::Parse(address);
  host_ = hp.host;
  listener_ = net::Listen(hp);
  port_ = net::LocalPort(listener_.get());
}

StubServer::~StubServer() { Stop(); }

std::string StubServer::Address() const {
  return net::HostPort{host_, port_}.ToString();
}

void StubServer::Start() {
  acceptor_ = std::thread([this] { AcceptLoop(); });
  server_ = std::thread([this] { ServeLoop(); });
}

void StubServer::Stop() {
  if (stopping_.exchange(true))
    return;
  net::ShutdownBoth(listener_.get());
  {
    std::scoped_lock lock(mu_);
    for (auto& c : connections_)
      net::ShutdownBoth(c->fd.get());
  }
  cv_.notify_all();
  if (acceptor_.joinable())
    acceptor_.join();
  if (server_.joinable())
    server_.join();
  std::vector<std::thread> readers;
  {
    std::scoped_lock lock(mu_);
    readers.swap(readers_);
  }
  for (auto& t : readers)
    t.join();
}

void StubServer::AcceptLoop() {
  while (!stopping_) {
    auto fd = net::Accept(listener_.get());
    if (!fd.valid())
      return;
    auto conn = std::make_shared<Connection>();
    conn->fd = std::move(fd);
    std::scoped_lock lock(mu_);
    if (stopping_)
      return;
    connections_.push_back(conn);
    readers_.emplace_back([this, conn] { ReadLoop(conn); });
  }
}

void StubServer::ReadLoop(std::shared_ptr<Connection> conn) {
  LineFramer framer;
  char buffer[4096];
  while (!stopping_) {
    auto n = net::ReadSome(conn->fd.get(), buffer, sizeof buffer);
    if (n <= 0)
      return;
    try {
      framer.Feed(std::string_view(buffer, static_cast<std::size_t>(n)));
      while (auto line = framer.Next()) {
        {
          std::scoped_lock lock(mu_);
          queue_.push_back({conn, std::move(*line)});
        }
        cv_.notify_one();
      }
    } catch (WireError const&) {
      net::ShutdownBoth(conn->fd.get());
      return;
    }
  }
}

void StubServer::ServeLoop() {
  std::uint64_t k = 0;
  // Completion time of the previous request. Service times are laid out on
  // an absolute timeline so oversleeping does not lower capacity.
  auto busy_until = Clock::now();
  while (true) {
    Request request;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_)
        return;
      request = std::move(queue_.front());
      queue_.pop_front();
    }
    auto const service = profile_.ServiceTime(k++);
    if (service > Nanos::zero()) {
      busy_until = std::max(busy_until, Clock::now()) + service;
      WaitUntil(busy_until);
    }
    auto reply = Reply(request.line);
    ++served_;
    std::scoped_lock lock(request.conn->write_mu);
    net::WriteAll(request.conn->fd.get(), reply + "\n");
  }
}

std::string StubServer::Reply(std::string_view line) const {
  if (!line.empty() && line.back() == '\r')
    line.remove_suffix(1);
  if (line.starts_with("put ") || line.starts_with("del "))
    return "ok";
  if (line.starts_with("get "))
    return "notfound";
  if (line == "stats")
    return "ok stub served=" + std::to_string(served_.load());
  return "err bad-command";
}

}  // namespace replicant::loadgen
