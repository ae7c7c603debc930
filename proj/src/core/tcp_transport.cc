#include "replicant/tcp_transport.h"

#include <sys/socket.h>
#include <sys/time.h>

#include <algorithm>
#include <map>
#include <system_error>
#include <utility>

#include "replicant/wire.h"

namespace replicant {

namespace {

constexpr Nanos kConnectTimeout = std::chrono::milliseconds(100);
constexpr Nanos kMinBackoff = std::chrono::milliseconds(50);
constexpr Nanos kMaxBackoff = std::chrono::seconds(1);
constexpr std::size_t kReadChunk = 64 * 1024;

void SetSendTimeout(int fd) {
  timeval tv{1, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

}  // namespace

class TcpTransport::Channel : public std::enable_shared_from_this<Channel> {
 public:
  Channel(net::HostPort address, Scheduler& scheduler)
      : address_(std::move(address)), scheduler_(scheduler) {}

  void Send(PeerMessage request, Nanos deadline, RpcCallback done);
  void Close();
  void AddStats(SocketStats& stats) const;

 private:
  struct Conn {
    net::UniqueFd fd;
    std::uint64_t gen = 0;
  };
  struct Pending {
    std::uint64_t gen = 0;
    RpcCallback done;
  };
  struct Reader {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  bool EnsureConnectedLocked();
  void ReadLoop(std::shared_ptr<Conn> conn, std::shared_ptr<std::atomic<bool>> done);
  void Expire(std::uint64_t tag);
  std::vector<RpcCallback> TakeGenerationLocked(std::uint64_t gen);

  net::HostPort address_;
  Scheduler& scheduler_;

  mutable std::mutex mu_;
  std::shared_ptr<Conn> conn_;
  std::uint64_t next_gen_ = 1;
  std::map<std::uint64_t, Pending> pending_;
  std::vector<Reader> readers_;
  Nanos retry_at_ = Nanos::min();
  Nanos backoff_ = Nanos::zero();
  bool closed_ = false;
};

bool TcpTransport::Channel::EnsureConnectedLocked() {
  if (conn_)
    return true;
  auto now = scheduler_.Now();
  if (now < retry_at_)
    return false;
  try {
    auto fd = net::Connect(address_, kConnectTimeout);
    SetSendTimeout(fd.get());
    conn_ = std::make_shared<Conn>(Conn{std::move(fd), next_gen_++});
  } catch (std::system_error const&) {
    backoff_ = std::clamp(backoff_ * 2, kMinBackoff, kMaxBackoff);
    retry_at_ = now + backoff_;
    return false;
  }
  backoff_ = Nanos::zero();

  std::erase_if(readers_, [](Reader& r) {
    if (!r.done->load())
      return false;
    r.thread.join();
    return true;
  });
  auto done = std::make_shared<std::atomic<bool>>(false);
  readers_.push_back(Reader{
      std::thread([self = shared_from_this(), conn = conn_, done] {
        self->ReadLoop(conn, done);
      }),
      done});
  return true;
}

void TcpTransport::Channel::Send(PeerMessage request,
                                 Nanos deadline,
                                 RpcCallback done) {
  auto const tag = request.tag;
  {
    std::unique_lock lock(mu_);
    if (!closed_ && EnsureConnectedLocked()) {
      auto conn = conn_;
      pending_[tag] = Pending{conn->gen, std::move(done)};
      if (net::WriteAll(conn->fd.get(), EncodeMessage(request))) {
        lock.unlock();
        scheduler_.After(deadline, [weak = weak_from_this(), tag] {
          if (auto self = weak.lock())
            self->Expire(tag);
        });
        return;
      }
      // The reader notices the shutdown and fails the other RPCs of this
      // connection.
      done = std::move(pending_[tag].done);
      pending_.erase(tag);
      net::ShutdownBoth(conn->fd.get());
      conn_.reset();
    }
  }
  done(RpcOutcome::Disconnected());
}

void TcpTransport::Channel::Expire(std::uint64_t tag) {
  RpcCallback done;
  {
    std::scoped_lock lock(mu_);
    auto it = pending_.find(tag);
    if (it == pending_.end())
      return;
    done = std::move(it->second.done);
    pending_.erase(it);
  }
  done(RpcOutcome::Timeout());
}

std::vector<RpcCallback> TcpTransport::Channel::TakeGenerationLocked(
    std::uint64_t gen) {
  std::vector<RpcCallback> out;
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->second.gen == gen) {
      out.push_back(std::move(it->second.done));
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

void TcpTransport::Channel::ReadLoop(std::shared_ptr<Conn> conn,
                                     std::shared_ptr<std::atomic<bool>> done) {
  LineFramer framer;
  std::string chunk(kReadChunk, '\0');
  bool healthy = true;
  while (healthy) {
    auto n = net::ReadSome(conn->fd.get(), chunk.data(), chunk.size());
    if (n <= 0)
      break;
    framer.Feed(std::string_view(chunk.data(), static_cast<std::size_t>(n)));
    try {
      while (auto line = framer.Next()) {
        auto reply = DecodeMessage(*line);
        RpcCallback cb;
        {
          std::scoped_lock lock(mu_);
          auto it = pending_.find(reply.tag);
          if (it != pending_.end() && it->second.gen == conn->gen) {
            cb = std::move(it->second.done);
            pending_.erase(it);
          }
        }
        if (cb)
          cb(RpcOutcome::Reply(std::move(reply)));
      }
    } catch (WireError const&) {
      healthy = false;
    }
  }

  std::vector<RpcCallback> failed;
  {
    std::scoped_lock lock(mu_);
    if (conn_ == conn)
      conn_.reset();
    failed = TakeGenerationLocked(conn->gen);
  }
  net::ShutdownBoth(conn->fd.get());
  for (auto& cb : failed)
    cb(RpcOutcome::Disconnected());
  done->store(true);
}

void TcpTransport::Channel::Close() {
  std::vector<RpcCallback> failed;
  std::vector<Reader> readers;
  {
    std::scoped_lock lock(mu_);
    closed_ = true;
    if (conn_)
      net::ShutdownBoth(conn_->fd.get());
    conn_.reset();
    for (auto& [tag, p] : pending_)
      failed.push_back(std::move(p.done));
    pending_.clear();
    readers = std::move(readers_);
  }
  for (auto& cb : failed)
    cb(RpcOutcome::Disconnected());
  for (auto& r : readers) {
    if (r.thread.get_id() == std::this_thread::get_id())
      r.thread.detach();
    else
      r.thread.join();
  }
}

void TcpTransport::Channel::AddStats(SocketStats& stats) const {
  std::scoped_lock lock(mu_);
  if (!conn_)
    return;
  ++stats.total;
  if (net::HasNoDelay(conn_->fd.get()))
    ++stats.nodelay;
}

TcpTransport::TcpTransport(PeerId self,
                           std::vector<std::string> peers,
                           Scheduler& scheduler)
    : self_(self), peers_(std::move(peers)), scheduler_(scheduler) {
  if (self_ >= peers_.size())
    throw std::invalid_argument("peer id out of range");
  for (std::size_t i = 0; i < peers_.size(); ++i) {
    if (i == self_) {
      channels_.push_back(nullptr);
      continue;
    }
    channels_.push_back(
        std::make_shared<Channel>(net::HostPort::Parse(peers_[i]), scheduler_));
  }
}

TcpTransport::~TcpTransport() { Shutdown(); }

void TcpTransport::Serve(MessageHandler handler) {
  handler_ = std::move(handler);
  listener_ = net::Listen(net::HostPort::Parse(peers_[self_]));
  acceptor_ = std::thread([this] { AcceptLoop(); });
}

void TcpTransport::Rpc(PeerId peer,
                       PeerMessage request,
                       Nanos deadline,
                       RpcCallback done) {
  request.tag = next_tag_.fetch_add(1);
  request.from = self_;
  if (peer == self_) {
    if (!handler_ || stopping_.load()) {
      done(RpcOutcome::Disconnected());
      return;
    }
    auto reply = handler_(request);
    reply.tag = request.tag;
    reply.from = self_;
    done(RpcOutcome::Reply(std::move(reply)));
    return;
  }
  if (peer >= channels_.size() || stopping_.load()) {
    done(RpcOutcome::Disconnected());
    return;
  }
  channels_[peer]->Send(std::move(request), deadline, std::move(done));
}

void TcpTransport::AcceptLoop() {
  while (!stopping_.load()) {
    auto fd = net::Accept(listener_.get());
    if (!fd.valid())
      break;
    ReapInbound();
    std::scoped_lock lock(inbound_mu_);
    if (stopping_.load())
      break;
    auto& conn = inbound_.emplace_back();
    conn.fd = fd.release();
    conn.thread = std::thread([this, c = &conn] { ServeConnection(c); });
  }
}

void TcpTransport::ServeConnection(Inbound* conn) {
  int fd;
  {
    std::scoped_lock lock(inbound_mu_);
    fd = conn->fd;
  }
  LineFramer framer;
  std::string chunk(kReadChunk, '\0');
  bool healthy = true;
  while (healthy && !stopping_.load()) {
    auto n = net::ReadSome(fd, chunk.data(), chunk.size());
    if (n <= 0)
      break;
    framer.Feed(std::string_view(chunk.data(), static_cast<std::size_t>(n)));
    try {
      while (auto line = framer.Next()) {
        auto request = DecodeMessage(*line);
        if (!IsRequest(request.type())) {
          healthy = false;
          break;
        }
        auto reply = handler_(request);
        reply.tag = request.tag;
        reply.from = self_;
        if (!net::WriteAll(fd, EncodeMessage(reply))) {
          healthy = false;
          break;
        }
      }
    } catch (WireError const&) {
      healthy = false;
    }
  }
  std::scoped_lock lock(inbound_mu_);
  net::UniqueFd closer(conn->fd);
  conn->fd = -1;
  conn->done.store(true);
}

void TcpTransport::ReapInbound() {
  std::list<Inbound> finished;
  {
    std::scoped_lock lock(inbound_mu_);
    for (auto it = inbound_.begin(); it != inbound_.end();) {
      auto next = std::next(it);
      if (it->done.load())
        finished.splice(finished.end(), inbound_, it);
      it = next;
    }
  }
  for (auto& conn : finished)
    conn.thread.join();
}

void TcpTransport::Shutdown() {
  if (stopping_.exchange(true))
    return;
  if (listener_.valid())
    net::ShutdownBoth(listener_.get());
  if (acceptor_.joinable())
    acceptor_.join();
  listener_.Reset();
  {
    std::scoped_lock lock(inbound_mu_);
    for (auto& conn : inbound_)
      net::ShutdownBoth(conn.fd);
  }
  for (auto& channel : channels_) {
    if (channel)
      channel->Close();
  }
  std::list<Inbound> all;
  {
    std::scoped_lock lock(inbound_mu_);
    all.splice(all.end(), inbound_);
  }
  for (auto& conn : all) {
    if (conn.thread.get_id() == std::this_thread::get_id())
      conn.thread.detach();
    else
      conn.thread.join();
  }
}

std::uint16_t TcpTransport::ListenPort() const {
  return net::LocalPort(listener_.get());
}

SocketStats TcpTransport::Sockets() const {
  SocketStats stats;
  for (auto const& channel : channels_) {
    if (channel)
      channel->AddStats(stats);
  }
  std::scoped_lock lock(inbound_mu_);
  for (auto const& conn : inbound_) {
    if (conn.fd < 0)
      continue;
    ++stats.total;
    if (net::HasNoDelay(conn.fd))
      ++stats.nodelay;
  }
  return stats;
}

}  // namespace replicant
