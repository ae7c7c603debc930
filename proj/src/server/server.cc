#include "replicant/server.h"

#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <algorithm>
#include <random>
#include <sstream>
#include <vector>

#include "replicant/wire.h"

namespace replicant {

namespace {

constexpr std::size_t kReadChunk = 16 * 1024;
constexpr std::size_t kMaxClientLine = 1 << 20;

std::vector<std::string_view> Tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t'))
      ++i;
    auto start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t')
      ++i;
    if (i > start)
      out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace

std::optional<ClientRequest> ParseClientLine(std::string_view line) {
  if (!line.empty() && line.back() == '\r')
    line.remove_suffix(1);
  auto tokens = Tokens(line);
  if (tokens.empty())
    return std::nullopt;
  auto const verb = tokens[0];
  if (verb == "get" && tokens.size() == 2)
    return Command::Get(std::string(tokens[1]));
  if (verb == "put" && tokens.size() == 3)
    return Command::Put(std::string(tokens[1]), std::string(tokens[2]));
  if (verb == "del" && tokens.size() == 2)
    return Command::Del(std::string(tokens[1]));
  if (verb == "stats" && tokens.size() == 1)
    return StatsRequest{};
  return std::nullopt;
}

std::string FormatResult(CommandKind kind, CommandResult const& result) {
  if (!result.ok)
    return "notfound";
  if (kind == CommandKind::kGet && result.value)
    return "ok " + *result.value;
  return "ok";
}

Server::Server(ServerConfig config)
    : config_(std::move(config)),
      transport_(config_.id, config_.ToPeerConfig().peers, scheduler_) {
  config_.Validate();
  std::random_device rd;
  engine_ = std::make_unique<MultiPaxos>(
      log_, config_.ToPeerConfig(), transport_, scheduler_,
      (std::uint64_t{rd()} << 32) ^ rd() ^ config_.id);
}

Server::~Server() { Stop(); }

void Server::Start() {
  auto const& me = config_.peers[config_.id];
  client_listener_ = net::Listen(net::HostPort::Parse(me.client_address));
  transport_.Serve([this](PeerMessage const& m) { return engine_->Handle(m); });
  started_ = true;
  executor_ = std::thread([this] { ExecutorLoop(); });
  acceptor_ = std::thread([this] { AcceptLoop(); });
  engine_->Start();
}

void Server::Stop() {
  if (stopping_.exchange(true))
    return;
  engine_->Stop();
  log_.Stop();
  if (client_listener_.valid())
    net::ShutdownBoth(client_listener_.get());
  if (acceptor_.joinable())
    acceptor_.join();
  client_listener_.Reset();

  std::list<std::shared_ptr<Session>> sessions;
  {
    std::scoped_lock lock(sessions_mu_);
    sessions.swap(threads_);
    for (auto const& s : sessions)
      net::ShutdownBoth(s->fd);
  }
  for (auto const& s : sessions) {
    {
      std::scoped_lock lock(s->mu);
      s->cv.notify_all();
    }
    if (s->thread.joinable())
      s->thread.join();
  }
  transport_.Shutdown();
  scheduler_.Shutdown();
  if (executor_.joinable())
    executor_.join();
}

std::size_t Server::SessionCount() const {
  std::scoped_lock lock(sessions_mu_);
  return sessions_.size();
}

SocketStats Server::Sockets() const {
  auto stats = transport_.Sockets();
  std::scoped_lock lock(sessions_mu_);
  for (auto const& [id, s] : sessions_) {
    ++stats.total;
    if (net::HasNoDelay(s->fd))
      ++stats.nodelay;
  }
  return stats;
}

void Server::AcceptLoop() {
  while (!stopping_.load()) {
    auto fd = net::Accept(client_listener_.get());
    if (!fd.valid())
      return;
    ReapSessions();
    timeval tv{1, 0};
    ::setsockopt(fd.get(), SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    auto session = std::make_shared<Session>();
    session->id = (ClientId{config_.id} << 56) | next_client_.fetch_add(1);
    session->fd = fd.release();
    std::scoped_lock lock(sessions_mu_);
    if (stopping_.load()) {
      ::close(session->fd);
      return;
    }
    sessions_.emplace(session->id, session);
    threads_.push_back(session);
    session->thread = std::thread([this, session] { ServeSession(session); });
  }
}

void Server::ReapSessions() {
  std::vector<std::shared_ptr<Session>> finished;
  {
    std::scoped_lock lock(sessions_mu_);
    for (auto it = threads_.begin(); it != threads_.end();) {
      if ((*it)->done.load()) {
        finished.push_back(*it);
        it = threads_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& s : finished)
    s->thread.join();
}

void Server::ServeSession(std::shared_ptr<Session> session) {
  LineFramer framer(kMaxClientLine);
  std::string chunk(kReadChunk, '\0');
  bool open = true;
  while (open && !stopping_.load()) {
    auto n = net::ReadSome(session->fd, chunk.data(), chunk.size());
    if (n <= 0)
      break;
    framer.Feed(std::string_view(chunk.data(), static_cast<std::size_t>(n)));
    try {
      while (open) {
        auto line = framer.Next();
        if (!line)
          break;
        auto request = ParseClientLine(*line);
        std::string reply;
        if (!request)
          reply = "err bad-command";
        else if (std::holds_alternative<StatsRequest>(*request))
          reply = StatsLine();
        else
          reply = Submit(session, std::get<Command>(std::move(*request)));
        if (stopping_.load())
          open = false;
        else
          open = net::WriteAll(session->fd, reply + "\n");
      }
    } catch (WireError const&) {
      net::WriteAll(session->fd, "err line-too-long\n");
      open = false;
    }
  }
  {
    std::scoped_lock lock(sessions_mu_);
    sessions_.erase(session->id);
    net::ShutdownBoth(session->fd);
    ::close(session->fd);
    session->fd = -1;
  }
  session->done.store(true);
}

std::string Server::Submit(std::shared_ptr<Session> const& session,
                           Command command) {
  {
    std::scoped_lock lock(session->mu);
    session->awaiting = true;
    session->pending_index = 0;
    session->early.clear();
    session->reply.reset();
  }
  std::weak_ptr<Session> weak = session;
  engine_->Replicate(std::move(command), session->id,
                     [this, weak](ReplicateResult result) {
    auto s = weak.lock();
    if (!s)
      return;
    std::scoped_lock lock(s->mu);
    if (!s->awaiting || s->reply)
      return;
    switch (result.status) {
      case ReplicateStatus::kOk:
        if (auto it = s->early.find(result.index); it != s->early.end())
          s->reply = std::move(it->second);
        else
          s->pending_index = result.index;
        break;
      case ReplicateStatus::kNotLeader:
        s->reply = RetryLine(result.leader_hint);
        break;
      case ReplicateStatus::kRetry:
        s->reply = "retry";
        break;
    }
    if (s->reply)
      s->cv.notify_all();
  });

  std::unique_lock lock(session->mu);
  session->cv.wait(lock, [&] { return session->reply || stopping_.load(); });
  auto reply = session->reply.value_or("err shutting-down");
  session->awaiting = false;
  session->pending_index = 0;
  session->early.clear();
  session->reply.reset();
  return reply;
}

void Server::ExecutorLoop() {
  while (auto execution = log_.ExecuteNext(store_))
    Deliver(*execution);
}

void Server::Deliver(Execution const& execution) {
  std::shared_ptr<Session> session;
  {
    std::scoped_lock lock(sessions_mu_);
    auto it = sessions_.find(execution.client_id);
    if (it == sessions_.end())
      return;
    session = it->second;
  }
  std::scoped_lock lock(session->mu);
  if (!session->awaiting || session->reply)
    return;
  auto line = FormatResult(execution.command.kind, execution.result);
  if (session->pending_index == execution.index) {
    session->reply = std::move(line);
    session->cv.notify_all();
  } else if (session->pending_index == 0) {
    session->early.emplace(execution.index, std::move(line));
  }
}

std::string Server::RetryLine(std::optional<PeerId> hint) const {
  if (!hint || *hint >= config_.peers.size())
    return "retry unknown";
  return "retry " + config_.peers[*hint].client_address;
}

std::string Server::StatsLine() const {
  auto stats = Sockets();
  std::ostringstream out;
  out << "ok sessions=" << SessionCount() << " nodelay=" << stats.nodelay << "/"
      << stats.total;
  return out.str();
}

}  // namespace replicant
