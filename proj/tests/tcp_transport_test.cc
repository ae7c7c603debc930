#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <random>
#include <set>
#include <thread>

#include <gtest/gtest.h>

#include "replicant/net.h"
#include "replicant/scheduler.h"
#include "replicant/tcp_transport.h"
#include "replicant/wire.h"

namespace replicant {
namespace {

using namespace std::chrono_literals;

std::string Loopback(std::uint16_t port) { return "127.0.0.1:" + std::to_string(port); }

PeerMessage EchoBallot(PeerMessage const& m) {
  auto const* p = m.As<PrepareRequest>();
  return {0, 0, PrepareResponse{ResponseStatus::kOk, p ? p->ballot : Ballot(), {}}};
}

class TcpTransportTest : public ::testing::Test {
 protected:
  void SetUp() override {
    peers_ = {Loopback(net::PickFreePort()), Loopback(net::PickFreePort())};
    a_ = std::make_unique<TcpTransport>(0, peers_, scheduler_);
    b_ = std::make_unique<TcpTransport>(1, peers_, scheduler_);
    b_->Serve(EchoBallot);
  }
  void TearDown() override {
    a_->Shutdown();
    b_->Shutdown();
    scheduler_.Shutdown();
  }

  ThreadScheduler scheduler_;
  std::vector<std::string> peers_;
  std::unique_ptr<TcpTransport> a_, b_;
};

TEST_F(TcpTransportTest, ReplyEchoesTag) {
  auto out = a_->Call(1, PeerMessage{0, 0, PrepareRequest{Ballot(257)}}, 1s);
  ASSERT_EQ(out.status, RpcStatus::kReply);
  ASSERT_TRUE(out.reply);
  EXPECT_EQ(out.reply->type(), MessageType::kPrepareResp);
  EXPECT_EQ(out.reply->from, 1u);
  EXPECT_EQ(out.reply->As<PrepareResponse>()->ballot, Ballot(257));
}

TEST_F(TcpTransportTest, SelfCallUsesLocalHandler) {
  a_->Serve([](PeerMessage const&) {
    return PeerMessage{0, 0, AcceptResponse{ResponseStatus::kOk, Ballot(9)}};
  });
  auto out = a_->Call(0, PeerMessage{0, 0, PrepareRequest{Ballot(1)}}, 1s);
  ASSERT_EQ(out.status, RpcStatus::kReply);
  EXPECT_EQ(out.reply->As<AcceptResponse>()->ballot, Ballot(9));
}

TEST_F(TcpTransportTest, DownPeerFailsWithinDeadline) {
  b_->Shutdown();
  auto start = std::chrono::steady_clock::now();
  auto out = a_->Call(1, PeerMessage{0, 0, PrepareRequest{Ballot(1)}}, 300ms);
  auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_NE(out.status, RpcStatus::kReply);
  EXPECT_LT(elapsed, 300ms + 200ms);
}

TEST_F(TcpTransportTest, ConnectionsDisableNagle) {
  for (int i = 0; i < 3; ++i)
    ASSERT_EQ(a_->Call(1, PeerMessage{0, 0, PrepareRequest{Ballot(1)}}, 1s).status,
              RpcStatus::kReply);
  auto out_stats = a_->Sockets();
  auto in_stats = b_->Sockets();
  EXPECT_GE(out_stats.total, 1u);
  EXPECT_EQ(out_stats.nodelay, out_stats.total);
  EXPECT_GE(in_stats.total, 1u);
  EXPECT_EQ(in_stats.nodelay, in_stats.total);
}

TEST_F(TcpTransportTest, GarbageLineClosesOnlyThatConnection) {
  auto raw = net::Connect(net::HostPort::Parse(peers_[1]), 1s);
  ASSERT_TRUE(net::WriteAll(raw.get(), "not-json\n"));
  char buf[64];
  EXPECT_EQ(net::ReadSome(raw.get(), buf, sizeof buf), 0);
  auto out = a_->Call(1, PeerMessage{0, 0, PrepareRequest{Ballot(513)}}, 1s);
  ASSERT_EQ(out.status, RpcStatus::kReply);
  EXPECT_EQ(out.reply->As<PrepareResponse>()->ballot, Ballot(513));
}

TEST_F(TcpTransportTest, ConcurrentCallersGetTheirOwnReplies) {
  std::atomic<int> mismatches{0};
  std::vector<std::thread> callers;
  for (int t = 0; t < 8; ++t) {
    callers.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) {
        Ballot b(static_cast<std::uint64_t>(t * 1000 + i + 1));
        auto out = a_->Call(1, PeerMessage{0, 0, PrepareRequest{b}}, 2s);
        if (out.status != RpcStatus::kReply || out.reply->As<PrepareResponse>()->ballot != b)
          ++mismatches;
      }
    });
  }
  for (auto& t : callers)
    t.join();
  EXPECT_EQ(mismatches.load(), 0);
}

// A hand-rolled peer that answers 100 pipelined requests in shuffled order.
TEST(TcpTransportRawTest, OutOfOrderRepliesMatchByTag) {
  ThreadScheduler scheduler;
  auto listener = net::Listen(net::HostPort::Parse("127.0.0.1:0"));
  auto port = net::LocalPort(listener.get());
  std::vector<std::string> peers = {Loopback(net::PickFreePort()), Loopback(port)};
  TcpTransport client(0, peers, scheduler);

  constexpr int kCalls = 100;
  std::thread peer([&] {
    auto fd = net::Accept(listener.get());
    LineFramer framer;
    std::vector<PeerMessage> requests;
    char buf[4096];
    while (requests.size() < kCalls) {
      auto n = net::ReadSome(fd.get(), buf, sizeof buf);
      if (n <= 0)
        return;
      framer.Feed(std::string_view(buf, static_cast<std::size_t>(n)));
      while (auto line = framer.Next())
        requests.push_back(DecodeMessage(*line));
    }
    std::mt19937_64 rng(5);
    std::shuffle(requests.begin(), requests.end(), rng);
    for (auto const& r : requests) {
      auto reply = EchoBallot(r);
      reply.tag = r.tag;
      reply.from = 1;
      net::WriteAll(fd.get(), EncodeMessage(reply));
      if (rng() % 4 == 0)
        std::this_thread::sleep_for(1ms);
    }
    // Hold the connection open until the client has everything.
    net::ReadSome(fd.get(), buf, sizeof buf);
  });

  std::mutex mu;
  std::condition_variable cv;
  int done = 0, mismatches = 0;
  std::set<std::uint64_t> tags;
  for (int i = 0; i < kCalls; ++i) {
    Ballot b(static_cast<std::uint64_t>(i + 1));
    client.Rpc(1, PeerMessage{0, 0, PrepareRequest{b}}, 5s, [&, b](RpcOutcome out) {
      std::scoped_lock lock(mu);
      if (out.status != RpcStatus::kReply || out.reply->As<PrepareResponse>()->ballot != b)
        ++mismatches;
      else
        tags.insert(out.reply->tag);
      ++done;
      cv.notify_all();
    });
  }
  {
    std::unique_lock lock(mu);
    ASSERT_TRUE(cv.wait_for(lock, 10s, [&] { return done == kCalls; }));
  }
  EXPECT_EQ(mismatches, 0);
  EXPECT_EQ(tags.size(), static_cast<std::size_t>(kCalls));
  client.Shutdown();
  peer.join();
  scheduler.Shutdown();
}

TEST(TcpTransportRawTest, ShutdownFailsPendingCalls) {
  ThreadScheduler scheduler;
  auto listener = net::Listen(net::HostPort::Parse("127.0.0.1:0"));
  std::vector<std::string> peers = {Loopback(net::PickFreePort()),
                                    Loopback(net::LocalPort(listener.get()))};
  TcpTransport client(0, peers, scheduler);
  std::thread silent([&] {
    auto fd = net::Accept(listener.get());
    char buf[256];
    while (net::ReadSome(fd.get(), buf, sizeof buf) > 0) {
    }
  });
  std::mutex mu;
  std::condition_variable cv;
  std::optional<RpcStatus> status;
  client.Rpc(1, PeerMessage{0, 0, PrepareRequest{Ballot(1)}}, 30s, [&](RpcOutcome out) {
    std::scoped_lock lock(mu);
    status = out.status;
    cv.notify_all();
  });
  std::this_thread::sleep_for(50ms);
  client.Shutdown();
  {
    std::unique_lock lock(mu);
    ASSERT_TRUE(cv.wait_for(lock, 5s, [&] { return status.has_value(); }));
  }
  EXPECT_EQ(*status, RpcStatus::kDisconnected);
  net::ShutdownBoth(listener.get());
  silent.join();
  scheduler.Shutdown();
}

TEST(NetTest, HostPortParsing) {
  auto hp = net::HostPort::Parse("127.0.0.1:8080");
  EXPECT_EQ(hp.host, "127.0.0.1");
  EXPECT_EQ(hp.port, 8080);
  EXPECT_EQ(hp.ToString(), "127.0.0.1:8080");
  EXPECT_THROW(net::HostPort::Parse("nope"), std::invalid_argument);
  EXPECT_THROW(net::HostPort::Parse("h:99999"), std::invalid_argument);
}

}  // namespace
}  // namespace replicant
