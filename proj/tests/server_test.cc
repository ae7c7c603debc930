#include <filesystem>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "replicant/config.h"
#include "replicant/loadgen/client.h"
#include "replicant/server.h"
#include "replicant/sim/linearizability.h"
#include "support/line_client.h"
#include "support/process.h"

#ifndef REPLICANT_SERVER_BINARY
#error "REPLICANT_SERVER_BINARY must name the server executable"
#endif

namespace replicant {
namespace {

using namespace std::chrono_literals;
using testing::LineClient;

constexpr char kThreePeers[] = R"({
  "id": 1,
  "peers": [
    {"id": 0, "address": "127.0.0.1:7000", "client_address": "127.0.0.1:8000"},
    {"id": 2, "address": "127.0.0.1:7002", "client_address": "127.0.0.1:8002"},
    {"id": 1, "address": "127.0.0.1:7001", "client_address": "127.0.0.1:8001"}
  ]
})";

TEST(ServerConfigTest, ParsesAndSortsPeers) {
  auto c = ServerConfig::Parse(kThreePeers);
  EXPECT_EQ(c.id, 1u);
  ASSERT_EQ(c.peers.size(), 3u);
  EXPECT_EQ(c.peers[2].address, "127.0.0.1:7002");
  EXPECT_EQ(c.commit_interval, 150ms);
  EXPECT_EQ(c.election_timeout_base, 450ms);
  EXPECT_EQ(c.election_jitter_max, 150ms);
  auto pc = c.ToPeerConfig();
  EXPECT_EQ(pc.my_id, 1u);
  EXPECT_EQ(pc.peers[1], "127.0.0.1:7001");
  EXPECT_EQ(ServerConfig::Parse(c.ToJson()).ToJson(), c.ToJson());
}

TEST(ServerConfigTest, TimingDefaultsFollowInterval) {
  auto doc = nlohmann::json::parse(kThreePeers);
  doc["commit_interval_ms"] = 20;
  auto c = ServerConfig::Parse(doc.dump());
  EXPECT_EQ(c.election_timeout_base, 60ms);
  EXPECT_EQ(c.election_jitter_max, 20ms);
}

TEST(ServerConfigTest, RejectsBadConfigs) {
  auto doc = nlohmann::json::parse(kThreePeers);
  auto dup_id = doc;
  dup_id["peers"][1]["id"] = 0;
  EXPECT_THROW(ServerConfig::Parse(dup_id.dump()), std::invalid_argument);
  auto dup_addr = doc;
  dup_addr["peers"][1]["address"] = "127.0.0.1:7000";
  EXPECT_THROW(ServerConfig::Parse(dup_addr.dump()), std::invalid_argument);
  auto missing_self = doc;
  missing_self["id"] = 5;
  EXPECT_THROW(ServerConfig::Parse(missing_self.dump()), std::invalid_argument);
  auto gap = doc;
  gap["peers"][1]["id"] = 7;
  EXPECT_THROW(ServerConfig::Parse(gap.dump()), std::invalid_argument);
  EXPECT_THROW(ServerConfig::Parse("not json"), std::invalid_argument);
  EXPECT_THROW(ServerConfig::Parse("{}"), std::invalid_argument);
}

TEST(ClientProtocolTest, ParsesRequests) {
  auto put = ParseClientLine("put k v\r");
  ASSERT_TRUE(put);
  EXPECT_EQ(std::get<Command>(*put), Command::Put("k", "v"));
  EXPECT_EQ(std::get<Command>(*ParseClientLine("get k")), Command::Get("k"));
  EXPECT_EQ(std::get<Command>(*ParseClientLine("del k")), Command::Del("k"));
  EXPECT_TRUE(std::holds_alternative<StatsRequest>(*ParseClientLine("stats")));
  EXPECT_FALSE(ParseClientLine("frobnicate"));
  EXPECT_FALSE(ParseClientLine("put k"));
  EXPECT_FALSE(ParseClientLine("get a b"));
  EXPECT_FALSE(ParseClientLine(""));
}

TEST(ClientProtocolTest, FormatsResults) {
  EXPECT_EQ(FormatResult(CommandKind::kGet, {true, "v"}), "ok v");
  EXPECT_EQ(FormatResult(CommandKind::kGet, {false, std::nullopt}), "notfound");
  EXPECT_EQ(FormatResult(CommandKind::kPut, {true, std::nullopt}), "ok");
  EXPECT_EQ(FormatResult(CommandKind::kDel, {false, std::nullopt}), "notfound");
}

// Three in-process peers on loopback.
class ServerClusterTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::vector<PeerAddress> peers;
    for (PeerId i = 0; i < 3; ++i)
      peers.push_back({i, "127.0.0.1:" + std::to_string(net::PickFreePort()),
                       "127.0.0.1:" + std::to_string(net::PickFreePort())});
    for (PeerId i = 0; i < 3; ++i) {
      ServerConfig c;
      c.id = i;
      c.peers = peers;
      servers_.push_back(std::make_unique<Server>(c));
    }
    for (auto& s : servers_)
      s->Start();
  }
  void TearDown() override {
    for (auto& s : servers_)
      s->Stop();
  }

  int WaitForLeader() {
    auto deadline = std::chrono::steady_clock::now() + 10s;
    while (std::chrono::steady_clock::now() < deadline) {
      for (int i = 0; i < 3; ++i) {
        if (!servers_[i]->Engine().IsLeader())
          continue;
        int agree = 0;
        for (auto& s : servers_)
          agree += s->Engine().Leader() == static_cast<PeerId>(i);
        if (agree == 3)
          return i;
      }
      std::this_thread::sleep_for(20ms);
    }
    return -1;
  }

  std::string ClientAddress(int i) { return servers_[i]->Config().peers[i].client_address; }

  std::vector<std::unique_ptr<Server>> servers_;
};

TEST_F(ServerClusterTest, ServesPutAndGetOnLeader) {
  int leader = WaitForLeader();
  ASSERT_GE(leader, 0);
  LineClient client(ClientAddress(leader));
  EXPECT_EQ(client.Send("put k v"), "ok");
  EXPECT_EQ(client.Send("get k"), "ok v");
  EXPECT_EQ(client.Send("del k"), "ok");
  EXPECT_EQ(client.Send("get k"), "notfound");
  EXPECT_EQ(client.Send("frobnicate"), "err bad-command");
}

TEST_F(ServerClusterTest, FollowerRedirectsToLeaderClientAddress) {
  int leader = WaitForLeader();
  ASSERT_GE(leader, 0);
  LineClient client(ClientAddress((leader + 1) % 3));
  EXPECT_EQ(client.Send("get k"), "retry " + ClientAddress(leader));
}

TEST_F(ServerClusterTest, FollowersApplyWithoutReplying) {
  int leader = WaitForLeader();
  ASSERT_GE(leader, 0);
  LineClient client(ClientAddress(leader));
  ASSERT_EQ(client.Send("put shared 42"), "ok");
  std::this_thread::sleep_for(500ms);
  for (auto& s : servers_)
    EXPECT_GE(s->ReplicatedLog().Frontiers().last_executed, 1);
}

TEST_F(ServerClusterTest, StatsReportNagleDisabledEverywhere) {
  int leader = WaitForLeader();
  ASSERT_GE(leader, 0);
  LineClient client(ClientAddress(leader));
  client.Send("put a b");
  for (auto& s : servers_) {
    auto stats = s->Sockets();
    EXPECT_GT(stats.total, 0u);
    EXPECT_EQ(stats.nodelay, stats.total);
  }
  auto line = client.Send("stats");
  ASSERT_TRUE(line);
  EXPECT_EQ(line->rfind("ok sessions=1 ", 0), 0u) << *line;
}

TEST_F(ServerClusterTest, DisconnectedSessionIsForgotten) {
  int leader = WaitForLeader();
  ASSERT_GE(leader, 0);
  {
    LineClient a(ClientAddress(leader)), b(ClientAddress(leader));
    a.Send("put x 1");
    b.Send("put y 1");
    EXPECT_EQ(servers_[leader]->SessionCount(), 2u);
  }
  auto deadline = std::chrono::steady_clock::now() + 2s;
  while (servers_[leader]->SessionCount() != 0 && std::chrono::steady_clock::now() < deadline)
    std::this_thread::sleep_for(10ms);
  EXPECT_EQ(servers_[leader]->SessionCount(), 0u);
}

TEST_F(ServerClusterTest, ClientVanishingBeforeCommitIsHarmless) {
  int leader = WaitForLeader();
  ASSERT_GE(leader, 0);
  {
    LineClient a(ClientAddress(leader));
    net::WriteAll(a.fd(), "put gone 1\n");
  }
  LineClient b(ClientAddress(leader));
  EXPECT_EQ(b.Send("put here 2"), "ok");
  EXPECT_EQ(b.Send("get here"), "ok 2");
}

// Concurrent clients against the cluster produce a linearizable history.
TEST_F(ServerClusterTest, ConcurrentHistoryIsLinearizable) {
  int leader = WaitForLeader();
  ASSERT_GE(leader, 0);
  std::vector<std::string> cluster;
  for (int i = 0; i < 3; ++i)
    cluster.push_back(ClientAddress(i));
  auto const t0 = std::chrono::steady_clock::now();
  auto since = [&] { return std::chrono::steady_clock::now() - t0; };
  std::mutex mu;
  std::vector<sim::HistoryOp> history;
  std::vector<std::thread> threads;
  for (int t = 0; t < 6; ++t) {
    threads.emplace_back([&, t] {
      loadgen::KvClient client(cluster);
      std::mt19937_64 rng(t);
      for (int i = 0; i < 30; ++i) {
        auto key = "k" + std::to_string(rng() % 3);
        sim::HistoryOp op;
        std::string line;
        switch (rng() % 3) {
          case 0:
            op.command = Command::Get(key);
            line = "get " + key;
            break;
          case 1: {
            auto value = std::to_string(t * 100 + i);
            op.command = Command::Put(key, value);
            line = "put " + key + " " + value;
            break;
          }
          default:
            op.command = Command::Del(key);
            line = "del " + key;
        }
        op.invoke = since();
        auto reply = client.Execute(line);
        op.complete = since();
        if (reply.Succeeded() && reply.retries == 0) {
          CommandResult r;
          r.ok = reply.status == loadgen::ClientReply::Status::kOk;
          if (r.ok && op.command.kind == CommandKind::kGet)
            r.value = reply.line.substr(3);
          op.result = r;
        } else {
          op.complete.reset();
        }
        std::scoped_lock lock(mu);
        op.id = history.size();
        history.push_back(op);
      }
    });
  }
  for (auto& t : threads)
    t.join();
  ASSERT_EQ(history.size(), 180u);
  auto verdict = sim::CheckLinearizable(history);
  EXPECT_TRUE(verdict.linearizable) << verdict.conflict;
}

// Separate processes: elect, serve, exit cleanly on SIGTERM.
TEST(ServerProcessTest, ThreeProcessesServeAndStopOnSigterm) {
  auto dir = std::filesystem::temp_directory_path() / ("replicant-proc-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto layout = testing::WriteClusterConfigs(dir.string(), 3);
  std::vector<std::unique_ptr<testing::ChildProcess>> procs;
  for (int i = 0; i < 3; ++i)
    procs.push_back(std::make_unique<testing::ChildProcess>(
        std::vector<std::string>{REPLICANT_SERVER_BINARY, "--config", layout.config_paths[i]},
        (dir / ("peer" + std::to_string(i) + ".log")).string()));
  loadgen::KvClient client(layout.client_addresses, 10s);
  auto put = client.Execute("put hello world");
  EXPECT_EQ(put.status, loadgen::ClientReply::Status::kOk) << put.line;
  auto get = client.Execute("get hello");
  EXPECT_EQ(get.line, "ok world");
  for (auto& p : procs) {
    p->Signal(SIGTERM);
    ASSERT_TRUE(p->WaitFor(5s));
    EXPECT_TRUE(WIFEXITED(p->exit_status()));
    EXPECT_EQ(WEXITSTATUS(p->exit_status()), 0);
  }
  std::filesystem::remove_all(dir);
}

TEST(ServerProcessTest, DuplicatePeerIdsFailAtStartup) {
  auto dir = std::filesystem::temp_directory_path() / ("replicant-dup-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto doc = nlohmann::json::parse(kThreePeers);
  doc["peers"][1]["id"] = 0;
  auto path = (dir / "bad.json").string();
  std::ofstream(path) << doc.dump();
  testing::ChildProcess proc({REPLICANT_SERVER_BINARY, "--config", path},
                             (dir / "bad.log").string());
  ASSERT_TRUE(proc.WaitFor(5s));
  EXPECT_TRUE(WIFEXITED(proc.exit_status()));
  EXPECT_NE(WEXITSTATUS(proc.exit_status()), 0);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace replicant
