#include "replicant/config.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "replicant/net.h"

namespace replicant {

using nlohmann::json;

namespace {

Nanos Millis(json const& j, char const* field, Nanos fallback) {
  auto it = j.find(field);
  if (it == j.end())
    return fallback;
  if (!it->is_number())
    throw std::invalid_argument(std::string(field) + " must be a number");
  auto ms = it->get<double>();
  if (!(ms > 0))
    throw std::invalid_argument(std::string(field) + " must be positive");
  return std::chrono::duration_cast<Nanos>(
      std::chrono::duration<double, std::milli>(ms));
}

}  // namespace

ServerConfig ServerConfig::Parse(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (json::exception const& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                e.what());
  }
  ServerConfig config;
  try {
    config.id = j.at("id").get<PeerId>();
    for (auto const& p : j.at("peers")) {
      config.peers.push_back(PeerAddress{p.at("id").get<PeerId>(),
                                         p.at("address").get<std::string>(),
                                         p.at("client_address").get<std::string>()});
    }
  } catch (json::exception const& e) {
    throw std::invalid_argument(std::string("bad config: ") + e.what());
  }
  config.commit_interval = Millis(j, "commit_interval_ms", 150ms);
  config.election_timeout_base =
      Millis(j, "election_timeout_ms", 3 * config.commit_interval);
  config.election_jitter_max =
      Millis(j, "election_jitter_ms", config.commit_interval);
  config.Validate();
  std::sort(config.peers.begin(), config.peers.end(),
            [](auto const& a, auto const& b) { return a.id < b.id; });
  return config;
}

ServerConfig ServerConfig::Load(std::string const& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Parse(buffer.str());
}

void ServerConfig::Validate() const {
  if (peers.empty())
    throw std::invalid_argument("config lists no peers");
  if (peers.size() > kMaxPeers)
    throw std::invalid_argument("too many peers");
  std::set<PeerId> ids;
  std::set<std::string> addresses;
  for (auto const& p : peers) {
    if (!ids.insert(p.id).second)
      throw std::invalid_argument("duplicate peer id " + std::to_string(p.id));
    if (!addresses.insert(p.address).second ||
        !addresses.insert(p.client_address).second)
      throw std::invalid_argument("duplicate address in config");
    net::HostPort::Parse(p.address);
    net::HostPort::Parse(p.client_address);
  }
  if (*ids.rbegin() != peers.size() - 1)
    throw std::invalid_argument("peer ids must be 0..n-1");
  if (!ids.contains(id))
    throw std::invalid_argument("id " + std::to_string(id) +
                                " is not among the peers");
  if (commit_interval <= Nanos::zero() ||
      election_timeout_base <= Nanos::zero() ||
      election_jitter_max <= Nanos::zero())
    throw std::invalid_argument("durations must be positive");
}

PeerConfig ServerConfig::ToPeerConfig() const {
  PeerConfig pc;
  pc.my_id = id;
  for (auto const& p : peers)
    pc.peers.push_back(p.address);
  pc.commit_interval = commit_interval;
  pc.election_timeout_base = election_timeout_base;
  pc.election_jitter_max = election_jitter_max;
  return pc;
}

std::string ServerConfig::ToJson() const {
  auto ms = [](Nanos d) {
    return std::chrono::duration<double, std::milli>(d).count();
  };
  json j;
  j["id"] = id;
  j["peers"] = json::array();
  for (auto const& p : peers) {
    j["peers"].push_back(
        {{"id", p.id}, {"address", p.address}, {"client_address", p.client_address}});
  }
  j["commit_interval_ms"] = ms(commit_interval);
  j["election_timeout_ms"] = ms(election_timeout_base);
  j["election_jitter_ms"] = ms(election_jitter_max);
  return j.dump(2);
}

}  // namespace replicant
