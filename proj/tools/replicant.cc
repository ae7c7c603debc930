#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "replicant/server.h"

using namespace replicant;

namespace {

int WaitForSignal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replicated key-value store server"};
  std::string config_path;
  app.add_option("--config", config_path, "Server config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  // Block before any thread starts so only sigwait sees these.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::signal(SIGPIPE, SIG_IGN);

  try {
    auto config = ServerConfig::Load(config_path);
    Server server(config);
    server.Start();
    std::cerr << "replicant: peer " << config.id << " serving clients on "
              << config.peers[config.id].client_address << std::endl;
    WaitForSignal();
    server.Stop();
  } catch (std::exception const& e) {
    std::cerr << "replicant: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
