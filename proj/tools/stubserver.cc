#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "replicant/loadgen/stub.h"

using namespace replicant;

int main(int argc, char** argv) {
  CLI::App app{"Stub key-value server with a scripted latency profile"};
  std::string listen = "127.0.0.1:0";
  std::string profile = "co";
  app.add_option("--listen", listen, "host:port to listen on (port 0 picks one)");
  app.add_option("--profile", profile,
                 "instant | fixed:<ms> | co | capacity:<ops/s>");
  CLI11_PARSE(app, argc, argv);

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::signal(SIGPIPE, SIG_IGN);

  try {
    loadgen::StubServer server(loadgen::StubProfile::Parse(profile), listen);
    server.Start();
    std::cout << "listening " << server.Address() << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    server.Stop();
    std::cerr << "stubserver: served " << server.Served() << "\n";
  } catch (std::exception const& e) {
    std::cerr << "stubserver: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
