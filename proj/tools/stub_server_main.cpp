#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "shortlens/errors.hpp"
#include "shortlens/stub_backend.hpp"

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic stand-in for the model backend"};
  int port = 8000;
  std::string script;
  app.add_option("--port", port, "Port on 127.0.0.1 (0 = any free port)")->check(CLI::Range(0, 65535));
  app.add_option("--script", script, "JSON script of canned responses")->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  try {
    auto models = script.empty() ? std::make_unique<shortlens::StubModels>()
                                 : std::make_unique<shortlens::StubModels>(
                                       shortlens::StubModels::from_file(script).script());
    shortlens::StubServer server(*models);
    server.start(port);
    std::cout << server.base_url() << std::endl;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    return 0;
  } catch (const shortlens::Error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.code());
  }
}
