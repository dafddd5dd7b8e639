#include <atomic>
#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include "cli/app.hpp"

namespace {
std::atomic<bool> g_cancel{false};

extern "C" void on_signal(int) { g_cancel.store(true); }
}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::vector<std::string> args(argv + 1, argv + argc);
  return histocell::cli::run(args, std::cout, std::cerr, &g_cancel);
}
