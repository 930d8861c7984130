#include "bragg/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace bragg {

namespace {

int threads_from_env() {
  if (const char* env = std::getenv("BRAGG_FORGE_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (...) {
    }
  }
  return 1;
}

std::atomic<int>& configured() {
  static std::atomic<int> value{threads_from_env()};
  return value;
}

}  // namespace

int thread_count() { return configured().load(); }

void set_thread_count(int threads) { configured().store(threads > 0 ? threads : 1); }

}  // namespace bragg
