#include "geoflow/threads.hpp"

#include <atomic>
#include <cstdlib>

namespace geoflow::threads {

namespace {

int resolve_from_env() {
  const char* env = std::getenv("GEOFLOW_THREADS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

std::atomic<int>& slot() {
  static std::atomic<int> value{resolve_from_env()};
  return value;
}

}  // namespace

int count() { return slot().load(std::memory_order_relaxed); }

void set_count(int n) { slot().store(n >= 1 ? n : 1, std::memory_order_relaxed); }

bool strict() { return count() == 1; }

}  // namespace geoflow::threads
