#include "sentinel/parallel.hpp"

#include <omp.h>

#include <cstdlib>

#include "sentinel/util.hpp"

namespace sentinel {

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int n) {
  if (n <= 0) {
    if (const char* env = std::getenv("AUDITLOG_SENTINEL_THREADS")) {
      if (auto parsed = parse_int(env); parsed && *parsed > 0) n = static_cast<int>(*parsed);
    }
  }
  if (n > 0) omp_set_num_threads(n);
}

}  // namespace sentinel
