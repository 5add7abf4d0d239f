#pragma once

namespace sentinel {

// Thread count used by the OpenMP kernels. Outputs never depend on it.
int thread_count();

// n <= 0 falls back to AUDITLOG_SENTINEL_THREADS, then the OpenMP default.
void set_thread_count(int n);

}  // namespace sentinel
