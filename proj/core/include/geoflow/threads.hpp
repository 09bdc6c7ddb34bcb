#pragma once

namespace geoflow::threads {

// Number of worker threads for batched kernels. Resolved once from the
// GEOFLOW_THREADS environment variable (default 1 = strict deterministic
// mode) unless overridden by set_count. Results are bit-identical for any
// count: work is partitioned over disjoint output rows and each row is
// computed by the same serial loop.
int count();
void set_count(int n);

// True when running single-threaded (the strict mode used for
// byte-reproducible runs).
bool strict();

}  // namespace geoflow::threads
