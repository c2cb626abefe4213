#pragma once
// Seed fan-out on a small thread pool. Every seed job is isolated: it gets
// its own RNG and output directory from the caller, and a failure is captured
// per seed instead of aborting the rest.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mfirl::runner {

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // exception text when !ok
};

// Runs fn(seed) for every seed on min(workers, seeds) threads (workers < 1
// behaves as 1). Results come back in input order.
std::vector<SeedResult> run_seeds(const std::vector<std::uint64_t>& seeds, int workers,
                                  const std::function<void(std::uint64_t)>& fn);

}  // namespace mfirl::runner
