#include "mfirl/runner.hpp"

#include <atomic>
#include <thread>

namespace mfirl::runner {

std::vector<SeedResult> run_seeds(const std::vector<std::uint64_t>& seeds, int workers,
                                  const std::function<void(std::uint64_t)>& fn) {
  std::vector<SeedResult> results(seeds.size());
  for (size_t i = 0; i < seeds.size(); ++i) results[i].seed = seeds[i];
  if (seeds.empty()) return results;

  std::atomic<size_t> next{0};
  const auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      try {
        fn(seeds[i]);
        results[i].ok = true;
      } catch (const std::exception& e) {
        results[i].error = e.what();
      } catch (...) {
        results[i].error = "unknown error";
      }
    }
  };

  const int n = std::min<int>(std::max(workers, 1), static_cast<int>(seeds.size()));
  if (n <= 1) {
    worker();
    return results;
  }
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (int k = 0; k < n; ++k) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return results;
}

}  // namespace mfirl::runner
