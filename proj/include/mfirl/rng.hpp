#pragma once
// Seeded random streams. Every random draw in the library goes through an
// explicitly seeded Rng instance; there is no global generator. Substreams are
// derived with split() so independent components (init, batching, rollouts)
// consume randomness independently of each other.

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfirl {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** -- small state, fast, and trivially serializable, so training
// checkpoints can capture the exact generator position.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (int i = 0; i < 4; ++i) s_[i] = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // index in [0, n)
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  // Draw from a probability vector (assumed to sum to ~1). The final positive
  // entry absorbs any floating-point leftover.
  int categorical(const std::vector<double>& p) {
    double r = uniform01();
    double acc = 0.0;
    int last_pos = -1;
    for (int i = 0; i < static_cast<int>(p.size()); ++i) {
      if (p[i] > 0.0) last_pos = i;
      acc += p[i];
      if (r < acc) return i;
    }
    if (last_pos < 0) throw std::runtime_error("categorical: all-zero probability vector");
    return last_pos;
  }

  // Derived independent stream; deterministic in (current state, id).
  Rng split(std::uint64_t id) const {
    std::uint64_t x = s_[0] ^ (0x9e6c63d0876a9a35ULL * (id + 1));
    Rng out(0);
    for (int i = 0; i < 4; ++i) out.s_[i] = splitmix64(x) ^ s_[i];
    return out;
  }

  std::string state_string() const {
    std::ostringstream os;
    os << s_[0] << ' ' << s_[1] << ' ' << s_[2] << ' ' << s_[3];
    return os.str();
  }
  void set_state(const std::string& st) {
    std::istringstream is(st);
    if (!(is >> s_[0] >> s_[1] >> s_[2] >> s_[3]))
      throw std::runtime_error("Rng::set_state: malformed state string");
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

}  // namespace mfirl
