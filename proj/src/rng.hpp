#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ipanerf {

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Named substream of a master seed. Each pipeline stage (model init, victim
// batches, attack batches, poison-render permutations, ...) owns its own
// stream so stages can be added or removed without shifting the draws of the
// others. Distributions are hand-rolled: determinism must not depend on the
// standard library's <random> distribution internals.
class RngStream {
 public:
  RngStream(uint64_t master_seed, std::string_view name) {
    uint64_t tag = fnv1a64(name);
    std::seed_seq seq{uint32_t(master_seed), uint32_t(master_seed >> 32), uint32_t(tag), uint32_t(tag >> 32)};
    gen_.seed(seq);
  }

  uint64_t next_u64() { return gen_(); }

  // in [0, 1)
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // in [0, n); n > 0
  uint64_t below(uint64_t n) { return uint64_t((static_cast<__uint128_t>(next_u64()) * n) >> 64); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  std::mt19937_64& gen() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ipanerf
