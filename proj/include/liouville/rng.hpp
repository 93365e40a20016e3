// Small deterministic PRNG (splitmix64) so that seeded runs produce
// byte-identical reports independent of the standard library's
// distribution implementations.
#pragma once

#include <cstdint>
#include <vector>

namespace liouville {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }
};

// Admissible spectral constants: a_{i+1} < b_i < a_{i-1}, b_{i+1} < b_i,
// b_i != a_i, all separated by min_gap_rel * (a_0 - a_n).
inline std::vector<double> random_admissible_b(SplitMix64& rng, const std::vector<double>& a,
                                               double min_gap_rel = 1e-3) {
  const int n = static_cast<int>(a.size()) - 1;
  const double gap = min_gap_rel * (a.front() - a.back());
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<double> b(n - 1);
    for (int i = 1; i <= n - 1; ++i) b[i - 1] = rng.uniform(a[i + 1], a[i - 1]);
    std::sort(b.begin(), b.end(), [](double p, double q) { return p > q; });
    bool ok = true;
    for (int i = 1; i <= n - 1 && ok; ++i) {
      ok = b[i - 1] > a[i + 1] + gap && b[i - 1] < a[i - 1] - gap &&
           std::abs(b[i - 1] - a[i]) > gap;
      if (i >= 2) ok = ok && (b[i - 2] - b[i - 1]) > gap;
    }
    if (ok) return b;
  }
  throw std::runtime_error("random_admissible_b: sampling failed");
}

}  // namespace liouville
