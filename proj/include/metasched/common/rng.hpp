#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace metasched {

// Deterministic random stream. The distribution mappings are implemented
// here instead of using std:: distributions so that draw sequences do not
// depend on the standard library build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Derives an independent child seed from a master seed and a purpose tag.
  static std::uint64_t derive(std::uint64_t master, std::string_view tag);

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();

  // Uniform integer on [0, n), n >= 1.
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace metasched
