#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace shrinknas {

/// Seeded generator with platform-independent draws. std::mt19937_64 output is
/// fixed by the standard; the distributions in <random> are not, so the
/// conversions to bounded integers / reals / normals are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::size_t below(std::size_t bound);

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform();

  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 finalizer applied to a combination of the two values.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace shrinknas
