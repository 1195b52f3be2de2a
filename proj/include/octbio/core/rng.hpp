#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace octbio {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

// Named sub-stream of a base seed: derive_seed(seed, "folds"), derive_seed(seed, "init", {fold}).
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                          std::initializer_list<std::uint64_t> indices = {});

// xoshiro256** with platform-independent sampling helpers. The standard
// <random> distributions are implementation-defined, so they are avoided
// wherever outputs must be reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                          // [0, 1)
  double uniform(double lo, double hi);      // [lo, hi)
  std::int64_t randint(std::int64_t lo, std::int64_t hi);  // [lo, hi)
  bool bernoulli(double p);
  double normal();

  // Number of 64-bit draws made by any Rng on the calling thread.
  static std::uint64_t thread_draws();

 private:
  std::array<std::uint64_t, 4> s_;
};

}  // namespace octbio
