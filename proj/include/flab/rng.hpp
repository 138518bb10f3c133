#pragma once

#include <array>
#include <cstdint>

#include "flab/common.hpp"

namespace flab {

// Philox4x32-10 counter-based generator. Every draw is addressed by
// (seed, path_index, step_index, slot), so path simulation is
// order-independent and parallelizable, and reruns with the same key are
// bit-identical regardless of thread count.
struct Philox {
  static std::array<std::uint32_t, 4> block(std::uint64_t seed,
                                            std::uint64_t path,
                                            std::uint32_t step,
                                            std::uint32_t slot);
};

// Per-(seed, path) view with convenience draws. Stateless: each call is a
// pure function of (step, slot).
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t path)
      : seed_(seed), path_(path) {}

  // Uniform in (0, 1), 53-bit resolution.
  double uniform(std::uint32_t step, std::uint32_t slot) const;

  // Standard normal via Box-Muller; one draw per (step, slot).
  double normal(std::uint32_t step, std::uint32_t slot) const;

  // n independent standard normals at a given step, slots slot0, slot0+1, ...
  Vec normals(std::uint32_t step, int n, std::uint32_t slot0 = 0) const;

  // Poisson count by inverse-transform search; requires mean < 500.
  long poisson(double mean, std::uint32_t step, std::uint32_t slot) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t path() const { return path_; }

 private:
  std::uint64_t seed_;
  std::uint64_t path_;
};

}  // namespace flab
