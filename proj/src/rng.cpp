#include "flab/rng.hpp"

#include <cmath>

namespace flab {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> Philox::block(std::uint64_t seed,
                                           std::uint64_t path,
                                           std::uint32_t step,
                                           std::uint32_t slot) {
  std::array<std::uint32_t, 4> c = {
      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
      step, slot};
  std::uint32_t k0 = static_cast<std::uint32_t>(seed);
  std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return c;
}

double NoiseStream::uniform(std::uint32_t step, std::uint32_t slot) const {
  auto b = Philox::block(seed_, path_, step, slot);
  std::uint64_t bits =
      (static_cast<std::uint64_t>(b[0]) << 32) | static_cast<std::uint64_t>(b[1]);
  // 53-bit mantissa, shifted into (0, 1]; never returns 0 so log() is safe.
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

double NoiseStream::normal(std::uint32_t step, std::uint32_t slot) const {
  auto b = Philox::block(seed_, path_, step, slot);
  std::uint64_t u1bits =
      (static_cast<std::uint64_t>(b[0]) << 32) | static_cast<std::uint64_t>(b[1]);
  std::uint64_t u2bits =
      (static_cast<std::uint64_t>(b[2]) << 32) | static_cast<std::uint64_t>(b[3]);
  double u1 = (static_cast<double>(u1bits >> 11) + 1.0) * 0x1.0p-53;
  double u2 = (static_cast<double>(u2bits >> 11) + 0.5) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
}

Vec NoiseStream::normals(std::uint32_t step, int n, std::uint32_t slot0) const {
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = normal(step, slot0 + static_cast<std::uint32_t>(i));
  return out;
}

long NoiseStream::poisson(double mean, std::uint32_t step,
                          std::uint32_t slot) const {
  require(mean >= 0.0 && mean < 500.0, "poisson mean out of range [0, 500)");
  if (mean == 0.0) return 0;
  double u = uniform(step, slot);
  double p = std::exp(-mean);
  double cdf = p;
  long k = 0;
  while (u > cdf && k < 100000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

}  // namespace flab
