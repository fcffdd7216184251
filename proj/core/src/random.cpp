#include "dnas/random.hpp"

#include <cmath>

namespace dnas {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream_id) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream_id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_normal_ = r * std::sin(angle);
  has_spare_normal_ = true;
  return r * std::cos(angle);
}

double Rng::gumbel() {
  // u kept away from {0, 1} so both logs stay finite
  constexpr double kEps = 1e-12;
  double u = uniform();
  if (u < kEps) u = kEps;
  if (u > 1.0 - kEps) u = 1.0 - kEps;
  return -std::log(-std::log(u));
}

Rng Rng::fork(std::uint64_t stream_id) const { return Rng(mix_seed(seed_, stream_id)); }

}  // namespace dnas
