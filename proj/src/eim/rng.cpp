#include "eim/rng.hpp"

#include <cmath>
#include <numbers>

namespace eim {
namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(mix64(seed + kGamma) ^ (stream * kGamma + 0x632be59bd9b4e019ULL))) {}

Rng::result_type Rng::operator()() {
  // Two rounds of the splitmix finalizer over (key, counter).
  const std::uint64_t c = counter_++;
  return mix64(mix64(key_ + c * kGamma) ^ key_);
}

Rng Rng::split(std::uint64_t child) const {
  return Rng(key_, mix64(child + 0x243f6a8885a308d3ULL));
}

double Rng::uniform() {
  // 53 random bits, shifted off zero.
  return (double((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace eim
