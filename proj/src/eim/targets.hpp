#pragma once

#include "eim/rng.hpp"
#include "eim/tensor.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace eim {

enum class TargetKind { kNineGaussians, kCheckerboard, kTwoRings };

TargetKind parse_target_kind(std::string_view name);
std::string_view target_name(TargetKind kind);

using Point2 = std::array<double, 2>;

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// The synthetic 2-D benchmark densities. Each has an exact sampler and an
/// exact normalized log-density.
///
/// * nine_gaussians: equal mixture of N(m, 0.01 I) with m in {-1,0,1}^2.
/// * checkerboard: uniform on the 8 squares {[0,.25],[.5,.75]}^2 and
///   {[.25,.5],[.75,1]}^2, so the density is 2 on its support.
/// * two_rings: p(x,y) proportional to N(r; 0.6, 0.1) + N(r; 1.3, 0.1) with
///   r = |(x,y)|. The radius therefore has density proportional to
///   r * (N(r; 0.6, 0.1) + N(r; 1.3, 0.1)); normalizer and inverse CDF come
///   from a 10^5-interval trapezoid grid on [0, 3].
class TargetDensity {
 public:
  explicit TargetDensity(TargetKind kind);

  TargetKind kind() const { return kind_; }
  Point2 sample(Rng& rng) const;
  Matrix sample(std::size_t n, Rng& rng) const;
  /// -infinity off the checkerboard support.
  double log_density(Point2 p) const;
  /// Log normalizer of the two-rings density (0 for the other targets).
  double log_normalizer() const { return log_normalizer_; }

  /// Monte Carlo E[log p(x)] under the target with its standard error.
  Estimate reference_avg_log_density(std::size_t n, Rng& rng) const;

 private:
  double ring_unnormalized_log(double r) const;
  double sample_radius(double u) const;

  TargetKind kind_;
  double log_normalizer_ = 0.0;
  std::vector<double> radius_cdf_;
};

inline constexpr std::size_t kRingGridIntervals = 100000;
inline constexpr double kRingGridMax = 3.0;

}  // namespace eim
