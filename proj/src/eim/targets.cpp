#include "eim/targets.hpp"

#include "eim/distributions.hpp"
#include "eim/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace eim {
namespace {

constexpr double kComponentStd = 0.1;
constexpr double kSquare = 0.25;
// Lower-left corners of the 8 checkerboard squares.
constexpr std::array<Point2, 8> kSquares = {{
    {0.0, 0.0}, {0.0, 0.5}, {0.5, 0.0}, {0.5, 0.5},
    {0.25, 0.25}, {0.25, 0.75}, {0.75, 0.25}, {0.75, 0.75},
}};

double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

TargetKind parse_target_kind(std::string_view name) {
  if (name == "nine_gaussians") return TargetKind::kNineGaussians;
  if (name == "checkerboard") return TargetKind::kCheckerboard;
  if (name == "two_rings") return TargetKind::kTwoRings;
  throw InvalidArgument("unknown target '" + std::string(name) + "'");
}

std::string_view target_name(TargetKind kind) {
  switch (kind) {
    case TargetKind::kNineGaussians: return "nine_gaussians";
    case TargetKind::kCheckerboard: return "checkerboard";
    case TargetKind::kTwoRings: return "two_rings";
  }
  return "?";
}

TargetDensity::TargetDensity(TargetKind kind) : kind_(kind) {
  if (kind_ != TargetKind::kTwoRings) return;
  // Radial density r f(r) on a uniform grid; trapezoid cumulative sums.
  const std::size_t n = kRingGridIntervals;
  const double h = kRingGridMax / double(n);
  radius_cdf_.assign(n + 1, 0.0);
  double prev = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double r = h * double(i);
    const double cur = r * std::exp(ring_unnormalized_log(r));
    radius_cdf_[i] = radius_cdf_[i - 1] + 0.5 * h * (prev + cur);
    prev = cur;
  }
  const double radial_mass = radius_cdf_.back();
  for (double& c : radius_cdf_) c /= radial_mass;
  log_normalizer_ = std::log(2.0 * std::numbers::pi * radial_mass);
}

double TargetDensity::ring_unnormalized_log(double r) const {
  return log_add_exp(normal_log_density(r, 0.6, 0.1), normal_log_density(r, 1.3, 0.1));
}

double TargetDensity::sample_radius(double u) const {
  auto it = std::upper_bound(radius_cdf_.begin(), radius_cdf_.end(), u);
  const std::size_t hi = std::min<std::size_t>(std::size_t(it - radius_cdf_.begin()), radius_cdf_.size() - 1);
  const std::size_t lo = hi - 1;
  const double h = kRingGridMax / double(kRingGridIntervals);
  const double span = radius_cdf_[hi] - radius_cdf_[lo];
  const double frac = span > 0.0 ? (u - radius_cdf_[lo]) / span : 0.5;
  return h * (double(lo) + frac);
}

Point2 TargetDensity::sample(Rng& rng) const {
  switch (kind_) {
    case TargetKind::kNineGaussians: {
      const auto c = std::min<std::size_t>(std::size_t(rng.uniform() * 9.0), 8);
      const double mx = double(c % 3) - 1.0;
      const double my = double(c / 3) - 1.0;
      const double zx = rng.normal();
      const double zy = rng.normal();
      return {mx + kComponentStd * zx, my + kComponentStd * zy};
    }
    case TargetKind::kCheckerboard: {
      const auto s = std::min<std::size_t>(std::size_t(rng.uniform() * 8.0), 7);
      const double ux = rng.uniform();
      const double uy = rng.uniform();
      return {kSquares[s][0] + kSquare * ux, kSquares[s][1] + kSquare * uy};
    }
    case TargetKind::kTwoRings: {
      const double r = sample_radius(rng.uniform());
      const double theta = 2.0 * std::numbers::pi * rng.uniform();
      return {r * std::cos(theta), r * std::sin(theta)};
    }
  }
  return {0.0, 0.0};
}

Matrix TargetDensity::sample(std::size_t n, Rng& rng) const {
  Matrix out(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p = sample(rng);
    out(Eigen::Index(i), 0) = p[0];
    out(Eigen::Index(i), 1) = p[1];
  }
  return out;
}

double TargetDensity::log_density(Point2 p) const {
  const double x = p[0];
  const double y = p[1];
  switch (kind_) {
    case TargetKind::kNineGaussians: {
      double acc = -std::numeric_limits<double>::infinity();
      for (int i = -1; i <= 1; ++i) {
        for (int j = -1; j <= 1; ++j) {
          const double lp = normal_log_density(x, i, kComponentStd) +
                            normal_log_density(y, j, kComponentStd);
          acc = log_add_exp(acc, lp);
        }
      }
      return acc - std::log(9.0);
    }
    case TargetKind::kCheckerboard: {
      for (const auto& sq : kSquares) {
        if (x >= sq[0] && x <= sq[0] + kSquare && y >= sq[1] && y <= sq[1] + kSquare) {
          return std::log(2.0);
        }
      }
      return -std::numeric_limits<double>::infinity();
    }
    case TargetKind::kTwoRings:
      return ring_unnormalized_log(std::hypot(x, y)) - log_normalizer_;
  }
  return 0.0;
}

Estimate TargetDensity::reference_avg_log_density(std::size_t n, Rng& rng) const {
  if (n == 0) throw InvalidArgument("reference_avg_log_density needs n >= 1");
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = log_density(sample(rng));
    const double delta = v - mean;
    mean += delta / double(i + 1);
    m2 += delta * (v - mean);
  }
  const double var = n > 1 ? m2 / double(n - 1) : 0.0;
  return {mean, std::sqrt(var / double(n))};
}

}  // namespace eim
