#include "eim/distributions.hpp"

#include "eim/error.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace eim {
namespace {
const double kLog2Pi = std::log(2.0 * std::numbers::pi);
}

DiagGaussian DiagGaussian::standard(std::size_t dim, double stddev, double mean) {
  if (!(stddev > 0.0)) throw InvalidArgument("Gaussian standard deviation must be positive");
  return {Tensor::matrix(1, dim, mean), Tensor::matrix(1, dim, std::log(stddev))};
}

void DiagGaussian::validate() const {
  if (mean.size() == 0 || mean.size() != log_std.size()) {
    throw InvalidArgument("DiagGaussian mean/log_std sizes differ or are empty");
  }
  if (!mean.all_finite() || !log_std.all_finite()) {
    throw InvalidArgument("DiagGaussian parameters must be finite");
  }
}

Matrix standard_normal(std::size_t n, std::size_t d, Rng& rng) {
  Matrix eps(n, d);
  double* p = eps.data();
  for (Eigen::Index i = 0; i < eps.size(); ++i) p[i] = rng.normal();
  return eps;
}

Matrix DiagGaussian::sample(std::size_t n, Rng& rng) const {
  const std::size_t d = dim();
  Matrix x = standard_normal(n, d, rng);
  for (std::size_t j = 0; j < d; ++j) {
    x.col(Eigen::Index(j)) = x.col(Eigen::Index(j)).array() * std::exp(log_std[j]) + mean[j];
  }
  return x;
}

Vector DiagGaussian::log_prob(const Matrix& x) const {
  const std::size_t d = dim();
  if (std::size_t(x.cols()) != d) throw InvalidArgument("log_prob dimension mismatch");
  double norm = 0.5 * double(d) * kLog2Pi;
  for (std::size_t j = 0; j < d; ++j) norm += log_std[j];
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double q = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double z = (x(i, Eigen::Index(j)) - mean[j]) * std::exp(-log_std[j]);
      q += z * z;
    }
    out[i] = -0.5 * q - norm;
  }
  return out;
}

Var gaussian_log_prob(Var x, Var mean, Var log_std) {
  const double d = double(x.cols());
  Var z = (x - mean) * exp(-log_std);
  return -0.5 * sum_rows(square(z)) - sum_rows(log_std) - 0.5 * d * kLog2Pi;
}

Var gaussian_reparam(Var mean, Var log_std, const Matrix& eps) {
  Var e = mean.graph->constant(Tensor::from_matrix(eps));
  return mean + exp(log_std) * e;
}

GaussianDraw gaussian_sample(Var mean, Var log_std, std::size_t n, Rng& rng) {
  const Matrix eps = standard_normal(n, mean.cols(), rng);
  Var x = gaussian_reparam(mean, log_std, eps);
  return {x, gaussian_log_prob(x, mean, log_std)};
}

std::size_t categorical_sample(std::span<const double> logits, Rng& rng) {
  if (logits.empty()) throw InvalidArgument("categorical_sample on empty logits");
  const double lse = logsumexp(logits);
  if (!std::isfinite(lse)) throw InvalidArgument("categorical_sample needs finite logits");
  const double u = rng.uniform();
  double cdf = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    cdf += std::exp(logits[i] - lse);
    if (u < cdf) return i;
  }
  // Rounding left the cdf just short of 1: return the last index with mass.
  for (std::size_t i = logits.size(); i-- > 0;) {
    if (std::isfinite(logits[i])) return i;
  }
  return logits.size() - 1;
}

bool bernoulli_sample(double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument("bernoulli probability " + std::to_string(p) + " outside [0,1]");
  }
  return rng.uniform() < p;
}

double normal_log_density(double x, double mean, double stddev) {
  const double z = (x - mean) / stddev;
  return -0.5 * z * z - std::log(stddev) - 0.5 * kLog2Pi;
}

}  // namespace eim
