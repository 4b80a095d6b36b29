#pragma once

#include "eim/graph.hpp"
#include "eim/rng.hpp"
#include "eim/tensor.hpp"

#include <span>

namespace eim {

/// Diagonal Gaussian with mean and log standard deviation stored as [1,d] rows.
struct DiagGaussian {
  Tensor mean;
  Tensor log_std;

  static DiagGaussian standard(std::size_t dim, double stddev = 1.0, double mean = 0.0);

  std::size_t dim() const { return mean.size(); }
  void validate() const;

  /// n x d matrix of independent draws.
  Matrix sample(std::size_t n, Rng& rng) const;
  /// Log density of each row of x.
  Vector log_prob(const Matrix& x) const;
};

/// n x d matrix of standard normal draws, filled row-major.
Matrix standard_normal(std::size_t n, std::size_t d, Rng& rng);

/// Per-row log N(x; mean, diag(exp(log_std))^2) as an [N,1] node. `mean` and
/// `log_std` broadcast against x.
Var gaussian_log_prob(Var x, Var mean, Var log_std);
/// mean + exp(log_std) * eps, differentiable in mean and log_std.
Var gaussian_reparam(Var mean, Var log_std, const Matrix& eps);

struct GaussianDraw {
  Var x;
  Var log_prob;
};

/// Reparameterized draw of n rows from N(mean, exp(log_std)^2).
GaussianDraw gaussian_sample(Var mean, Var log_std, std::size_t n, Rng& rng);

/// Index drawn with probability softmax(logits)_i.
std::size_t categorical_sample(std::span<const double> logits, Rng& rng);
bool bernoulli_sample(double p, Rng& rng);

/// log N(x; mean, stddev^2) for a scalar.
double normal_log_density(double x, double mean, double stddev);

}  // namespace eim
