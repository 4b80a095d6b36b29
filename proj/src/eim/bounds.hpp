#pragma once

#include "eim/rng.hpp"
#include "eim/targets.hpp"
#include "eim/tensor.hpp"

#include <Eigen/Cholesky>

#include <functional>
#include <string>
#include <vector>

namespace eim {

/// Multivariate Gaussian with a dense covariance, factorized once.
class MvGaussian {
 public:
  MvGaussian(Vector mean, Matrix cov);
  static MvGaussian diagonal(const Vector& mean, const Vector& stddev);

  std::size_t dim() const { return std::size_t(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }

  Vector sample(Rng& rng) const;
  /// mean + L eps for a given standard-normal eps.
  Vector transform(const Vector& eps) const;
  double log_prob(const Vector& x) const;

 private:
  Vector mean_;
  Matrix cov_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
};

/// p(z) = N(0, I_m), p(x|z) = N(A z + b, obs_var I_n).
struct GaussianLinearModel {
  Matrix a;
  Vector b;
  double obs_var = 1.0;

  std::size_t obs_dim() const { return std::size_t(a.rows()); }
  std::size_t latent_dim() const { return std::size_t(a.cols()); }
  void validate() const;

  /// log N(x; b, A A^T + obs_var I).
  double exact_log_marginal(const Vector& x) const;
  MvGaussian posterior(const Vector& x) const;
  double log_joint(const Vector& x, const Vector& z) const;
  Vector sample_x(Rng& rng) const;

  /// Entries of A and b standard normal; obs_var in [0.5, 1.5).
  static GaussianLinearModel random(std::size_t n, std::size_t m, Rng& rng);
};

/// Semi-implicit q(z|x) = int q(z|lambda) q(lambda) dlambda with
/// q(lambda) Gaussian and q(z|lambda) = N(C lambda + c, cov_z).
struct HierarchicalGaussian {
  MvGaussian lambda;
  Matrix c_mat;
  Vector c_shift;
  MvGaussian z_noise;  // N(0, cov_z)

  double log_conditional(const Vector& z, const Vector& lam) const;
  Vector sample_conditional(const Vector& lam, Rng& rng) const;
};

/// x ~ N(0, I_d), y = rho x + sqrt(1 - rho^2) eps.
struct CorrelatedGaussianPair {
  double rho = 0.0;
  std::size_t dim = 1;

  void validate() const;
  double true_mi() const;
  void sample(Vector& x, Vector& y, Rng& rng) const;
  Vector sample_marginal(Rng& rng) const;
};

/// Critic energy U(x, y); the bound uses exp(-U).
using Critic = std::function<double(const Vector& x, const Vector& y)>;
/// -U = log p(y|x) - log p(y).
Critic optimal_critic(const CorrelatedGaussianPair& pair);
Critic constant_critic(double value);

/// log (1/K) sum_i p(x, z_i) / q(z_i) for the rows z_i of `z`.
double iwae_estimator(const GaussianLinearModel& g, const Vector& x, const MvGaussian& q,
                      const Matrix& z);
/// The auxiliary-variable bound of the SNIS model with proposal q and energy
/// log q - log p(x, .), assembled term by term for selected index `i`, with
/// the remaining rows of z as the auxiliary variables.
double avvi_snis_estimator(const GaussianLinearModel& g, const Vector& x, const MvGaussian& q,
                           const Matrix& z, std::size_t i);
/// log p(x, z) - log (1/K)(q(z|lam_0) + sum_j q(z|lam_j)) with lam_0 the
/// first row of `lambdas`.
double sivi_estimator(const GaussianLinearModel& g, const Vector& x,
                      const HierarchicalGaussian& q, const Vector& z, const Matrix& lambdas);
/// Single term of the contrastive bound; x_neg holds the K-1 negatives.
double infonce_estimator(const Critic& critic, const Vector& x, const Vector& y,
                         const Matrix& x_neg);

Estimate iwae_bound(const GaussianLinearModel& g, const Vector& x, const MvGaussian& q, int k,
                    std::size_t n_outer, Rng& rng);
Estimate avvi_snis_bound(const GaussianLinearModel& g, const Vector& x, const MvGaussian& q,
                         int k, std::size_t n_outer, Rng& rng);
Estimate sivi_bound(const GaussianLinearModel& g, const Vector& x, const HierarchicalGaussian& q,
                    int k, std::size_t n_outer, Rng& rng);
Estimate infonce_mi_bound(const CorrelatedGaussianPair& pair, const Critic& critic, int k,
                          std::size_t n_outer, Rng& rng);

struct BoundRow {
  std::string bound;
  int k = 0;
  double estimate = 0.0;
  double se = 0.0;
  double oracle = 0.0;
  double gap = 0.0;  // oracle - estimate
};

/// The bound table printed by the CLI: IWAE, AVVI-SNIS, SIVI and InfoNCE on
/// fixed Gaussian instances derived from `seed`.
std::vector<BoundRow> bound_zoo(std::uint64_t seed, std::size_t n_outer);

}  // namespace eim
