#include "eim/bounds.hpp"

#include "eim/error.hpp"
#include "eim/distributions.hpp"
#include "eim/graph.hpp"

#include <cmath>
#include <numbers>

namespace eim {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Estimate mean_se(const std::vector<double>& v) {
  const double n = double(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  s = v.size() > 1 ? s / (n - 1.0) : 0.0;
  return {m, std::sqrt(s / n)};
}

Vector normal_vector(std::size_t d, Rng& rng) {
  Vector v{Eigen::Index(d)};
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return v;
}

void check_k(int k, int min) {
  if (k < min) throw InvalidArgument("K must be >= " + std::to_string(min));
}

void check_outer(std::size_t n) {
  if (n == 0) throw InvalidArgument("n_outer must be >= 1");
}

}  // namespace

MvGaussian::MvGaussian(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
    throw InvalidArgument("covariance shape does not match mean");
  }
  llt_.compute(Eigen::MatrixXd(cov_));
  if (llt_.info() != Eigen::Success) throw NumericError("covariance is not positive definite");
  const Eigen::MatrixXd l = llt_.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0)) throw NumericError("covariance is not positive definite");
    log_det_ += 2.0 * std::log(l(i, i));
  }
}

MvGaussian MvGaussian::diagonal(const Vector& mean, const Vector& stddev) {
  return MvGaussian(mean, Matrix(stddev.array().square().matrix().asDiagonal()));
}

Vector MvGaussian::transform(const Vector& eps) const {
  return mean_ + llt_.matrixL() * eps;
}

Vector MvGaussian::sample(Rng& rng) const { return transform(normal_vector(dim(), rng)); }

double MvGaussian::log_prob(const Vector& x) const {
  const Vector r = llt_.matrixL().solve(x - mean_);
  return -0.5 * (double(dim()) * kLog2Pi + log_det_ + r.squaredNorm());
}

void GaussianLinearModel::validate() const {
  if (a.rows() == 0 || a.cols() == 0) throw InvalidArgument("A must be non-empty");
  if (b.size() != a.rows()) throw InvalidArgument("b must have one entry per row of A");
  if (!(obs_var > 0.0) || !std::isfinite(obs_var)) throw InvalidArgument("obs_var must be positive");
}

double GaussianLinearModel::exact_log_marginal(const Vector& x) const {
  validate();
  Matrix cov = a * a.transpose();
  cov.diagonal().array() += obs_var;
  return MvGaussian(b, cov).log_prob(x);
}

MvGaussian GaussianLinearModel::posterior(const Vector& x) const {
  validate();
  Matrix precision = a.transpose() * a / obs_var;
  precision.diagonal().array() += 1.0;
  const Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(precision)};
  if (llt.info() != Eigen::Success) throw NumericError("posterior precision is not positive definite");
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
  const Vector mean = cov * (a.transpose() * (x - b)) / obs_var;
  return MvGaussian(mean, Matrix(0.5 * (cov + cov.transpose())));
}

double GaussianLinearModel::log_joint(const Vector& x, const Vector& z) const {
  const double n = double(obs_dim());
  const double m = double(latent_dim());
  const double prior = -0.5 * (m * kLog2Pi + z.squaredNorm());
  const Vector r = x - a * z - b;
  const double lik = -0.5 * (n * (kLog2Pi + std::log(obs_var)) + r.squaredNorm() / obs_var);
  return prior + lik;
}

Vector GaussianLinearModel::sample_x(Rng& rng) const {
  const Vector z = normal_vector(latent_dim(), rng);
  return a * z + b + std::sqrt(obs_var) * normal_vector(obs_dim(), rng);
}

GaussianLinearModel GaussianLinearModel::random(std::size_t n, std::size_t m, Rng& rng) {
  GaussianLinearModel g;
  g.a.resize(Eigen::Index(n), Eigen::Index(m));
  for (Eigen::Index i = 0; i < g.a.size(); ++i) g.a.data()[i] = rng.normal();
  g.b = normal_vector(n, rng);
  g.obs_var = 0.5 + rng.uniform();
  return g;
}

double HierarchicalGaussian::log_conditional(const Vector& z, const Vector& lam) const {
  return z_noise.log_prob(z - c_mat * lam - c_shift);
}

Vector HierarchicalGaussian::sample_conditional(const Vector& lam, Rng& rng) const {
  return c_mat * lam + c_shift + z_noise.sample(rng);
}

void CorrelatedGaussianPair::validate() const {
  if (!(rho > -1.0 && rho < 1.0)) throw InvalidArgument("correlation must lie in (-1, 1)");
  if (dim == 0) throw InvalidArgument("dimension must be >= 1");
}

double CorrelatedGaussianPair::true_mi() const {
  return -0.5 * double(dim) * std::log(1.0 - rho * rho);
}

void CorrelatedGaussianPair::sample(Vector& x, Vector& y, Rng& rng) const {
  x = normal_vector(dim, rng);
  y = rho * x + std::sqrt(1.0 - rho * rho) * normal_vector(dim, rng);
}

Vector CorrelatedGaussianPair::sample_marginal(Rng& rng) const { return normal_vector(dim, rng); }

Critic optimal_critic(const CorrelatedGaussianPair& pair) {
  pair.validate();
  const double rho = pair.rho;
  const double v = 1.0 - rho * rho;
  return [rho, v](const Vector& x, const Vector& y) {
    const double d = double(x.size());
    const double cond = -0.5 * (d * std::log(v) + (y - rho * x).squaredNorm() / v);
    const double marg = -0.5 * y.squaredNorm();
    return -(cond - marg);
  };
}

Critic constant_critic(double value) {
  return [value](const Vector&, const Vector&) { return value; };
}

double iwae_estimator(const GaussianLinearModel& g, const Vector& x, const MvGaussian& q,
                      const Matrix& z) {
  std::vector<double> lw(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Vector zi = z.row(i).transpose();
    lw[std::size_t(i)] = g.log_joint(x, zi) - q.log_prob(zi);
  }
  return logsumexp(lw) - std::log(double(lw.size()));
}

double avvi_snis_estimator(const GaussianLinearModel& g, const Vector& x, const MvGaussian& q,
                           const Matrix& z, std::size_t i) {
  const auto k = std::size_t(z.rows());
  if (i >= k) throw InvalidArgument("selected index out of range");
  std::vector<double> log_q(k), neg_u(k);
  for (std::size_t j = 0; j < k; ++j) {
    const Vector zj = z.row(Eigen::Index(j)).transpose();
    log_q[j] = q.log_prob(zj);
    neg_u[j] = g.log_joint(x, zj) - log_q[j];
  }
  const Vector zi = z.row(Eigen::Index(i)).transpose();
  // r(lambda | z_i, x): the other candidates are independent proposal draws.
  double log_r = 0.0;
  double log_prod_q = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    log_prod_q += log_q[j];
    if (j != i) log_r += log_q[j];
  }
  // q(z_i, lambda | x) = K prod_j q(z_j) exp(-U(z_i)) / sum_j exp(-U(z_j)),
  // the factor K counting the slots z_i may occupy.
  const double log_q_joint = std::log(double(k)) + log_prod_q + neg_u[i] - logsumexp(neg_u);
  return g.log_joint(x, zi) + log_r - log_q_joint;
}

double sivi_estimator(const GaussianLinearModel& g, const Vector& x,
                      const HierarchicalGaussian& q, const Vector& z, const Matrix& lambdas) {
  std::vector<double> terms(static_cast<std::size_t>(lambdas.rows()));
  for (Eigen::Index j = 0; j < lambdas.rows(); ++j) {
    terms[std::size_t(j)] = q.log_conditional(z, lambdas.row(j).transpose());
  }
  return g.log_joint(x, z) - (logsumexp(terms) - std::log(double(terms.size())));
}

double infonce_estimator(const Critic& critic, const Vector& x, const Vector& y,
                         const Matrix& x_neg) {
  const auto k = std::size_t(x_neg.rows()) + 1;
  std::vector<double> scores(k);
  scores[0] = -critic(x, y);
  for (Eigen::Index j = 0; j < x_neg.rows(); ++j) {
    scores[std::size_t(j) + 1] = -critic(x_neg.row(j).transpose(), y);
  }
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  if (!std::isfinite(mx)) throw NumericError("critic produced a non-finite score");
  double total = 0.0;
  for (double s : scores) total += std::exp(s - mx);
  return (scores[0] - mx) - (std::log(total) - std::log(double(k)));
}

namespace {

Matrix draw_rows(const MvGaussian& q, int k, Rng& rng) {
  Matrix z(k, Eigen::Index(q.dim()));
  for (int i = 0; i < k; ++i) z.row(i) = q.sample(rng).transpose();
  return z;
}

}  // namespace

Estimate iwae_bound(const GaussianLinearModel& g, const Vector& x, const MvGaussian& q, int k,
                    std::size_t n_outer, Rng& rng) {
  check_k(k, 1);
  check_outer(n_outer);
  const Rng base = rng.split(rng());
  std::vector<double> v(n_outer);
  for (std::size_t o = 0; o < n_outer; ++o) {
    Rng r = base.split(o);
    v[o] = iwae_estimator(g, x, q, draw_rows(q, k, r));
  }
  return mean_se(v);
}

Estimate avvi_snis_bound(const GaussianLinearModel& g, const Vector& x, const MvGaussian& q,
                         int k, std::size_t n_outer, Rng& rng) {
  check_k(k, 1);
  check_outer(n_outer);
  const Rng base = rng.split(rng());
  std::vector<double> v(n_outer);
  for (std::size_t o = 0; o < n_outer; ++o) {
    Rng r = base.split(o);
    const Matrix z = draw_rows(q, k, r);
    std::vector<double> neg_u(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      const Vector zj = z.row(j).transpose();
      neg_u[std::size_t(j)] = g.log_joint(x, zj) - q.log_prob(zj);
    }
    v[o] = avvi_snis_estimator(g, x, q, z, categorical_sample(neg_u, r));
  }
  return mean_se(v);
}

Estimate sivi_bound(const GaussianLinearModel& g, const Vector& x, const HierarchicalGaussian& q,
                    int k, std::size_t n_outer, Rng& rng) {
  check_k(k, 1);
  check_outer(n_outer);
  std::vector<double> v(n_outer);
  for (auto& e : v) {
    const Matrix lambdas = draw_rows(q.lambda, k, rng);
    const Vector z = q.sample_conditional(lambdas.row(0).transpose(), rng);
    e = sivi_estimator(g, x, q, z, lambdas);
  }
  return mean_se(v);
}

Estimate infonce_mi_bound(const CorrelatedGaussianPair& pair, const Critic& critic, int k,
                          std::size_t n_outer, Rng& rng) {
  pair.validate();
  check_k(k, 2);
  check_outer(n_outer);
  std::vector<double> v(n_outer);
  Vector x, y;
  Matrix neg(k - 1, Eigen::Index(pair.dim));
  for (auto& e : v) {
    pair.sample(x, y, rng);
    for (int j = 0; j < k - 1; ++j) neg.row(j) = pair.sample_marginal(rng).transpose();
    e = infonce_estimator(critic, x, y, neg);
  }
  return mean_se(v);
}

std::vector<BoundRow> bound_zoo(std::uint64_t seed, std::size_t n_outer) {
  Rng setup(seed, 0);
  const auto g = GaussianLinearModel::random(3, 2, setup);
  const Vector x = g.sample_x(setup);
  const double exact = g.exact_log_marginal(x);
  const MvGaussian post = g.posterior(x);
  const Vector post_std = post.cov().diagonal().array().sqrt();
  const MvGaussian mismatched = MvGaussian::diagonal(post.mean().array() + 0.5, 1.5 * post_std);

  std::vector<BoundRow> rows;
  auto add = [&](std::string name, int k, Estimate e, double oracle) {
    rows.push_back({std::move(name), k, e.value, e.se, oracle, oracle - e.value});
  };
  std::uint64_t stream = 1;
  for (int k : {1, 8, 64, 512}) {
    Rng r1(seed, stream), r2(seed, stream);
    ++stream;
    add("iwae", k, iwae_bound(g, x, mismatched, k, n_outer, r1), exact);
    add("avvi_snis", k, avvi_snis_bound(g, x, mismatched, k, n_outer, r2), exact);
  }

  // Mixing over a latent shift: q(lambda) = N(mu, s^2 I), z | lambda = N(lambda, tau^2 I).
  const HierarchicalGaussian hq{
      MvGaussian::diagonal(post.mean(), 0.8 * post_std),
      Matrix::Identity(Eigen::Index(g.latent_dim()), Eigen::Index(g.latent_dim())),
      Vector::Zero(Eigen::Index(g.latent_dim())),
      MvGaussian::diagonal(Vector::Zero(Eigen::Index(g.latent_dim())), 0.8 * post_std)};
  for (int k : {1, 4, 16, 64}) {
    Rng r(seed, 100 + std::uint64_t(k));
    add("sivi", k, sivi_bound(g, x, hq, k, n_outer, r), exact);
  }

  const CorrelatedGaussianPair pair{0.9, 1};
  const Critic critic = optimal_critic(pair);
  for (int k : {2, 8, 64, 512}) {
    Rng r(seed, 200 + std::uint64_t(k));
    add("infonce", k, infonce_mi_bound(pair, critic, k, n_outer, r), pair.true_mi());
  }
  return rows;
}

}  // namespace eim
