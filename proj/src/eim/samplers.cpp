#include "eim/samplers.hpp"

#include "eim/distributions.hpp"
#include "eim/error.hpp"
#include "eim/graph.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace eim {
namespace {

double log_sigmoid(double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); }

void check_parts(const SamplerParts& parts) {
  if (!parts.propose || !parts.log_proposal || !parts.energy || parts.dim == 0) {
    throw InvalidArgument("SamplerParts is incomplete");
  }
}

void check_point(const SamplerParts& parts, const Matrix& x) {
  if (x.rows() != 1 || std::size_t(x.cols()) != parts.dim) {
    throw InvalidArgument("expected a single point of dimension " + std::to_string(parts.dim));
  }
}

// Energies of many proposal rows, evaluated in bounded chunks.
constexpr Eigen::Index kChunkRows = 1 << 15;

}  // namespace

Matrix trs_sample(const SamplerParts& parts, int truncation, std::size_t n, Rng& rng) {
  check_parts(parts);
  if (truncation < 1) throw InvalidArgument("TRS truncation T must be >= 1");
  Matrix out(n, parts.dim);
  std::vector<Eigen::Index> active(n);
  std::iota(active.begin(), active.end(), Eigen::Index{0});
  for (int t = 1; t <= truncation && !active.empty(); ++t) {
    const Matrix draws = parts.propose(active.size(), rng);
    if (t == truncation) {
      for (std::size_t a = 0; a < active.size(); ++a) out.row(active[a]) = draws.row(Eigen::Index(a));
      break;
    }
    const Vector u = parts.energy(draws);
    std::vector<Eigen::Index> still;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const double accept = std::exp(log_sigmoid(-u[Eigen::Index(a)]));
      if (bernoulli_sample(accept, rng)) {
        out.row(active[a]) = draws.row(Eigen::Index(a));
      } else {
        still.push_back(active[a]);
      }
    }
    active.swap(still);
  }
  return out;
}

Matrix snis_sample(const SamplerParts& parts, int candidates, std::size_t n, Rng& rng) {
  check_parts(parts);
  if (candidates < 1) throw InvalidArgument("SNIS candidate count K must be >= 1");
  const auto k = Eigen::Index(candidates);
  Matrix out(n, parts.dim);
  std::vector<double> logits(static_cast<std::size_t>(candidates));
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix draws = parts.propose(std::size_t(candidates), rng);
    const Vector u = parts.energy(draws);
    for (Eigen::Index j = 0; j < k; ++j) logits[std::size_t(j)] = -u[j];
    out.row(Eigen::Index(i)) = draws.row(Eigen::Index(categorical_sample(logits, rng)));
  }
  return out;
}

Vector snis_log_weights(const SamplerParts& parts, int candidates, const Matrix& x,
                        std::size_t n, Rng& rng) {
  check_parts(parts);
  check_point(parts, x);
  if (candidates < 1) throw InvalidArgument("SNIS candidate count K must be >= 1");
  const double log_pi = parts.log_proposal(x)[0];
  const double neg_ux = -parts.energy(x)[0];
  const double log_k = std::log(double(candidates));
  const auto others = Eigen::Index(candidates - 1);
  Vector out(n);
  if (others == 0) {
    out.setConstant(log_pi + ((log_k + neg_ux) - neg_ux));
    return out;
  }
  // Realizations are processed in groups so each energy call sees many rows.
  const Eigen::Index per_chunk = std::max<Eigen::Index>(1, kChunkRows / others);
  std::vector<double> logits(static_cast<std::size_t>(candidates));
  for (Eigen::Index start = 0; start < Eigen::Index(n); start += per_chunk) {
    const Eigen::Index count = std::min<Eigen::Index>(per_chunk, Eigen::Index(n) - start);
    const Matrix draws = parts.propose(std::size_t(count * others), rng);
    const Vector u = parts.energy(draws);
    for (Eigen::Index r = 0; r < count; ++r) {
      for (Eigen::Index j = 0; j < others; ++j) logits[std::size_t(j)] = -u[r * others + j];
      logits.back() = neg_ux;
      out[start + r] = log_pi + ((log_k + neg_ux) - logsumexp(logits));
    }
  }
  return out;
}

Vector trs_log_q(int truncation, double zhat_logit, double log_accept_x) {
  if (truncation < 1) throw InvalidArgument("TRS truncation T must be >= 1");
  const double log_reject = log_sigmoid(-zhat_logit);  // log(1 - Zhat)
  std::vector<double> l(static_cast<std::size_t>(truncation));
  for (int i = 1; i <= truncation; ++i) {
    l[std::size_t(i - 1)] = double(i - 1) * log_reject + (i < truncation ? log_accept_x : 0.0);
  }
  const double lse = logsumexp(l);
  Vector out(truncation);
  for (int i = 0; i < truncation; ++i) out[i] = l[std::size_t(i)] - lse;
  return out;
}

Vector trs_log_weights(const SamplerParts& parts, int truncation, double zhat_logit,
                       const Matrix& x, std::size_t n, Rng& rng) {
  check_parts(parts);
  check_point(parts, x);
  const double log_pi = parts.log_proposal(x)[0];
  const double log_accept_x = log_sigmoid(-parts.energy(x)[0]);
  const Vector log_q = trs_log_q(truncation, zhat_logit, log_accept_x);
  const std::vector<double> logits(log_q.data(), log_q.data() + log_q.size());

  std::vector<int> index(n);
  std::size_t rejected_total = 0;
  for (auto& i : index) {
    i = int(categorical_sample(logits, rng)) + 1;
    rejected_total += std::size_t(i - 1);
  }
  Vector rejected_log(0);
  if (rejected_total > 0) {
    const Matrix draws = parts.propose(rejected_total, rng);
    const Vector u = parts.energy(draws);
    rejected_log = u.unaryExpr([](double v) { return log_sigmoid(v); });  // log(1 - s)
  }
  Vector out(n);
  std::size_t cursor = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const int i = index[r];
    double acc = log_pi + (i < truncation ? log_accept_x : 0.0) - log_q[i - 1];
    for (int t = 1; t < i; ++t) acc += rejected_log[Eigen::Index(cursor++)];
    out[Eigen::Index(r)] = acc;
  }
  return out;
}

LogMeanExp log_mean_exp(const Vector& log_weights) {
  const auto n = log_weights.size();
  if (n == 0) throw InvalidArgument("log_mean_exp of no weights");
  const double m = log_weights.maxCoeff();
  const Vector w = (log_weights.array() - m).exp().matrix();
  const double mean = w.mean();
  LogMeanExp out;
  out.value = m + std::log(mean);
  if (n > 1) {
    const double var = (w.array() - mean).square().sum() / double(n - 1);
    out.se = std::sqrt(var / double(n)) / mean;
  }
  return out;
}

}  // namespace eim
