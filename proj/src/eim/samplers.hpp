#pragma once

#include "eim/rng.hpp"
#include "eim/tensor.hpp"

#include <functional>

namespace eim {

/// Proposal and energy as plain numeric callables. Points are matrix rows.
struct SamplerParts {
  std::size_t dim = 0;
  std::function<Matrix(std::size_t n, Rng& rng)> propose;
  std::function<Vector(const Matrix& x)> log_proposal;
  std::function<Vector(const Matrix& x)> energy;
};

/// Truncated rejection sampling: draws x_t ~ pi and accepts with probability
/// sigmoid(-U(x_t)) for t < T; the T-th draw is always accepted.
Matrix trs_sample(const SamplerParts& parts, int truncation, std::size_t n, Rng& rng);

/// Self-normalized importance sampling: K candidates from pi, one returned
/// with probability proportional to exp(-U).
Matrix snis_sample(const SamplerParts& parts, int candidates, std::size_t n, Rng& rng);

/// n independent realizations of
///   log pi(x) - U(x) - log((1/K)(sum_{j>=2} exp(-U(x_j)) + exp(-U(x))))
/// for one point x (a 1 x d row), with fresh x_{2:K} ~ pi each time.
Vector snis_log_weights(const SamplerParts& parts, int candidates, const Matrix& x,
                        std::size_t n, Rng& rng);

/// n independent realizations of the TRS importance ratio
///   log[pi(x) s(x)^{[i<T]} prod_{t<i} (1 - s(x_t)) / q(i|x)],  s = sigmoid(-U),
/// with i ~ q(i|x) proportional to (1-Zhat)^{i-1} s(x)^{[i<T]} and x_{1:i-1} ~ pi.
Vector trs_log_weights(const SamplerParts& parts, int truncation, double zhat_logit,
                       const Matrix& x, std::size_t n, Rng& rng);

/// Normalized log q(i|x) for i = 1..T given log sigmoid(-U(x)).
Vector trs_log_q(int truncation, double zhat_logit, double log_accept_x);

/// log-mean-exp of the weights with a delta-method standard error.
struct LogMeanExp {
  double value = 0.0;
  double se = 0.0;
};
LogMeanExp log_mean_exp(const Vector& log_weights);

}  // namespace eim
