#include "eim/models.hpp"

#include "eim/error.hpp"

#include <cmath>
#include <numbers>

namespace eim {
namespace {

Tensor arange_row(int n) {
  Tensor t = Tensor::matrix(1, std::size_t(n));
  for (int i = 0; i < n; ++i) t[std::size_t(i)] = double(i);
  return t;
}

// 1 for i < T, 0 for i = T (indices 1..T stored at 0..T-1).
Tensor accept_mask_row(int truncation) {
  Tensor t = Tensor::matrix(1, std::size_t(truncation), 1.0);
  t[std::size_t(truncation - 1)] = 0.0;
  return t;
}

void require_params(const ParamStore& store, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (!store.contains(n)) throw InvalidArgument(std::string("checkpoint lacks parameter '") + n + "'");
  }
}

Matrix repeat_row(const Matrix& x, std::size_t n) { return x.replicate(Eigen::Index(n), 1); }

}  // namespace

ModelKind parse_model_kind(std::string_view name) {
  if (name == "trs") return ModelKind::kTrs;
  if (name == "snis") return ModelKind::kSnis;
  if (name == "his") return ModelKind::kHis;
  throw InvalidArgument("unknown model '" + std::string(name) + "'");
}

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kTrs: return "trs";
    case ModelKind::kSnis: return "snis";
    case ModelKind::kHis: return "his";
  }
  return "?";
}

void ModelSpec::validate() const {
  if (dim == 0) throw InvalidArgument("model dimension must be >= 1");
  if (kind == ModelKind::kSnis && k < 1) throw InvalidArgument("SNIS needs K >= 1");
  if (kind != ModelKind::kSnis && t < 1) throw InvalidArgument("TRS/HIS need T >= 1");
  if (kind == ModelKind::kTrs && trs_inner_samples < 1) {
    throw InvalidArgument("TRS needs inner_samples >= 1");
  }
  if (!(proposal_std > 0.0) || !std::isfinite(proposal_std) || !std::isfinite(proposal_mean)) {
    throw InvalidArgument("proposal mean must be finite and std positive");
  }
}

// ---------------------------------------------------------------------------

EimModel::EimModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy)
    : spec_(spec), energy_(std::move(energy)) {
  spec_.validate();
  if (!energy_) energy_ = make_energy_net(spec_.dim);
  if (energy_->dim() != spec_.dim) throw InvalidArgument("energy dimension differs from model");
}

void EimModel::add_proposal_params() {
  const DiagGaussian g = DiagGaussian::standard(spec_.dim, spec_.proposal_std, spec_.proposal_mean);
  params_.add("proposal/mean", g.mean, spec_.train_proposal);
  params_.add("proposal/log_std", g.log_std, spec_.train_proposal);
}

DiagGaussian EimModel::proposal() const {
  return {params_.at("proposal/mean").value, params_.at("proposal/log_std").value};
}

std::pair<Var, Var> EimModel::proposal_nodes(Params& p) const {
  return {p("proposal/mean"), p("proposal/log_std")};
}

SamplerParts EimModel::sampler_parts() const {
  SamplerParts parts;
  parts.dim = spec_.dim;
  const DiagGaussian prop = proposal();
  parts.propose = [prop](std::size_t n, Rng& rng) { return prop.sample(n, rng); };
  parts.log_proposal = [prop](const Matrix& x) { return prop.log_prob(x); };
  parts.energy = [this](const Matrix& x) { return energy_->energy(params_, x); };
  return parts;
}

Vector EimModel::elbo_values(const Matrix& data, Rng& rng) {
  Graph g;
  return elbo(g, data, rng).value().mat().col(0);
}

// ---------------------------------------------------------------------------

TrsModel::TrsModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy, Rng& init_rng)
    : EimModel(spec, std::move(energy)) {
  add_proposal_params();
  energy_->init(params_, init_rng);
  params_.add("trs/zhat_logit", Tensor::matrix(1, 1));
}

TrsModel::TrsModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy, ParamStore params)
    : EimModel(spec, std::move(energy)) {
  params_ = std::move(params);
  require_params(params_, {"proposal/mean", "proposal/log_std", "trs/zhat_logit"});
}

Var TrsModel::elbo(Graph& g, const Matrix& data, Rng& rng) {
  const int T = spec_.t;
  const auto B = std::size_t(data.rows());
  const auto M = std::size_t(spec_.trs_inner_samples);
  Params p(g, params_);
  auto [mean, log_std] = proposal_nodes(p);

  Var x = g.constant(Tensor::from_matrix(data));
  Var log_pi = gaussian_log_prob(x, mean, log_std);
  Var log_accept = log_sigmoid(-energy_->energy(p, x));        // log s(x), [B,1]
  Var log_reject_z = log_sigmoid(-p("trs/zhat_logit"));        // log(1 - Zhat)
  Var steps = g.constant(arange_row(T));                       // i - 1
  Var mask = g.constant(accept_mask_row(T));                   // [i < T]

  Var accept_term = log_accept * mask;                         // [B,T]
  Var logits = steps * log_reject_z + accept_term;
  Var log_q = logits - logsumexp_rows(logits);

  // Inner expectation of sum_{t<i} log(1 - s(x_t)) = (i-1) E_pi[log(1 - s)].
  const Matrix eps = standard_normal(B * M, spec_.dim, rng);
  Var rejected = gaussian_reparam(mean, log_std, eps);
  Var log_reject = log_sigmoid(energy_->energy(p, rejected));   // log(1 - s(x_t))
  Var mean_reject = sum_rows(reshape(log_reject, B, M)) * (1.0 / double(M));

  Var integrand = log_pi + accept_term + mean_reject * steps - log_q;
  return sum_rows(exp(log_q) * integrand);
}

Matrix TrsModel::sample(std::size_t n, Rng& rng) const {
  return trs_sample(sampler_parts(), spec_.t, n, rng);
}

Vector TrsModel::log_weights(const Matrix& x, std::size_t n, Rng& rng) const {
  return trs_log_weights(sampler_parts(), spec_.t, zhat_logit(), x, n, rng);
}

// ---------------------------------------------------------------------------

SnisModel::SnisModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy, Rng& init_rng)
    : EimModel(spec, std::move(energy)) {
  add_proposal_params();
  energy_->init(params_, init_rng);
}

SnisModel::SnisModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy, ParamStore params)
    : EimModel(spec, std::move(energy)) {
  params_ = std::move(params);
  require_params(params_, {"proposal/mean", "proposal/log_std"});
}

Var SnisModel::elbo(Graph& g, const Matrix& data, Rng& rng) {
  const auto B = std::size_t(data.rows());
  const auto others = std::size_t(spec_.k - 1);
  Params p(g, params_);
  auto [mean, log_std] = proposal_nodes(p);

  Var x = g.constant(Tensor::from_matrix(data));
  Var log_pi = gaussian_log_prob(x, mean, log_std);
  Var neg_ux = -energy_->energy(p, x);
  Var logits = neg_ux;
  if (others > 0) {
    const Matrix eps = standard_normal(B * others, spec_.dim, rng);
    Var candidates = gaussian_reparam(mean, log_std, eps);
    Var neg_u = -energy_->energy(p, candidates);
    logits = concat_cols(reshape(neg_u, B, others), neg_ux);
  }
  // Grouped so that U = 0 reproduces log pi(x) exactly.
  return log_pi + ((neg_ux + std::log(double(spec_.k))) - logsumexp_rows(logits));
}

Matrix SnisModel::sample(std::size_t n, Rng& rng) const {
  return snis_sample(sampler_parts(), spec_.k, n, rng);
}

Vector SnisModel::log_weights(const Matrix& x, std::size_t n, Rng& rng) const {
  return snis_log_weights(sampler_parts(), spec_.k, x, n, rng);
}

// ---------------------------------------------------------------------------

HisModel::HisModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy, Rng& init_rng)
    : EimModel(spec, std::move(energy)),
      qnet_("qnet", {spec_.dim, 20, 20, 2 * spec_.dim}) {
  add_proposal_params();
  energy_->init(params_, init_rng);
  init_his_params(init_rng);
}

HisModel::HisModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy, ParamStore params)
    : EimModel(spec, std::move(energy)),
      qnet_("qnet", {spec_.dim, 20, 20, 2 * spec_.dim}) {
  params_ = std::move(params);
  require_params(params_, {"proposal/mean", "proposal/log_std", "his/log_eps", "his/temp_raw"});
  if (params_.at("his/temp_raw").value.size() != std::size_t(spec_.t + 1)) {
    throw InvalidArgument("his/temp_raw length does not match T + 1");
  }
}

void HisModel::init_his_params(Rng& rng) {
  params_.add("his/log_eps", Tensor::matrix(1, spec_.dim, std::log(0.1)));
  params_.add("his/temp_raw", Tensor::matrix(1, std::size_t(spec_.t + 1)));
  qnet_.init(params_, rng, true);
}

Vector HisModel::temperatures() const {
  const Tensor& a = params_.at("his/temp_raw").value;
  const double m = a.mat().mean();
  Vector alpha{Eigen::Index(a.size())};
  for (std::size_t i = 0; i < a.size(); ++i) alpha[Eigen::Index(i)] = std::exp(a[i] - m);
  return alpha;
}

Vector HisModel::step_sizes() const {
  const Tensor& le = params_.at("his/log_eps").value;
  Vector eps{Eigen::Index(le.size())};
  for (std::size_t i = 0; i < le.size(); ++i) eps[Eigen::Index(i)] = std::exp(le[i]);
  return eps;
}

namespace {

struct HisNodes {
  Var half_eps;
  Var eps;
  Var alpha;
};

HisNodes his_nodes(Params& p) {
  Var eps = exp(p("his/log_eps"));
  Var a = p("his/temp_raw");
  Var alpha = exp(a - mean(a));
  return {0.5 * eps, eps, alpha};
}

template <class F>
auto at_step(int step, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError("HIS step " + std::to_string(step) + ": " + e.what());
  }
}

void check_step(int step, const Matrix& x, const Matrix& rho) {
  if (!x.allFinite() || !rho.allFinite()) {
    throw NumericError("HIS step " + std::to_string(step) + ": non-finite position or momentum");
  }
}

}  // namespace

std::pair<Var, Var> HisModel::forward(Params& p, Var x0, Var rho0_raw) const {
  const int T = spec_.t;
  const HisNodes h = his_nodes(p);
  Var x = x0;
  Var rho = rho0_raw * slice_cols(h.alpha, 0, 1);
  Var grad = at_step(0, [&] { return input_gradient(energy_->energy(p, x), x); });
  for (int t = 1; t <= T; ++t) {
    at_step(t, [&] {
      rho = rho - h.half_eps * grad;
      x = x + h.eps * rho;
      grad = input_gradient(energy_->energy(p, x), x);
      rho = slice_cols(h.alpha, std::size_t(t), 1) * (rho - h.half_eps * grad);
      return 0;
    });
  }
  return {x, rho};
}

std::pair<Var, Var> HisModel::inverse(Params& p, Var x_t, Var rho_t) const {
  const int T = spec_.t;
  const HisNodes h = his_nodes(p);
  Var x = x_t;
  Var rho = rho_t;
  Var grad = at_step(T, [&] { return input_gradient(energy_->energy(p, x), x); });
  for (int t = T; t >= 1; --t) {
    at_step(t, [&] {
      rho = rho / slice_cols(h.alpha, std::size_t(t), 1) + h.half_eps * grad;
      x = x - h.eps * rho;
      grad = input_gradient(energy_->energy(p, x), x);
      rho = rho + h.half_eps * grad;
      return 0;
    });
  }
  rho = at_step(0, [&] { return rho / slice_cols(h.alpha, 0, 1); });
  return {x, rho};
}

std::pair<Matrix, Matrix> HisModel::forward(const Matrix& x0, const Matrix& rho0_raw) const {
  const Vector alpha = temperatures();
  const Eigen::RowVectorXd eps = step_sizes().transpose();
  const Eigen::RowVectorXd half = 0.5 * eps;
  Matrix x = x0;
  Matrix rho = rho0_raw * alpha[0];
  Matrix grad = at_step(0, [&] { return energy_->input_gradient(params_, x); });
  for (int t = 1; t <= spec_.t; ++t) {
    rho -= (grad.array().rowwise() * half.array()).matrix();
    x += (rho.array().rowwise() * eps.array()).matrix();
    check_step(t, x, rho);
    grad = at_step(t, [&] { return energy_->input_gradient(params_, x); });
    rho = alpha[t] * (rho.array() - grad.array().rowwise() * half.array()).matrix();
    check_step(t, x, rho);
  }
  return {std::move(x), std::move(rho)};
}

std::pair<Matrix, Matrix> HisModel::inverse(const Matrix& x_t, const Matrix& rho_t) const {
  const Vector alpha = temperatures();
  const Eigen::RowVectorXd eps = step_sizes().transpose();
  const Eigen::RowVectorXd half = 0.5 * eps;
  Matrix x = x_t;
  Matrix rho = rho_t;
  Matrix grad = at_step(spec_.t, [&] { return energy_->input_gradient(params_, x); });
  for (int t = spec_.t; t >= 1; --t) {
    rho = ((rho / alpha[t]).array() + grad.array().rowwise() * half.array()).matrix();
    x -= (rho.array().rowwise() * eps.array()).matrix();
    check_step(t, x, rho);
    grad = at_step(t, [&] { return energy_->input_gradient(params_, x); });
    rho += (grad.array().rowwise() * half.array()).matrix();
    check_step(t, x, rho);
  }
  rho /= alpha[0];
  return {std::move(x), std::move(rho)};
}

std::pair<Matrix, Matrix> HisModel::q_params(const Matrix& x_t) const {
  const Matrix out = qnet_.forward(params_, x_t);
  const auto d = Eigen::Index(spec_.dim);
  return {out.leftCols(d), out.rightCols(d)};
}

Var HisModel::elbo(Graph& g, const Matrix& data, Rng& rng) {
  const auto B = std::size_t(data.rows());
  const std::size_t d = spec_.dim;
  Params p(g, params_);
  auto [mean, log_std] = proposal_nodes(p);

  Var x_t = g.constant(Tensor::from_matrix(data));
  Var q = qnet_.forward(p, x_t);
  Var q_mean = slice_cols(q, 0, d);
  Var q_log_std = slice_cols(q, d, d);
  Var rho_t = gaussian_reparam(q_mean, q_log_std, standard_normal(B, d, rng));
  Var log_q = gaussian_log_prob(rho_t, q_mean, q_log_std);

  auto [x0, rho0] = inverse(p, x_t, rho_t);
  Var zero = g.constant(Tensor::matrix(1, d));
  return gaussian_log_prob(x0, mean, log_std) + gaussian_log_prob(rho0, zero, zero) - log_q;
}

Matrix HisModel::sample(std::size_t n, Rng& rng) const {
  const Matrix x0 = proposal().sample(n, rng);
  const Matrix rho0 = standard_normal(n, spec_.dim, rng);
  return forward(x0, rho0).first;
}

Vector HisModel::log_weights(const Matrix& x, std::size_t n, Rng& rng) const {
  if (x.rows() != 1 || std::size_t(x.cols()) != spec_.dim) {
    throw InvalidArgument("log_weights expects a single point");
  }
  const Matrix x_t = repeat_row(x, n);
  auto [q_mean, q_log_std] = q_params(x_t);
  const Matrix eps = standard_normal(n, spec_.dim, rng);
  const Matrix rho_t = (q_mean.array() + q_log_std.array().exp() * eps.array()).matrix();
  const DiagGaussian unit = DiagGaussian::standard(spec_.dim);

  Vector log_q{Eigen::Index(n)};
  const double norm = 0.5 * double(spec_.dim) * std::log(2.0 * std::numbers::pi);
  for (Eigen::Index i = 0; i < Eigen::Index(n); ++i) {
    log_q[i] = -0.5 * eps.row(i).squaredNorm() - q_log_std.row(i).sum() - norm;
  }
  auto [x0, rho0] = inverse(x_t, rho_t);
  return proposal().log_prob(x0) + unit.log_prob(rho0) - log_q;
}

// ---------------------------------------------------------------------------

std::unique_ptr<EimModel> make_model(const ModelSpec& spec, Rng& init_rng,
                                     std::shared_ptr<const EnergyFunction> energy) {
  switch (spec.kind) {
    case ModelKind::kTrs: return std::make_unique<TrsModel>(spec, std::move(energy), init_rng);
    case ModelKind::kSnis: return std::make_unique<SnisModel>(spec, std::move(energy), init_rng);
    case ModelKind::kHis: return std::make_unique<HisModel>(spec, std::move(energy), init_rng);
  }
  throw InvalidArgument("unknown model kind");
}

std::unique_ptr<EimModel> make_model(const ModelSpec& spec, ParamStore params,
                                     std::shared_ptr<const EnergyFunction> energy) {
  switch (spec.kind) {
    case ModelKind::kTrs: return std::make_unique<TrsModel>(spec, std::move(energy), std::move(params));
    case ModelKind::kSnis: return std::make_unique<SnisModel>(spec, std::move(energy), std::move(params));
    case ModelKind::kHis: return std::make_unique<HisModel>(spec, std::move(energy), std::move(params));
  }
  throw InvalidArgument("unknown model kind");
}

LogMeanExp iwae_eval(const EimModel& model, const Matrix& x, std::size_t n, Rng& rng) {
  if (n == 0) throw InvalidArgument("iwae_eval needs n >= 1");
  return log_mean_exp(model.log_weights(x, n, rng));
}

}  // namespace eim
