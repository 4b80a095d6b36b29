#pragma once

#include "eim/distributions.hpp"
#include "eim/energy.hpp"
#include "eim/graph.hpp"
#include "eim/param_store.hpp"
#include "eim/samplers.hpp"
#include "eim/targets.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <utility>

namespace eim {

enum class ModelKind { kTrs, kSnis, kHis };

ModelKind parse_model_kind(std::string_view name);
std::string_view model_name(ModelKind kind);

/// Structural hyperparameters of an energy-inspired model.
struct ModelSpec {
  ModelKind kind = ModelKind::kSnis;
  std::size_t dim = 2;
  int k = 1024;                 // SNIS candidates
  int t = 5;                    // TRS truncation / HIS leapfrog steps
  int trs_inner_samples = 32;   // Monte Carlo draws for the rejected-sample term
  double proposal_mean = 0.0;
  double proposal_std = 1.0;
  bool train_proposal = false;

  void validate() const;
};

/// Common interface of the TRS, SNIS and HIS models. All learnable state,
/// including the proposal, lives in params().
class EimModel {
 public:
  virtual ~EimModel() = default;

  const ModelSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const EnergyFunction& energy() const { return *energy_; }

  /// Per-row lower bound on log p(x) for the rows of `data`, as an [B,1]
  /// node. Trainable parameters are bound to the graph.
  virtual Var elbo(Graph& g, const Matrix& data, Rng& rng) = 0;
  /// Same bound evaluated without gradients.
  Vector elbo_values(const Matrix& data, Rng& rng);
  /// Exact draws from the model.
  virtual Matrix sample(std::size_t n, Rng& rng) const = 0;
  /// n independent realizations of the log importance ratio whose
  /// expectation is the single-sample bound at x (a 1 x d row).
  virtual Vector log_weights(const Matrix& x, std::size_t n, Rng& rng) const = 0;

  DiagGaussian proposal() const;
  /// Proposal and energy as plain callables over the current parameters.
  SamplerParts sampler_parts() const;

 protected:
  EimModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy);
  void add_proposal_params();
  /// Proposal mean and log-std nodes (constants unless trainable).
  std::pair<Var, Var> proposal_nodes(Params& p) const;

  ModelSpec spec_;
  std::shared_ptr<const EnergyFunction> energy_;
  ParamStore params_;
};

class TrsModel final : public EimModel {
 public:
  TrsModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy, Rng& init_rng);
  TrsModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy, ParamStore params);

  /// Exact sum over i = 1..T of q(i|x) times the bound integrand, with the
  /// rejected-draw expectation estimated from spec().trs_inner_samples draws.
  Var elbo(Graph& g, const Matrix& data, Rng& rng) override;
  Matrix sample(std::size_t n, Rng& rng) const override;
  Vector log_weights(const Matrix& x, std::size_t n, Rng& rng) const override;

  double zhat_logit() const { return params_.at("trs/zhat_logit").value[0]; }
};

class SnisModel final : public EimModel {
 public:
  SnisModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy, Rng& init_rng);
  SnisModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy, ParamStore params);

  Var elbo(Graph& g, const Matrix& data, Rng& rng) override;
  Matrix sample(std::size_t n, Rng& rng) const override;
  Vector log_weights(const Matrix& x, std::size_t n, Rng& rng) const override;
};

/// Hamiltonian importance sampling with tempered leapfrog dynamics.
///
/// Parameters: "his/log_eps" [1,d] (step size exp(log_eps)), "his/temp_raw"
/// [1,T+1] (alpha_t = exp(a_t - mean(a)), so the product of the alphas is 1)
/// and the "qnet" network mapping x_T to the mean and log-std of q(rho_T|x_T).
class HisModel final : public EimModel {
 public:
  HisModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy, Rng& init_rng);
  HisModel(ModelSpec spec, std::shared_ptr<const EnergyFunction> energy, ParamStore params);

  Var elbo(Graph& g, const Matrix& data, Rng& rng) override;
  Matrix sample(std::size_t n, Rng& rng) const override;
  Vector log_weights(const Matrix& x, std::size_t n, Rng& rng) const override;

  /// (x0, rho0_raw) -> (x_T, rho_T).
  std::pair<Var, Var> forward(Params& p, Var x0, Var rho0_raw) const;
  /// (x_T, rho_T) -> (x0, rho0_raw), the exact algebraic inverse of forward.
  std::pair<Var, Var> inverse(Params& p, Var x_t, Var rho_t) const;
  std::pair<Matrix, Matrix> forward(const Matrix& x0, const Matrix& rho0_raw) const;
  std::pair<Matrix, Matrix> inverse(const Matrix& x_t, const Matrix& rho_t) const;

  /// alpha_0..alpha_T.
  Vector temperatures() const;
  Vector step_sizes() const;

 private:
  void init_his_params(Rng& rng);
  /// Mean and log-std of q(rho_T | x_T), each [B,d].
  std::pair<Matrix, Matrix> q_params(const Matrix& x_t) const;

  Mlp qnet_;
};

std::unique_ptr<EimModel> make_model(const ModelSpec& spec, Rng& init_rng,
                                     std::shared_ptr<const EnergyFunction> energy = nullptr);
std::unique_ptr<EimModel> make_model(const ModelSpec& spec, ParamStore params,
                                     std::shared_ptr<const EnergyFunction> energy = nullptr);

/// Multi-sample bound log (1/n) sum_i w_i at x from n fresh realizations.
LogMeanExp iwae_eval(const EimModel& model, const Matrix& x, std::size_t n, Rng& rng);

}  // namespace eim
