#pragma once

// Hand-built energies, finite-support toys and random model instances shared
// by the model tests and the acceptance suite.

#include "eim/models.hpp"
#include "test_util.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <string>

namespace eim::testing {

/// U(x) = c.
class ConstantEnergy final : public EnergyFunction {
 public:
  ConstantEnergy(std::size_t dim, double c) : dim_(dim), c_(c) {}
  std::size_t dim() const override { return dim_; }
  void init(ParamStore&, Rng&) const override {}
  Var energy(Params& p, Var x) const override {
    return p.graph().constant(Tensor::matrix(x.rows(), 1, c_));
  }
  using EnergyFunction::energy;

 private:
  std::size_t dim_;
  double c_;
};

/// U(x) = 0.5 |x|^2.
class QuadraticEnergy final : public EnergyFunction {
 public:
  explicit QuadraticEnergy(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  void init(ParamStore&, Rng&) const override {}
  Var energy(Params&, Var x) const override { return 0.5 * sum_rows(square(x)); }
  using EnergyFunction::energy;

 private:
  std::size_t dim_;
};

inline double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

/// Replaces every parameter with a random value of a sensible scale for its
/// role, so no network output is identically zero.
inline void randomize(ParamStore& store, Rng& rng) {
  for (auto& e : store) {
    for (double& v : e.value.data()) {
      if (e.name == "his/log_eps") {
        v = std::log(0.1) + uniform_in(rng, -0.5, 0.5);
      } else if (e.name == "his/temp_raw" || e.name.rfind("proposal/", 0) == 0) {
        v = uniform_in(rng, -0.3, 0.3);
      } else {
        v = uniform_in(rng, -1.0, 1.0);
      }
    }
  }
}

/// Two-point support {A, B} encoded as 0 and 1 in one column, uniform
/// proposal, energies looked up per point.
inline SamplerParts two_point_parts(std::array<double, 2> energies) {
  SamplerParts parts;
  parts.dim = 1;
  parts.propose = [](std::size_t n, Rng& rng) {
    Matrix m(n, 1);
    for (std::size_t i = 0; i < n; ++i) m(Eigen::Index(i), 0) = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return m;
  };
  parts.log_proposal = [](const Matrix& x) {
    return Vector::Constant(x.rows(), std::log(0.5));
  };
  parts.energy = [energies](const Matrix& x) {
    Vector u{x.rows()};
    for (Eigen::Index i = 0; i < x.rows(); ++i) u[i] = energies[x(i, 0) < 0.5 ? 0 : 1];
    return u;
  };
  return parts;
}

inline Matrix point(double v) { return Matrix::Constant(1, 1, v); }

/// Small model of the given kind with every parameter (proposal included)
/// trainable and randomized.
inline std::unique_ptr<EimModel> random_model(ModelKind kind, Rng& rng) {
  ModelSpec spec;
  spec.kind = kind;
  spec.k = 4;
  spec.t = kind == ModelKind::kHis ? 3 : 4;
  spec.trs_inner_samples = 3;
  spec.train_proposal = true;
  auto model = make_model(spec, rng);
  randomize(model->params(), rng);
  return model;
}

/// Max relative error between tape and four-point central-difference
/// gradients (h = 1e-3) of the summed ELBO over all parameters, for one random
/// instance with the noise stream held fixed.
inline double elbo_gradient_error(ModelKind kind, std::uint64_t seed) {
  Rng rng(seed, 100);
  auto model = random_model(kind, rng);
  const Tensor data = random_tensor(2, 2, rng);
  const Matrix x = data.mat();
  const Rng noise = rng.split(1);
  return max_grad_error(model->params(), [&](Graph& g) {
    Rng r = noise;
    return sum(model->elbo(g, x, r));
  }, 1e-3, 1e-6, Stencil::kFourPoint);
}

}  // namespace eim::testing
