#pragma once

#include "eim/graph.hpp"
#include "eim/param_store.hpp"
#include "eim/rng.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace eim {

/// Parameter lookup for one graph. In bound mode trainable entries become
/// param leaves (gradients flow back into the store); frozen entries, and
/// every entry of a read-only store, become constants.
class Params {
 public:
  Params(Graph& graph, ParamStore& store) : graph_(graph), store_(&store), view_(&store) {}
  Params(Graph& graph, const ParamStore& store) : graph_(graph), view_(&store) {}

  Var operator()(const std::string& name);
  Graph& graph() { return graph_; }
  const ParamStore& store() const { return *view_; }

 private:
  Graph& graph_;
  ParamStore* store_ = nullptr;
  const ParamStore* view_;
  std::map<std::string, Var> constants_;
};

/// Fully connected tanh network with a linear output layer. Weights are
/// stored as [out, in] and biases as [1, out] under "<prefix>/w<l>" and
/// "<prefix>/b<l>".
class Mlp {
 public:
  Mlp(std::string prefix, std::vector<std::size_t> widths);

  /// Fan-in scaled uniform weights, zero biases; last layer zeroed if asked.
  void init(ParamStore& store, Rng& rng, bool zero_last_layer) const;
  Var forward(Params& p, Var x) const;
  Matrix forward(const ParamStore& store, const Matrix& x) const;
  /// Gradient of output column 0 with respect to each input row.
  Matrix input_gradient(const ParamStore& store, const Matrix& x) const;

  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  const std::string& prefix() const { return prefix_; }

 private:
  const std::string& weight(std::size_t layer) const { return weight_names_[layer]; }
  const std::string& bias(std::size_t layer) const { return bias_names_[layer]; }

  std::string prefix_;
  std::vector<std::string> weight_names_;
  std::vector<std::string> bias_names_;
  std::vector<std::size_t> widths_;
};

/// Scalar energy U(x) evaluated row-wise.
class EnergyFunction {
 public:
  virtual ~EnergyFunction() = default;

  virtual std::size_t dim() const = 0;
  /// Adds this energy's parameters to the store.
  virtual void init(ParamStore& store, Rng& rng) const = 0;
  /// [N,1] energies of the rows of x.
  virtual Var energy(Params& p, Var x) const = 0;

  // Plain numeric evaluation. The defaults go through a throwaway graph.
  virtual Vector energy(const ParamStore& store, const Matrix& x) const;
  virtual Matrix input_gradient(const ParamStore& store, const Matrix& x) const;
};

/// d -> 20 -> 20 -> 1 tanh network, output layer zero-initialized so U = 0
/// before training.
class EnergyNet final : public EnergyFunction {
 public:
  explicit EnergyNet(std::size_t dim, std::size_t hidden = 20);

  std::size_t dim() const override { return net_.in_dim(); }
  void init(ParamStore& store, Rng& rng) const override;
  Var energy(Params& p, Var x) const override;
  Vector energy(const ParamStore& store, const Matrix& x) const override;
  Matrix input_gradient(const ParamStore& store, const Matrix& x) const override;

 private:
  Mlp net_;
};

std::shared_ptr<const EnergyFunction> make_energy_net(std::size_t dim);

}  // namespace eim
