#include "eim/energy.hpp"

#include "eim/error.hpp"

#include <cmath>

namespace eim {

Var Params::operator()(const std::string& name) {
  const auto& entry = view_->at(name);
  if (store_ && entry.trainable) return graph_.param(*store_, name);
  auto it = constants_.find(name);
  if (it == constants_.end()) it = constants_.emplace(name, graph_.constant(entry.value)).first;
  return it->second;
}

Mlp::Mlp(std::string prefix, std::vector<std::size_t> widths)
    : prefix_(std::move(prefix)), widths_(std::move(widths)) {
  if (widths_.size() < 2) throw InvalidArgument("Mlp needs at least input and output widths");
  for (std::size_t l = 1; l < widths_.size(); ++l) {
    weight_names_.push_back(prefix_ + "/w" + std::to_string(l));
    bias_names_.push_back(prefix_ + "/b" + std::to_string(l));
  }
}

void Mlp::init(ParamStore& store, Rng& rng, bool zero_last_layer) const {
  const std::size_t layers = widths_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    Tensor w = Tensor::matrix(out, in);
    if (!(zero_last_layer && l + 1 == layers)) {
      const double bound = 1.0 / std::sqrt(double(in));
      for (double& v : w.data()) v = bound * (2.0 * rng.uniform() - 1.0);
    }
    store.add(weight(l), std::move(w));
    store.add(bias(l), Tensor::matrix(1, out));
  }
}

Var Mlp::forward(Params& p, Var x) const {
  const std::size_t layers = widths_.size() - 1;
  Var h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    h = matmul(h, p(weight(l)), false, true) + p(bias(l));
    if (l + 1 < layers) h = tanh(h);
  }
  return h;
}

Matrix Mlp::forward(const ParamStore& store, const Matrix& x) const {
  const std::size_t layers = widths_.size() - 1;
  Matrix h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto w = store.at(weight(l)).value.mat();
    const auto b = store.at(bias(l)).value.mat();
    Matrix next = h * w.transpose();
    next.rowwise() += b.row(0);
    if (l + 1 < layers) next = next.array().tanh().matrix();
    h = std::move(next);
  }
  return h;
}

Matrix Mlp::input_gradient(const ParamStore& store, const Matrix& x) const {
  const std::size_t layers = widths_.size() - 1;
  std::vector<Matrix> acts;  // tanh outputs of the hidden layers
  Matrix h = x;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    const auto w = store.at(weight(l)).value.mat();
    const auto b = store.at(bias(l)).value.mat();
    Matrix next = h * w.transpose();
    next.rowwise() += b.row(0);
    h = next.array().tanh().matrix();
    acts.push_back(h);
  }
  const auto w_last = store.at(weight(layers - 1)).value.mat();
  Matrix g = Matrix::Zero(x.rows(), Eigen::Index(widths_[layers - 1]));
  g.rowwise() = w_last.row(0);
  for (std::size_t l = layers - 1; l-- > 0;) {
    g = (g.array() * (1.0 - acts[l].array().square())).matrix();
    g = g * store.at(weight(l)).value.mat();
  }
  return g;
}

Vector EnergyFunction::energy(const ParamStore& store, const Matrix& x) const {
  Graph g;
  Params p(g, store);
  Var u = energy(p, g.constant(Tensor::from_matrix(x)));
  return u.value().mat().col(0);
}

Matrix EnergyFunction::input_gradient(const ParamStore& store, const Matrix& x) const {
  Graph g;
  Params p(g, store);
  Var xv = g.input(Tensor::from_matrix(x));
  g.backward(sum(energy(p, xv)));
  return g.adjoint(xv).mat();
}

EnergyNet::EnergyNet(std::size_t dim, std::size_t hidden)
    : net_("energy", {dim, hidden, hidden, 1}) {}

void EnergyNet::init(ParamStore& store, Rng& rng) const { net_.init(store, rng, true); }

Var EnergyNet::energy(Params& p, Var x) const { return net_.forward(p, x); }

Vector EnergyNet::energy(const ParamStore& store, const Matrix& x) const {
  return net_.forward(store, x).col(0);
}

Matrix EnergyNet::input_gradient(const ParamStore& store, const Matrix& x) const {
  return net_.input_gradient(store, x);
}

std::shared_ptr<const EnergyFunction> make_energy_net(std::size_t dim) {
  return std::make_shared<EnergyNet>(dim);
}

}  // namespace eim
