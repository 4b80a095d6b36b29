#include "eim/param_store.hpp"

#include "eim/error.hpp"

#include <cmath>

namespace eim {

ParamStore::Entry& ParamStore::add(std::string name, Tensor value, bool trainable) {
  if (contains(name)) throw InvalidArgument("duplicate parameter '" + name + "'");
  Tensor grad(value.shape());
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(value), std::move(grad), trainable});
  return entries_.back();
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& e : entries_) {
    if (!e.trainable) continue;
    for (double g : e.grad.data()) s += g * g;
  }
  return std::sqrt(s);
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.trainable) n += e.value.size();
  }
  return n;
}

}  // namespace eim
