#include "eim/graph.hpp"

#include "eim/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eim {
namespace {

struct Shape2 {
  std::size_t rows;
  std::size_t cols;
};

Shape2 shape2(const Tensor& t) { return {t.rows(), t.cols()}; }

Tensor as_matrix(Tensor t) {
  if (t.rank() == 2) return t;
  const std::size_t r = t.rows();
  const std::size_t c = t.cols();
  std::vector<double> data(t.data().begin(), t.data().end());
  return Tensor({r, c}, std::move(data));
}

std::size_t broadcast_extent(std::size_t a, std::size_t b, Op op) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw InvalidArgument(std::string("incompatible extents ") + std::to_string(a) + " and " +
                        std::to_string(b) + " in " + op_name(op));
}

template <class F>
Tensor broadcast_apply(const Tensor& a, const Tensor& b, F f, Op op) {
  const Shape2 sa = shape2(a);
  const Shape2 sb = shape2(b);
  const std::size_t r = broadcast_extent(sa.rows, sb.rows, op);
  const std::size_t c = broadcast_extent(sa.cols, sb.cols, op);
  Tensor out = Tensor::matrix(r, c);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  if (sa.rows == sb.rows && sa.cols == sb.cols) {
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = f(pa[i], pb[i]);
    return out;
  }
  for (std::size_t i = 0; i < r; ++i) {
    const double* ra = pa + (sa.rows == 1 ? 0 : i * sa.cols);
    const double* rb = pb + (sb.rows == 1 ? 0 : i * sb.cols);
    double* ro = po + i * c;
    const bool bca = sa.cols == 1 && c != 1;
    const bool bcb = sb.cols == 1 && c != 1;
    for (std::size_t j = 0; j < c; ++j) {
      ro[j] = f(bca ? ra[0] : ra[j], bcb ? rb[0] : rb[j]);
    }
  }
  return out;
}

// dst (r,c) += g (R,C) summed over the axes where dst has extent 1.
void accumulate_reduced(Tensor& dst, const Tensor& g) {
  const Shape2 sd = shape2(dst);
  const Shape2 sg = shape2(g);
  double* pd = dst.data().data();
  const double* pg = g.data().data();
  if (sd.rows == sg.rows && sd.cols == sg.cols) {
    for (std::size_t i = 0; i < dst.size(); ++i) pd[i] += pg[i];
    return;
  }
  for (std::size_t i = 0; i < sg.rows; ++i) {
    double* rd = pd + (sd.rows == 1 ? 0 : i * sd.cols);
    const double* rg = pg + i * sg.cols;
    if (sd.cols == 1) {
      double s = 0.0;
      for (std::size_t j = 0; j < sg.cols; ++j) s += rg[j];
      rd[0] += s;
    } else {
      for (std::size_t j = 0; j < sg.cols; ++j) rd[j] += rg[j];
    }
  }
}

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out = Tensor::matrix(a.rows(), a.cols());
  const double* pa = a.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i]);
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_log_sigmoid(double x) {
  return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kTanh: return "tanh";
    case Op::kSquare: return "square";
    case Op::kSigmoid: return "sigmoid";
    case Op::kLogSigmoid: return "log_sigmoid";
    case Op::kScale: return "scale";
    case Op::kAddScalar: return "add_scalar";
    case Op::kMatMul: return "matmul";
    case Op::kSumAll: return "sum";
    case Op::kSumRows: return "sum_rows";
    case Op::kSumCols: return "sum_cols";
    case Op::kBroadcastTo: return "broadcast_to";
    case Op::kLogSumExpRows: return "logsumexp_rows";
    case Op::kReshape: return "reshape";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSliceCols: return "slice_cols";
  }
  return "?";
}

const Tensor& Var::value() const {
  if (!graph) throw InvalidArgument("use of an unbound Var");
  return graph->value(*this);
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("logsumexp of an empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::int32_t Graph::check(Var v) const {
  if (v.graph != this || v.id < 0 || std::size_t(v.id) >= nodes_.size()) {
    throw InvalidArgument("Var does not belong to this graph");
  }
  return v.id;
}

Var Graph::push(Node node) {
  if (check_finite_ && !node.value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op_name(node.op) +
                       " at node #" + std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(node));
  return Var{this, std::int32_t(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.value = as_matrix(std::move(value));
  return push(std::move(n));
}

Var Graph::input(Tensor value) {
  Node n;
  n.op = Op::kInput;
  n.value = as_matrix(std::move(value));
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::param(ParamStore& store, const std::string& name) {
  const std::size_t idx = store.index_of(name);
  const auto key = std::make_pair(static_cast<const ParamStore*>(&store), idx);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) {
    return Var{this, it->second};
  }
  Node n;
  n.op = Op::kParam;
  n.entry = &store[idx];
  n.value = as_matrix(store[idx].value);
  n.requires_grad = true;
  Var v = push(std::move(n));
  param_nodes_.emplace(key, v.id);
  return v;
}

Tensor Graph::adjoint(Var v) const {
  const auto id = check(v);
  if (std::size_t(id) < adjoints_.size() && adjoints_[id].size() != 0) return adjoints_[id];
  return Tensor::matrix(nodes_[id].value.rows(), nodes_[id].value.cols());
}

Var Graph::unary(Op op, Var av, double scalar) {
  const auto a = check(av);
  const Tensor& x = nodes_[a].value;
  Node n;
  n.op = op;
  n.a = a;
  n.scalar = scalar;
  n.requires_grad = nodes_[a].requires_grad;
  switch (op) {
    case Op::kNeg: n.value = map(x, [](double v) { return -v; }); break;
    case Op::kExp: n.value = map(x, [](double v) { return std::exp(v); }); break;
    case Op::kLog: n.value = map(x, [](double v) { return std::log(v); }); break;
    case Op::kTanh: n.value = map(x, [](double v) { return std::tanh(v); }); break;
    case Op::kSquare: n.value = map(x, [](double v) { return v * v; }); break;
    case Op::kSigmoid: n.value = map(x, stable_sigmoid); break;
    case Op::kLogSigmoid: n.value = map(x, stable_log_sigmoid); break;
    case Op::kScale: n.value = map(x, [scalar](double v) { return scalar * v; }); break;
    case Op::kAddScalar: n.value = map(x, [scalar](double v) { return scalar + v; }); break;
    case Op::kSumAll: {
      double s = 0.0;
      for (double v : x.data()) s += v;
      n.value = Tensor::matrix(1, 1, s);
      break;
    }
    case Op::kSumRows: {
      n.value = Tensor::matrix(x.rows(), 1);
      n.value.mat() = x.mat().rowwise().sum();
      break;
    }
    case Op::kSumCols: {
      n.value = Tensor::matrix(1, x.cols());
      n.value.mat() = x.mat().colwise().sum();
      break;
    }
    case Op::kLogSumExpRows: {
      if (x.cols() == 0) throw InvalidArgument("logsumexp of an empty row");
      n.value = Tensor::matrix(x.rows(), 1);
      for (std::size_t i = 0; i < x.rows(); ++i) {
        n.value[i] = logsumexp(x.data().subspan(i * x.cols(), x.cols()));
      }
      break;
    }
    default:
      throw InvalidArgument(std::string("not a unary op: ") + op_name(op));
  }
  return push(std::move(n));
}

Var Graph::binary(Op op, Var av, Var bv) {
  const auto a = check(av);
  const auto b = check(bv);
  const Tensor& x = nodes_[a].value;
  const Tensor& y = nodes_[b].value;
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  switch (op) {
    case Op::kAdd: n.value = broadcast_apply(x, y, std::plus<>{}, op); break;
    case Op::kSub: n.value = broadcast_apply(x, y, std::minus<>{}, op); break;
    case Op::kMul: n.value = broadcast_apply(x, y, std::multiplies<>{}, op); break;
    case Op::kDiv: n.value = broadcast_apply(x, y, std::divides<>{}, op); break;
    default:
      throw InvalidArgument(std::string("not a binary op: ") + op_name(op));
  }
  return push(std::move(n));
}

Var Graph::matmul(Var av, Var bv, bool trans_a, bool trans_b) {
  const auto a = check(av);
  const auto b = check(bv);
  const Tensor& x = nodes_[a].value;
  const Tensor& y = nodes_[b].value;
  const std::size_t inner_a = trans_a ? x.rows() : x.cols();
  const std::size_t inner_b = trans_b ? y.cols() : y.rows();
  if (inner_a != inner_b) {
    throw InvalidArgument("matmul inner extents differ: " + x.shape_string() + " x " +
                          y.shape_string());
  }
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  n.value = Tensor::matrix(trans_a ? x.cols() : x.rows(), trans_b ? y.rows() : y.cols());
  auto out = n.value.mat();
  if (!trans_a && !trans_b) out.noalias() = x.mat() * y.mat();
  if (!trans_a && trans_b) out.noalias() = x.mat() * y.mat().transpose();
  if (trans_a && !trans_b) out.noalias() = x.mat().transpose() * y.mat();
  if (trans_a && trans_b) out.noalias() = x.mat().transpose() * y.mat().transpose();
  return push(std::move(n));
}

Var Graph::broadcast_to(Var av, std::size_t rows, std::size_t cols) {
  const auto a = check(av);
  const Tensor& x = nodes_[a].value;
  if ((x.rows() != rows && x.rows() != 1) || (x.cols() != cols && x.cols() != 1)) {
    throw InvalidArgument("cannot broadcast " + x.shape_string() + " to [" +
                          std::to_string(rows) + "," + std::to_string(cols) + "]");
  }
  Node n;
  n.op = Op::kBroadcastTo;
  n.a = a;
  n.requires_grad = nodes_[a].requires_grad;
  n.value = broadcast_apply(Tensor::matrix(rows, cols), x,
                            [](double, double v) { return v; }, Op::kBroadcastTo);
  return push(std::move(n));
}

Var Graph::reshape(Var av, std::size_t rows, std::size_t cols) {
  const auto a = check(av);
  const Tensor& x = nodes_[a].value;
  if (x.size() != rows * cols) {
    throw InvalidArgument("cannot reshape " + x.shape_string() + " to [" +
                          std::to_string(rows) + "," + std::to_string(cols) + "]");
  }
  Node n;
  n.op = Op::kReshape;
  n.a = a;
  n.requires_grad = nodes_[a].requires_grad;
  n.value = Tensor({rows, cols}, std::vector<double>(x.data().begin(), x.data().end()));
  return push(std::move(n));
}

Var Graph::concat_cols(Var av, Var bv) {
  const auto a = check(av);
  const auto b = check(bv);
  const Tensor& x = nodes_[a].value;
  const Tensor& y = nodes_[b].value;
  if (x.rows() != y.rows()) {
    throw InvalidArgument("concat_cols row mismatch: " + x.shape_string() + " and " +
                          y.shape_string());
  }
  Node n;
  n.op = Op::kConcatCols;
  n.a = a;
  n.b = b;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  n.value = Tensor::matrix(x.rows(), x.cols() + y.cols());
  n.value.mat().leftCols(Eigen::Index(x.cols())) = x.mat();
  n.value.mat().rightCols(Eigen::Index(y.cols())) = y.mat();
  return push(std::move(n));
}

Var Graph::slice_cols(Var av, std::size_t start, std::size_t len) {
  const auto a = check(av);
  const Tensor& x = nodes_[a].value;
  if (start + len > x.cols()) {
    throw InvalidArgument("slice_cols out of range for " + x.shape_string());
  }
  Node n;
  n.op = Op::kSliceCols;
  n.a = a;
  n.i0 = start;
  n.i1 = len;
  n.requires_grad = nodes_[a].requires_grad;
  n.value = Tensor::matrix(x.rows(), len);
  n.value.mat() = x.mat().middleCols(Eigen::Index(start), Eigen::Index(len));
  return push(std::move(n));
}

Tensor& Graph::adjoint_slot(std::int32_t id) {
  Tensor& t = adjoints_[id];
  if (t.size() == 0) t = Tensor::matrix(nodes_[id].value.rows(), nodes_[id].value.cols());
  return t;
}

void Graph::backward(Var loss) {
  const auto root = check(loss);
  if (nodes_[root].value.size() != 1) {
    throw InvalidArgument("backward() needs a single-element loss, got " +
                          nodes_[root].value.shape_string());
  }
  adjoints_.assign(nodes_.size(), Tensor{});
  adjoint_slot(root)[0] = 1.0;
  visits_ = 0;
  for (std::int32_t id = root; id >= 0; --id) {
    if (adjoints_[id].size() == 0 || !nodes_[id].requires_grad) continue;
    ++visits_;
    backprop_node(id);
  }
}

void Graph::backprop_node(std::int32_t id) {
  // Copy the scalar fields: adjoint_slot() never reallocates nodes_, but keep
  // references short-lived anyway.
  const Node& n = nodes_[id];
  const Tensor& gy = adjoints_[id];
  const Tensor& y = n.value;
  const bool need_a = n.a >= 0 && nodes_[n.a].requires_grad;
  const bool need_b = n.b >= 0 && nodes_[n.b].requires_grad;
  auto val = [&](std::int32_t i) -> const Tensor& { return nodes_[i].value; };

  switch (n.op) {
    case Op::kConstant:
    case Op::kInput:
      break;
    case Op::kParam: {
      auto g = n.entry->grad.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      break;
    }
    case Op::kAdd:
      if (need_a) accumulate_reduced(adjoint_slot(n.a), gy);
      if (need_b) accumulate_reduced(adjoint_slot(n.b), gy);
      break;
    case Op::kSub:
      if (need_a) accumulate_reduced(adjoint_slot(n.a), gy);
      if (need_b) accumulate_reduced(adjoint_slot(n.b), map(gy, [](double v) { return -v; }));
      break;
    case Op::kMul:
      if (need_a) {
        accumulate_reduced(adjoint_slot(n.a),
                           broadcast_apply(gy, val(n.b), std::multiplies<>{}, n.op));
      }
      if (need_b) {
        accumulate_reduced(adjoint_slot(n.b),
                           broadcast_apply(gy, val(n.a), std::multiplies<>{}, n.op));
      }
      break;
    case Op::kDiv:
      if (need_a) {
        accumulate_reduced(adjoint_slot(n.a),
                           broadcast_apply(gy, val(n.b), std::divides<>{}, n.op));
      }
      if (need_b) {
        Tensor gyy = broadcast_apply(gy, y, std::multiplies<>{}, n.op);
        accumulate_reduced(adjoint_slot(n.b),
                           broadcast_apply(gyy, val(n.b),
                                           [](double u, double v) { return -u / v; }, n.op));
      }
      break;
    case Op::kNeg:
      if (need_a) accumulate_reduced(adjoint_slot(n.a), map(gy, [](double v) { return -v; }));
      break;
    case Op::kExp:
      if (need_a) accumulate_reduced(adjoint_slot(n.a), broadcast_apply(gy, y, std::multiplies<>{}, n.op));
      break;
    case Op::kLog:
      if (need_a) accumulate_reduced(adjoint_slot(n.a), broadcast_apply(gy, val(n.a), std::divides<>{}, n.op));
      break;
    case Op::kTanh:
      if (need_a) {
        accumulate_reduced(adjoint_slot(n.a),
                           broadcast_apply(gy, y, [](double g, double t) { return g * (1.0 - t * t); }, n.op));
      }
      break;
    case Op::kSquare:
      if (need_a) {
        accumulate_reduced(adjoint_slot(n.a),
                           broadcast_apply(gy, val(n.a), [](double g, double x) { return 2.0 * g * x; }, n.op));
      }
      break;
    case Op::kSigmoid:
      if (need_a) {
        accumulate_reduced(adjoint_slot(n.a),
                           broadcast_apply(gy, y, [](double g, double s) { return g * s * (1.0 - s); }, n.op));
      }
      break;
    case Op::kLogSigmoid:
      if (need_a) {
        accumulate_reduced(adjoint_slot(n.a),
                           broadcast_apply(gy, val(n.a), [](double g, double x) { return g * stable_sigmoid(-x); }, n.op));
      }
      break;
    case Op::kScale: {
      const double c = n.scalar;
      if (need_a) accumulate_reduced(adjoint_slot(n.a), map(gy, [c](double v) { return c * v; }));
      break;
    }
    case Op::kAddScalar:
      if (need_a) accumulate_reduced(adjoint_slot(n.a), gy);
      break;
    case Op::kMatMul: {
      const auto ga = gy.mat();
      const auto A = val(n.a).mat();
      const auto B = val(n.b).mat();
      if (need_a) {
        auto da = adjoint_slot(n.a).mat();
        if (!n.trans_a && !n.trans_b) da.noalias() += ga * B.transpose();
        if (!n.trans_a && n.trans_b) da.noalias() += ga * B;
        if (n.trans_a && !n.trans_b) da.noalias() += B * ga.transpose();
        if (n.trans_a && n.trans_b) da.noalias() += B.transpose() * ga.transpose();
      }
      if (need_b) {
        auto db = adjoint_slot(n.b).mat();
        if (!n.trans_a && !n.trans_b) db.noalias() += A.transpose() * ga;
        if (!n.trans_a && n.trans_b) db.noalias() += ga.transpose() * A;
        if (n.trans_a && !n.trans_b) db.noalias() += A * ga;
        if (n.trans_a && n.trans_b) db.noalias() += ga.transpose() * A.transpose();
      }
      break;
    }
    case Op::kSumAll:
    case Op::kSumRows:
    case Op::kSumCols:
      if (need_a) {
        Tensor& da = adjoint_slot(n.a);
        da = broadcast_apply(da, gy, std::plus<>{}, n.op);
      }
      break;
    case Op::kBroadcastTo:
      if (need_a) accumulate_reduced(adjoint_slot(n.a), gy);
      break;
    case Op::kLogSumExpRows:
      if (need_a) {
        const Tensor& x = val(n.a);
        Tensor& da = adjoint_slot(n.a);
        const std::size_t c = x.cols();
        for (std::size_t i = 0; i < x.rows(); ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            da[i * c + j] += gy[i] * std::exp(x[i * c + j] - y[i]);
          }
        }
      }
      break;
    case Op::kReshape:
      if (need_a) {
        Tensor& da = adjoint_slot(n.a);
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += gy[i];
      }
      break;
    case Op::kConcatCols: {
      const auto ac = Eigen::Index(val(n.a).cols());
      const auto bc = Eigen::Index(val(n.b).cols());
      if (need_a) adjoint_slot(n.a).mat() += gy.mat().leftCols(ac);
      if (need_b) adjoint_slot(n.b).mat() += gy.mat().rightCols(bc);
      break;
    }
    case Op::kSliceCols:
      if (need_a) {
        adjoint_slot(n.a).mat().middleCols(Eigen::Index(n.i0), Eigen::Index(n.i1)) += gy.mat();
      }
      break;
  }
}

// ---------------------------------------------------------------------------
// Graph-building reverse pass, used for input gradients that must themselves
// be differentiable.

Var Graph::reduce_to(Var g, std::size_t rows, std::size_t cols) {
  if (g.rows() != rows) {
    if (rows != 1) throw InvalidArgument("reduce_to: bad row extent");
    g = unary(Op::kSumCols, g);
  }
  if (g.cols() != cols) {
    if (cols != 1) throw InvalidArgument("reduce_to: bad col extent");
    g = unary(Op::kSumRows, g);
  }
  return g;
}

Var Graph::pad_cols(Var g, std::size_t left, std::size_t total) {
  const std::size_t rows = g.rows();
  const std::size_t right = total - left - g.cols();
  if (left > 0) g = concat_cols(constant(Tensor::matrix(rows, left)), g);
  if (right > 0) g = concat_cols(g, constant(Tensor::matrix(rows, right)));
  return g;
}

Var Graph::symbolic_vjp(std::int32_t id, int slot, Var gy) {
  const Node n = [&] {
    Node copy;
    const Node& src = nodes_[id];
    copy.op = src.op;
    copy.a = src.a;
    copy.b = src.b;
    copy.scalar = src.scalar;
    copy.i0 = src.i0;
    copy.i1 = src.i1;
    copy.trans_a = src.trans_a;
    copy.trans_b = src.trans_b;
    return copy;
  }();
  const Var y{this, id};
  const Var a{this, n.a};
  const Var b{this, n.b};
  const std::size_t ar = a.rows();
  const std::size_t ac = a.cols();

  switch (n.op) {
    case Op::kAdd:
      return slot == 0 ? reduce_to(gy, ar, ac) : reduce_to(gy, b.rows(), b.cols());
    case Op::kSub:
      return slot == 0 ? reduce_to(gy, ar, ac) : reduce_to(-gy, b.rows(), b.cols());
    case Op::kMul:
      return slot == 0 ? reduce_to(gy * b, ar, ac) : reduce_to(gy * a, b.rows(), b.cols());
    case Op::kDiv:
      return slot == 0 ? reduce_to(gy / b, ar, ac)
                       : reduce_to(-(gy * y / b), b.rows(), b.cols());
    case Op::kNeg:
      return -gy;
    case Op::kExp:
      return gy * y;
    case Op::kLog:
      return gy / a;
    case Op::kTanh:
      return gy * (1.0 - square(y));
    case Op::kSquare:
      return 2.0 * (gy * a);
    case Op::kSigmoid:
      return gy * (y * (1.0 - y));
    case Op::kLogSigmoid:
      return gy * sigmoid(-a);
    case Op::kScale:
      return n.scalar * gy;
    case Op::kAddScalar:
      return gy;
    case Op::kMatMul:
      if (slot == 0) {
        return n.trans_a ? matmul(b, gy, n.trans_b, true) : matmul(gy, b, false, !n.trans_b);
      }
      return n.trans_b ? matmul(gy, a, true, n.trans_a) : matmul(a, gy, !n.trans_a, false);
    case Op::kSumAll:
    case Op::kSumRows:
    case Op::kSumCols:
      return broadcast_to(gy, ar, ac);
    case Op::kBroadcastTo:
      return reduce_to(gy, ar, ac);
    case Op::kLogSumExpRows:
      return gy * exp(a - y);
    case Op::kReshape:
      return reshape(gy, ar, ac);
    case Op::kConcatCols:
      return slot == 0 ? slice_cols(gy, 0, ac) : slice_cols(gy, ac, b.cols());
    case Op::kSliceCols:
      return pad_cols(gy, n.i0, ac);
    case Op::kConstant:
    case Op::kInput:
    case Op::kParam:
      break;
  }
  throw InvalidArgument(std::string("no vector-Jacobian rule for ") + op_name(n.op));
}

Var Graph::input_gradient(Var yv, Var xv) {
  const auto yid = check(yv);
  const auto xid = check(xv);
  if (nodes_[yid].value.cols() != 1) {
    throw InvalidArgument("input_gradient needs an [N,1] output, got " +
                          nodes_[yid].value.shape_string());
  }
  if (yid < xid) return constant(Tensor::matrix(xv.rows(), xv.cols()));

  // Nodes in (x, y] that depend on x.
  const std::size_t span = std::size_t(yid - xid) + 1;
  std::vector<char> depends(span, 0);
  depends[0] = 1;
  for (std::int32_t id = xid + 1; id <= yid; ++id) {
    const Node& n = nodes_[id];
    const bool da = n.a >= xid && depends[n.a - xid];
    const bool db = n.b >= xid && depends[n.b - xid];
    depends[id - xid] = char(da || db);
  }
  if (!depends[span - 1]) return constant(Tensor::matrix(xv.rows(), xv.cols()));

  std::vector<Var> adj(span);
  adj[span - 1] = constant(Tensor::matrix(yv.rows(), 1, 1.0));
  for (std::int32_t id = yid; id > xid; --id) {
    const std::size_t k = std::size_t(id - xid);
    if (!depends[k] || adj[k].graph == nullptr) continue;
    const std::int32_t parents[2] = {nodes_[id].a, nodes_[id].b};
    for (int slot = 0; slot < 2; ++slot) {
      const std::int32_t p = parents[slot];
      if (p < xid || !depends[p - xid]) continue;
      Var contrib = symbolic_vjp(id, slot, adj[k]);
      Var& acc = adj[p - xid];
      acc = acc.graph ? acc + contrib : contrib;
    }
  }
  return adj[0].graph ? adj[0] : constant(Tensor::matrix(xv.rows(), xv.cols()));
}

// ---------------------------------------------------------------------------

Var operator+(Var a, Var b) { return a.graph->binary(Op::kAdd, a, b); }
Var operator-(Var a, Var b) { return a.graph->binary(Op::kSub, a, b); }
Var operator*(Var a, Var b) { return a.graph->binary(Op::kMul, a, b); }
Var operator/(Var a, Var b) { return a.graph->binary(Op::kDiv, a, b); }
Var operator-(Var a) { return a.graph->unary(Op::kNeg, a); }
Var operator+(Var a, double c) { return a.graph->unary(Op::kAddScalar, a, c); }
Var operator+(double c, Var a) { return a + c; }
Var operator-(Var a, double c) { return a + (-c); }
Var operator-(double c, Var a) { return (-a) + c; }
Var operator*(Var a, double c) { return a.graph->unary(Op::kScale, a, c); }
Var operator*(double c, Var a) { return a * c; }

Var exp(Var a) { return a.graph->unary(Op::kExp, a); }
Var log(Var a) { return a.graph->unary(Op::kLog, a); }
Var tanh(Var a) { return a.graph->unary(Op::kTanh, a); }
Var square(Var a) { return a.graph->unary(Op::kSquare, a); }
Var sigmoid(Var a) { return a.graph->unary(Op::kSigmoid, a); }
Var log_sigmoid(Var a) { return a.graph->unary(Op::kLogSigmoid, a); }
Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  return a.graph->matmul(a, b, trans_a, trans_b);
}
Var sum(Var a) { return a.graph->unary(Op::kSumAll, a); }
Var mean(Var a) { return sum(a) * (1.0 / double(a.value().size())); }
Var sum_rows(Var a) { return a.graph->unary(Op::kSumRows, a); }
Var sum_cols(Var a) { return a.graph->unary(Op::kSumCols, a); }
Var logsumexp_rows(Var a) { return a.graph->unary(Op::kLogSumExpRows, a); }
Var logsumexp(Var a) { return logsumexp_rows(reshape(a, 1, a.value().size())); }
Var reshape(Var a, std::size_t rows, std::size_t cols) { return a.graph->reshape(a, rows, cols); }
Var concat_cols(Var a, Var b) { return a.graph->concat_cols(a, b); }
Var slice_cols(Var a, std::size_t start, std::size_t len) {
  return a.graph->slice_cols(a, start, len);
}
Var broadcast_to(Var a, std::size_t rows, std::size_t cols) {
  return a.graph->broadcast_to(a, rows, cols);
}
Var input_gradient(Var y, Var x) { return x.graph->input_gradient(y, x); }

}  // namespace eim
