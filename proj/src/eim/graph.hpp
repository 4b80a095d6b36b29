#pragma once

#include "eim/param_store.hpp"
#include "eim/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace eim {

class Graph;

enum class Op : std::uint8_t {
  kConstant,
  kInput,
  kParam,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kTanh,
  kSquare,
  kSigmoid,
  kLogSigmoid,
  kScale,
  kAddScalar,
  kMatMul,
  kSumAll,
  kSumRows,
  kSumCols,
  kBroadcastTo,
  kLogSumExpRows,
  kReshape,
  kConcatCols,
  kSliceCols,
};

const char* op_name(Op op);

/// Handle to a node of a Graph. Cheap to copy; valid while the Graph lives.
struct Var {
  Graph* graph = nullptr;
  std::int32_t id = -1;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().item(); }
};

/// Define-by-run reverse-mode tape over 2-D tensors.
///
/// Every node value is a matrix (rank-0 and rank-1 leaves are promoted to
/// 1x1 and 1xn). Elementwise binary ops broadcast along extents equal to 1.
/// Values are checked for NaN/Inf as each node is created when
/// `check_finite` is set; the error names the op and node index.
class Graph {
 public:
  explicit Graph(bool check_finite = true) : check_finite_(check_finite) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var constant(double value) { return constant(Tensor::scalar(value)); }
  /// Leaf whose adjoint is retained after backward().
  Var input(Tensor value);
  /// Leaf bound to a ParamStore entry; backward() accumulates into its grad.
  /// Repeated calls with the same store and name return the same node.
  Var param(ParamStore& store, const std::string& name);

  const Tensor& value(Var v) const { return nodes_[check(v)].value; }
  /// Adjoint from the most recent backward(); zero if the node was unreached.
  Tensor adjoint(Var v) const;
  Op op(Var v) const { return nodes_[check(v)].op; }
  std::size_t size() const { return nodes_.size(); }
  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }

  /// Reverse sweep from a single-element node. Adds d(loss)/d(param) into
  /// every bound ParamStore entry.
  void backward(Var loss);
  /// Nodes whose adjoint was propagated in the last backward().
  std::size_t last_backward_visits() const { return visits_; }

  // Primitive builders. The free functions below are the usual entry points.
  Var unary(Op op, Var a, double scalar = 0.0);
  Var binary(Op op, Var a, Var b);
  Var matmul(Var a, Var b, bool trans_a, bool trans_b);
  Var broadcast_to(Var a, std::size_t rows, std::size_t cols);
  Var reshape(Var a, std::size_t rows, std::size_t cols);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, std::size_t start, std::size_t len);

  /// d(sum y)/dx as a new differentiable node. `y` must be an [N,1] column of
  /// per-row scalars; rows are assumed independent, so row n of the result is
  /// the gradient of y[n] with respect to row n of x.
  Var input_gradient(Var y, Var x);

 private:
  struct Node {
    Op op = Op::kConstant;
    std::int32_t a = -1;
    std::int32_t b = -1;
    Tensor value;
    double scalar = 0.0;
    std::size_t i0 = 0;
    std::size_t i1 = 0;
    bool trans_a = false;
    bool trans_b = false;
    bool requires_grad = false;
    ParamStore::Entry* entry = nullptr;
  };

  std::int32_t check(Var v) const;
  Var push(Node node);
  Var reduce_to(Var g, std::size_t rows, std::size_t cols);
  Var pad_cols(Var g, std::size_t left, std::size_t total);
  /// Graph-building vector-Jacobian product of node `id` w.r.t. parent `slot`.
  Var symbolic_vjp(std::int32_t id, int slot, Var gy);
  void backprop_node(std::int32_t id);
  Tensor& adjoint_slot(std::int32_t id);

  bool check_finite_;
  std::vector<Node> nodes_;
  std::vector<Tensor> adjoints_;
  std::map<std::pair<const ParamStore*, std::size_t>, std::int32_t> param_nodes_;
  std::size_t visits_ = 0;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double c);
Var operator+(double c, Var a);
Var operator-(Var a, double c);
Var operator-(double c, Var a);
Var operator*(Var a, double c);
Var operator*(double c, Var a);

Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var square(Var a);
Var sigmoid(Var a);
/// log(sigmoid(a)) without overflow.
Var log_sigmoid(Var a);
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
Var sum(Var a);
Var mean(Var a);
/// Sum across columns: [r,c] -> [r,1].
Var sum_rows(Var a);
/// Sum across rows: [r,c] -> [1,c].
Var sum_cols(Var a);
/// Row-wise max + log sum exp(a - max): [r,c] -> [r,1].
Var logsumexp_rows(Var a);
/// logsumexp over every element: -> [1,1].
Var logsumexp(Var a);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t start, std::size_t len);
Var broadcast_to(Var a, std::size_t rows, std::size_t cols);
Var input_gradient(Var y, Var x);

/// Numerically stable logsumexp of a plain vector. Throws on empty input.
double logsumexp(std::span<const double> v);

}  // namespace eim
