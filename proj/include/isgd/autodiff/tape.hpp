#pragma once

// Reverse-mode tape over dense row-major blocks.
//
// Every node holds a rows x cols block of values. Nodes are appended in
// evaluation order, so parents always precede children and a single reverse
// sweep visits each node once. Input derivatives of a network are carried as
// extra column lanes (see simd::JetShape) so that residual losses built from
// u, u_x, u_xx stay differentiable with respect to the parameters.
//
// The element type T is double for ordinary gradients and ad::Tangent for
// forward-over-reverse Hessian-vector products. A Tape is single-use and
// single-threaded; build a fresh one per evaluation.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "isgd/autodiff/tangent.hpp"
#include "isgd/simd/reference.hpp"

namespace isgd::ad {

using simd::reference::JetShape;

struct Var {
  std::uint32_t id = 0;
};

enum class Activation { tanh, relu };

enum class Op : std::uint8_t {
  param,
  constant,
  matmul,
  add_bias,
  tanh_jet,
  relu_jet,
  sin,
  square,
  add,
  sub,
  mul,
  scale,
  add_const,
  mul_const,
  lane_combine,
  slice_cols,
  sum,
  mean,
};

const char* op_name(Op op);

/// Raised when a node produces NaN or infinity. Carries the node index.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::size_t node, Op op);
  [[nodiscard]] std::size_t node() const { return node_; }
  [[nodiscard]] Op op() const { return op_; }

 private:
  std::size_t node_;
  Op op_;
};

/// Construction-time misuse: shape mismatch, unsupported activation/order.
class TapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <class T>
class Tape {
 public:
  explicit Tape(std::span<const T> params);
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves
  Var param(std::size_t offset, std::size_t rows, std::size_t cols);
  Var constant(std::size_t rows, std::size_t cols, std::span<const double> values);

  // Dense algebra
  Var matmul(Var a, Var b);
  /// Adds a rows x 1 bias to the first `lane_width` columns of z.
  Var add_bias(Var z, Var bias, std::size_t lane_width);
  Var activation(Activation act, Var z, JetShape shape);

  // Element-wise
  Var sin(Var a);
  Var square(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_const(Var a, std::span<const double> c);
  Var mul_const(Var a, std::span<const double> c);

  // Reshaping and reductions
  /// rows x (L*w) -> rows x w, out = sum_l coeffs[l] * lane_l.
  Var lane_combine(Var a, std::span<const double> coeffs, std::size_t lane_width);
  Var slice_cols(Var a, std::size_t start, std::size_t count);
  Var sum(Var a);
  Var mean(Var a);

  [[nodiscard]] std::size_t rows(Var v) const { return nodes_[v.id].rows; }
  [[nodiscard]] std::size_t cols(Var v) const { return nodes_[v.id].cols; }
  [[nodiscard]] std::span<const T> value(Var v) const;
  [[nodiscard]] T scalar(Var v) const;
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] std::size_t num_params() const { return params_.size(); }

  /// Reverse sweep from a 1x1 node; returns d(out)/d(params).
  [[nodiscard]] std::vector<T> gradient(Var out);

 private:
  static constexpr std::uint32_t kNone = 0xffffffffu;

  struct Node {
    Op op;
    std::uint32_t a = kNone;
    std::uint32_t b = kNone;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;      // into values_
    std::size_t aux = 0;         // into aux_
    std::size_t aux_len = 0;
    std::size_t extra = 0;       // param offset / lane width / slice start
    double factor = 0.0;
    JetShape jet{};
    bool needs_grad = false;
  };

  Var push(Node node);
  std::size_t store_aux(std::span<const double> c);
  T* data(const Node& n) { return values_.data() + n.offset; }
  const T* data(const Node& n) const { return values_.data() + n.offset; }
  void check_finite(std::size_t id) const;
  void require_same_shape(Var a, Var b, const char* what) const;
  void backward_node(std::size_t id, std::vector<T>& adj, std::vector<T>& grad) const;

  std::span<const T> params_;
  std::vector<Node> nodes_;
  std::vector<T> values_;
  std::vector<double> aux_;
};

extern template class Tape<double>;
extern template class Tape<Tangent>;

}  // namespace isgd::ad
