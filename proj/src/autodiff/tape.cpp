#include "isgd/autodiff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "isgd/simd/kernels.hpp"

namespace isgd::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::param: return "param";
    case Op::constant: return "constant";
    case Op::matmul: return "matmul";
    case Op::add_bias: return "add_bias";
    case Op::tanh_jet: return "tanh";
    case Op::relu_jet: return "relu";
    case Op::sin: return "sin";
    case Op::square: return "square";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::add_const: return "add_const";
    case Op::mul_const: return "mul_const";
    case Op::lane_combine: return "lane_combine";
    case Op::slice_cols: return "slice_cols";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
  }
  return "unknown";
}

NonFiniteError::NonFiniteError(std::size_t node, Op op)
    : std::runtime_error("non-finite value produced by tape node #" + std::to_string(node) +
                         " (" + op_name(op) + ")"),
      node_(node),
      op_(op) {}

namespace {

// Dispatch dense kernels: SIMD table for double, generic reference otherwise.
template <class T>
struct Dense {
  static void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    simd::reference::gemm_nn(a, b, c, m, k, n);
  }
  static void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    simd::reference::gemm_nt(a, b, c, m, k, n);
  }
  static void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    simd::reference::gemm_tn(a, b, c, m, k, n);
  }
  static void tanh_fwd(const T* z, T* out, std::size_t rows, JetShape s) {
    simd::reference::tanh_jet_forward(z, out, rows, s);
  }
  static void tanh_bwd(const T* z, const T* out, const T* g, T* gz, std::size_t rows,
                       JetShape s) {
    simd::reference::tanh_jet_backward(z, out, g, gz, rows, s);
  }
};

template <>
struct Dense<double> {
  static void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                      std::size_t n) {
    simd::kernels().gemm_nn(a, b, c, m, k, n);
  }
  static void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                      std::size_t n) {
    simd::kernels().gemm_nt(a, b, c, m, k, n);
  }
  static void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                      std::size_t n) {
    simd::kernels().gemm_tn(a, b, c, m, k, n);
  }
  static void tanh_fwd(const double* z, double* out, std::size_t rows, JetShape s) {
    simd::kernels().tanh_jet_forward(z, out, rows, s);
  }
  static void tanh_bwd(const double* z, const double* out, const double* g, double* gz,
                       std::size_t rows, JetShape s) {
    simd::kernels().tanh_jet_backward(z, out, g, gz, rows, s);
  }
};

inline bool finite(double x) { return std::isfinite(x); }
inline bool finite(const Tangent& x) { return isfinite(x); }

// Per-thread recycling of value/adjoint storage. Tapes are rebuilt for every
// evaluation, and fresh multi-megabyte vectors cost page faults each time.
template <class T>
std::vector<std::vector<T>>& buffer_pool() {
  thread_local std::vector<std::vector<T>> pool;
  return pool;
}

template <class T>
std::vector<T> take_buffer() {
  auto& pool = buffer_pool<T>();
  if (pool.empty()) return {};
  std::vector<T> v = std::move(pool.back());
  pool.pop_back();
  v.clear();
  return v;
}

template <class T>
void give_buffer(std::vector<T>&& v) {
  auto& pool = buffer_pool<T>();
  if (v.capacity() > 0 && pool.size() < 8) pool.push_back(std::move(v));
}

}  // namespace

template <class T>
Tape<T>::Tape(std::span<const T> params) : params_(params), values_(take_buffer<T>()) {
  nodes_.reserve(64);
}

template <class T>
Tape<T>::~Tape() {
  give_buffer(std::move(values_));
}

template <class T>
Var Tape<T>::push(Node node) {
  node.offset = values_.size();
  values_.resize(values_.size() + node.rows * node.cols);
  nodes_.push_back(node);
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <class T>
std::size_t Tape<T>::store_aux(std::span<const double> c) {
  const std::size_t off = aux_.size();
  aux_.insert(aux_.end(), c.begin(), c.end());
  return off;
}

template <class T>
void Tape<T>::check_finite(std::size_t id) const {
  const Node& n = nodes_[id];
  const T* v = data(n);
  for (std::size_t i = 0, e = n.rows * n.cols; i < e; ++i) {
    if (!finite(v[i])) throw NonFiniteError(id, n.op);
  }
}

template <class T>
void Tape<T>::require_same_shape(Var a, Var b, const char* what) const {
  const Node& x = nodes_.at(a.id);
  const Node& y = nodes_.at(b.id);
  if (x.rows != y.rows || x.cols != y.cols) {
    throw TapeError(std::string(what) + ": shape mismatch " + std::to_string(x.rows) + "x" +
                    std::to_string(x.cols) + " vs " + std::to_string(y.rows) + "x" +
                    std::to_string(y.cols));
  }
}

template <class T>
std::span<const T> Tape<T>::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return {data(n), n.rows * n.cols};
}

template <class T>
T Tape<T>::scalar(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.rows * n.cols != 1) throw TapeError("scalar(): node is not 1x1");
  return *data(n);
}

template <class T>
Var Tape<T>::param(std::size_t offset, std::size_t rows, std::size_t cols) {
  if (offset + rows * cols > params_.size()) throw TapeError("param block out of range");
  Node n{Op::param};
  n.rows = rows;
  n.cols = cols;
  n.extra = offset;
  n.needs_grad = true;
  const Var v = push(n);
  std::copy_n(params_.begin() + static_cast<std::ptrdiff_t>(offset), rows * cols,
              data(nodes_[v.id]));
  return v;
}

template <class T>
Var Tape<T>::constant(std::size_t rows, std::size_t cols, std::span<const double> values) {
  if (values.size() != rows * cols) throw TapeError("constant: value count does not match shape");
  Node n{Op::constant};
  n.rows = rows;
  n.cols = cols;
  const Var v = push(n);
  T* out = data(nodes_[v.id]);
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = T(values[i]);
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::matmul(Var a, Var b) {
  const Node& x = nodes_.at(a.id);
  const Node& y = nodes_.at(b.id);
  if (x.cols != y.rows) {
    throw TapeError("matmul: inner dimensions differ (" + std::to_string(x.cols) + " vs " +
                    std::to_string(y.rows) + ")");
  }
  Node n{Op::matmul, a.id, b.id};
  n.rows = x.rows;
  n.cols = y.cols;
  n.extra = x.cols;
  n.needs_grad = x.needs_grad || y.needs_grad;
  const Var v = push(n);
  const Node& xa = nodes_[a.id];
  const Node& yb = nodes_[b.id];
  Dense<T>::gemm_nn(data(xa), data(yb), data(nodes_[v.id]), xa.rows, xa.cols, yb.cols);
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::add_bias(Var z, Var bias, std::size_t lane_width) {
  const Node& x = nodes_.at(z.id);
  const Node& b = nodes_.at(bias.id);
  if (b.rows != x.rows || b.cols != 1 || lane_width > x.cols) {
    throw TapeError("add_bias: bias must be rows x 1 and lane width within the block");
  }
  Node n{Op::add_bias, z.id, bias.id};
  n.rows = x.rows;
  n.cols = x.cols;
  n.extra = lane_width;
  n.needs_grad = x.needs_grad || b.needs_grad;
  const Var v = push(n);
  const Node& xn = nodes_[z.id];
  const T* bv = data(nodes_[bias.id]);
  T* out = data(nodes_[v.id]);
  std::copy_n(data(xn), xn.rows * xn.cols, out);
  for (std::size_t r = 0; r < xn.rows; ++r) {
    T* row = out + r * xn.cols;
    for (std::size_t j = 0; j < lane_width; ++j) row[j] += bv[r];
  }
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::activation(Activation act, Var z, JetShape shape) {
  const Node& x = nodes_.at(z.id);
  if (shape.width() != x.cols) throw TapeError("activation: jet shape does not match columns");
  if (shape.order > 2) throw TapeError("activation: input derivatives above order 2 unsupported");
  Op op;
  switch (act) {
    case Activation::tanh:
      op = Op::tanh_jet;
      break;
    case Activation::relu:
      if (shape.order == 2 && shape.axes > 0) {
        throw TapeError("relu is not twice differentiable; second input derivatives need tanh");
      }
      op = Op::relu_jet;
      break;
    default:
      throw TapeError("unsupported activation");
  }
  Node n{op, z.id};
  n.rows = x.rows;
  n.cols = x.cols;
  n.jet = shape;
  n.needs_grad = x.needs_grad;
  const Var v = push(n);
  const Node& zn = nodes_[z.id];
  T* out = data(nodes_[v.id]);
  if (op == Op::tanh_jet) {
    Dense<T>::tanh_fwd(data(zn), out, zn.rows, shape);
  } else {
    const T* zv = data(zn);
    for (std::size_t r = 0; r < zn.rows; ++r) {
      const T* zr = zv + r * zn.cols;
      T* orow = out + r * zn.cols;
      for (std::size_t j = 0; j < shape.batch; ++j) {
        const bool on = zr[j] > 0.0;
        orow[j] = on ? zr[j] : T(0.0);
        for (std::size_t a = 0; a < shape.axes && shape.order > 0; ++a) {
          orow[shape.d1(a) + j] = on ? zr[shape.d1(a) + j] : T(0.0);
        }
      }
    }
  }
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::sin(Var a) {
  using std::sin;
  const Node& x = nodes_.at(a.id);
  Node n{Op::sin, a.id};
  n.rows = x.rows;
  n.cols = x.cols;
  n.needs_grad = x.needs_grad;
  const Var v = push(n);
  const T* in = data(nodes_[a.id]);
  T* out = data(nodes_[v.id]);
  for (std::size_t i = 0, e = n.rows * n.cols; i < e; ++i) out[i] = sin(in[i]);
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::square(Var a) {
  const Node& x = nodes_.at(a.id);
  Node n{Op::square, a.id};
  n.rows = x.rows;
  n.cols = x.cols;
  n.needs_grad = x.needs_grad;
  const Var v = push(n);
  const T* in = data(nodes_[a.id]);
  T* out = data(nodes_[v.id]);
  for (std::size_t i = 0, e = n.rows * n.cols; i < e; ++i) out[i] = in[i] * in[i];
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Node n{Op::add, a.id, b.id};
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  const Var v = push(n);
  const T* x = data(nodes_[a.id]);
  const T* y = data(nodes_[b.id]);
  T* out = data(nodes_[v.id]);
  for (std::size_t i = 0, e = n.rows * n.cols; i < e; ++i) out[i] = x[i] + y[i];
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Node n{Op::sub, a.id, b.id};
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  const Var v = push(n);
  const T* x = data(nodes_[a.id]);
  const T* y = data(nodes_[b.id]);
  T* out = data(nodes_[v.id]);
  for (std::size_t i = 0, e = n.rows * n.cols; i < e; ++i) out[i] = x[i] - y[i];
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Node n{Op::mul, a.id, b.id};
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  const Var v = push(n);
  const T* x = data(nodes_[a.id]);
  const T* y = data(nodes_[b.id]);
  T* out = data(nodes_[v.id]);
  for (std::size_t i = 0, e = n.rows * n.cols; i < e; ++i) out[i] = x[i] * y[i];
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::scale(Var a, double s) {
  const Node& x = nodes_.at(a.id);
  Node n{Op::scale, a.id};
  n.rows = x.rows;
  n.cols = x.cols;
  n.factor = s;
  n.needs_grad = x.needs_grad;
  const Var v = push(n);
  const T* in = data(nodes_[a.id]);
  T* out = data(nodes_[v.id]);
  for (std::size_t i = 0, e = n.rows * n.cols; i < e; ++i) out[i] = T(s) * in[i];
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::add_const(Var a, std::span<const double> c) {
  const Node& x = nodes_.at(a.id);
  if (c.size() != x.rows * x.cols) throw TapeError("add_const: constant size mismatch");
  Node n{Op::add_const, a.id};
  n.rows = x.rows;
  n.cols = x.cols;
  n.needs_grad = x.needs_grad;
  n.aux = store_aux(c);
  n.aux_len = c.size();
  const Var v = push(n);
  const T* in = data(nodes_[a.id]);
  T* out = data(nodes_[v.id]);
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = in[i] + T(c[i]);
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::mul_const(Var a, std::span<const double> c) {
  const Node& x = nodes_.at(a.id);
  if (c.size() != x.rows * x.cols) throw TapeError("mul_const: constant size mismatch");
  Node n{Op::mul_const, a.id};
  n.rows = x.rows;
  n.cols = x.cols;
  n.needs_grad = x.needs_grad;
  n.aux = store_aux(c);
  n.aux_len = c.size();
  const Var v = push(n);
  const T* in = data(nodes_[a.id]);
  T* out = data(nodes_[v.id]);
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = T(c[i]) * in[i];
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::lane_combine(Var a, std::span<const double> coeffs, std::size_t lane_width) {
  const Node& x = nodes_.at(a.id);
  if (lane_width == 0 || coeffs.size() * lane_width != x.cols) {
    throw TapeError("lane_combine: coefficients do not match the lane layout");
  }
  Node n{Op::lane_combine, a.id};
  n.rows = x.rows;
  n.cols = lane_width;
  n.extra = lane_width;
  n.needs_grad = x.needs_grad;
  n.aux = store_aux(coeffs);
  n.aux_len = coeffs.size();
  const Var v = push(n);
  const Node& xn = nodes_[a.id];
  const T* in = data(xn);
  T* out = data(nodes_[v.id]);
  for (std::size_t r = 0; r < xn.rows; ++r) {
    for (std::size_t l = 0; l < coeffs.size(); ++l) {
      if (coeffs[l] == 0.0) continue;
      const T c(coeffs[l]);
      const T* lane = in + r * xn.cols + l * lane_width;
      T* orow = out + r * lane_width;
      for (std::size_t j = 0; j < lane_width; ++j) orow[j] += c * lane[j];
    }
  }
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::slice_cols(Var a, std::size_t start, std::size_t count) {
  const Node& x = nodes_.at(a.id);
  if (start + count > x.cols) throw TapeError("slice_cols: range out of bounds");
  Node n{Op::slice_cols, a.id};
  n.rows = x.rows;
  n.cols = count;
  n.extra = start;
  n.needs_grad = x.needs_grad;
  const Var v = push(n);
  const Node& xn = nodes_[a.id];
  const T* in = data(xn);
  T* out = data(nodes_[v.id]);
  for (std::size_t r = 0; r < xn.rows; ++r) {
    std::copy_n(in + r * xn.cols + start, count, out + r * count);
  }
  return v;
}

template <class T>
Var Tape<T>::sum(Var a) {
  const Node& x = nodes_.at(a.id);
  Node n{Op::sum, a.id};
  n.rows = 1;
  n.cols = 1;
  n.needs_grad = x.needs_grad;
  const Var v = push(n);
  const Node& xn = nodes_[a.id];
  const T* in = data(xn);
  T acc(0.0);
  for (std::size_t i = 0, e = xn.rows * xn.cols; i < e; ++i) acc += in[i];
  *data(nodes_[v.id]) = acc;
  check_finite(v.id);
  return v;
}

template <class T>
Var Tape<T>::mean(Var a) {
  const Node& x = nodes_.at(a.id);
  const std::size_t count = x.rows * x.cols;
  if (count == 0) throw TapeError("mean of an empty block");
  Node n{Op::mean, a.id};
  n.rows = 1;
  n.cols = 1;
  n.factor = 1.0 / static_cast<double>(count);
  n.needs_grad = x.needs_grad;
  const Var v = push(n);
  const T* in = data(nodes_[a.id]);
  T acc(0.0);
  for (std::size_t i = 0; i < count; ++i) acc += in[i];
  *data(nodes_[v.id]) = acc * T(n.factor);
  check_finite(v.id);
  return v;
}

template <class T>
std::vector<T> Tape<T>::gradient(Var out) {
  const Node& o = nodes_.at(out.id);
  if (o.rows * o.cols != 1) throw TapeError("gradient(): output must be 1x1");
  std::vector<T> adj = take_buffer<T>();
  adj.assign(values_.size(), T(0.0));
  std::vector<T> grad(params_.size(), T(0.0));
  adj[o.offset] = T(1.0);
  for (std::size_t id = out.id + 1; id-- > 0;) {
    if (nodes_[id].needs_grad) backward_node(id, adj, grad);
  }
  give_buffer(std::move(adj));
  return grad;
}

template <class T>
void Tape<T>::backward_node(std::size_t id, std::vector<T>& adj, std::vector<T>& grad) const {
  const Node& n = nodes_[id];
  const std::size_t size = n.rows * n.cols;
  const T* g = adj.data() + n.offset;
  auto adj_of = [&](std::uint32_t parent) { return adj.data() + nodes_[parent].offset; };
  auto wants = [&](std::uint32_t parent) { return nodes_[parent].needs_grad; };

  switch (n.op) {
    case Op::param:
      for (std::size_t i = 0; i < size; ++i) grad[n.extra + i] += g[i];
      break;
    case Op::constant:
      break;
    case Op::matmul: {
      const Node& x = nodes_[n.a];
      const Node& y = nodes_[n.b];
      // d/dA = G B^T ; d/dB = A^T G
      if (wants(n.a)) Dense<T>::gemm_nt(g, data(y), adj_of(n.a), x.rows, n.cols, x.cols);
      if (wants(n.b)) Dense<T>::gemm_tn(data(x), g, adj_of(n.b), y.rows, x.rows, n.cols);
      break;
    }
    case Op::add_bias: {
      if (wants(n.a)) {
        T* ga = adj_of(n.a);
        for (std::size_t i = 0; i < size; ++i) ga[i] += g[i];
      }
      if (wants(n.b)) {
        T* gb = adj_of(n.b);
        for (std::size_t r = 0; r < n.rows; ++r) {
          const T* row = g + r * n.cols;
          T acc(0.0);
          for (std::size_t j = 0; j < n.extra; ++j) acc += row[j];
          gb[r] += acc;
        }
      }
      break;
    }
    case Op::tanh_jet:
      Dense<T>::tanh_bwd(data(nodes_[n.a]), data(n), g, adj_of(n.a), n.rows, n.jet);
      break;
    case Op::relu_jet: {
      const T* z = data(nodes_[n.a]);
      T* ga = adj_of(n.a);
      for (std::size_t r = 0; r < n.rows; ++r) {
        for (std::size_t j = 0; j < n.jet.batch; ++j) {
          if (!(z[r * n.cols + j] > 0.0)) continue;
          ga[r * n.cols + j] += g[r * n.cols + j];
          for (std::size_t a = 0; a < n.jet.axes && n.jet.order > 0; ++a) {
            const std::size_t k = r * n.cols + n.jet.d1(a) + j;
            ga[k] += g[k];
          }
        }
      }
      break;
    }
    case Op::sin: {
      using std::cos;
      const T* x = data(nodes_[n.a]);
      T* ga = adj_of(n.a);
      for (std::size_t i = 0; i < size; ++i) {
        if constexpr (std::is_same_v<T, double>) {
          ga[i] += g[i] * std::cos(x[i]);
        } else {
          ga[i] += g[i] * T(std::cos(x[i].v), -std::sin(x[i].v) * x[i].t);
        }
      }
      break;
    }
    case Op::square: {
      const T* x = data(nodes_[n.a]);
      T* ga = adj_of(n.a);
      for (std::size_t i = 0; i < size; ++i) ga[i] += T(2.0) * x[i] * g[i];
      break;
    }
    case Op::add:
    case Op::sub: {
      if (wants(n.a)) {
        T* ga = adj_of(n.a);
        for (std::size_t i = 0; i < size; ++i) ga[i] += g[i];
      }
      if (wants(n.b)) {
        T* gb = adj_of(n.b);
        if (n.op == Op::add) {
          for (std::size_t i = 0; i < size; ++i) gb[i] += g[i];
        } else {
          for (std::size_t i = 0; i < size; ++i) gb[i] -= g[i];
        }
      }
      break;
    }
    case Op::mul: {
      const T* x = data(nodes_[n.a]);
      const T* y = data(nodes_[n.b]);
      if (wants(n.a)) {
        T* ga = adj_of(n.a);
        for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * y[i];
      }
      if (wants(n.b)) {
        T* gb = adj_of(n.b);
        for (std::size_t i = 0; i < size; ++i) gb[i] += g[i] * x[i];
      }
      break;
    }
    case Op::scale: {
      T* ga = adj_of(n.a);
      const T s(n.factor);
      for (std::size_t i = 0; i < size; ++i) ga[i] += s * g[i];
      break;
    }
    case Op::add_const: {
      T* ga = adj_of(n.a);
      for (std::size_t i = 0; i < size; ++i) ga[i] += g[i];
      break;
    }
    case Op::mul_const: {
      T* ga = adj_of(n.a);
      const double* c = aux_.data() + n.aux;
      for (std::size_t i = 0; i < size; ++i) ga[i] += T(c[i]) * g[i];
      break;
    }
    case Op::lane_combine: {
      const Node& x = nodes_[n.a];
      T* ga = adj_of(n.a);
      const double* c = aux_.data() + n.aux;
      for (std::size_t r = 0; r < n.rows; ++r) {
        for (std::size_t l = 0; l < n.aux_len; ++l) {
          if (c[l] == 0.0) continue;
          const T cl(c[l]);
          T* lane = ga + r * x.cols + l * n.extra;
          const T* grow = g + r * n.cols;
          for (std::size_t j = 0; j < n.extra; ++j) lane[j] += cl * grow[j];
        }
      }
      break;
    }
    case Op::slice_cols: {
      const Node& x = nodes_[n.a];
      T* ga = adj_of(n.a);
      for (std::size_t r = 0; r < n.rows; ++r) {
        T* dst = ga + r * x.cols + n.extra;
        const T* src = g + r * n.cols;
        for (std::size_t j = 0; j < n.cols; ++j) dst[j] += src[j];
      }
      break;
    }
    case Op::sum:
    case Op::mean: {
      const Node& x = nodes_[n.a];
      T* ga = adj_of(n.a);
      const T s = n.op == Op::mean ? g[0] * T(n.factor) : g[0];
      for (std::size_t i = 0, e = x.rows * x.cols; i < e; ++i) ga[i] += s;
      break;
    }
  }
}

template class Tape<double>;
template class Tape<Tangent>;

}  // namespace isgd::ad
