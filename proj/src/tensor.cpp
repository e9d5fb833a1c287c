#include "himo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace himo {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (shape_size(shape) != values.size())
    throw ShapeError("tensor: shape " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(const Shape& s) { return Tensor(s, std::vector<double>(shape_size(s), 0.0)); }

Tensor Tensor::full(const Shape& s, double v) {
  return Tensor(s, std::vector<double>(shape_size(s), v));
}

double Tensor::item() const {
  if (values.size() != 1) throw ShapeError("item: tensor " + shape_str(shape) + " is not scalar");
  return values[0];
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tensor Tape::leaf(const Tensor& init) {
  Tensor t(init.shape, init.values);
  t.tape = this;
  t.node = add_node(t.shape, {}, nullptr);
  leaves_.push_back(t.node);
  return t;
}

int Tape::add_node(const Shape& shape, std::vector<int> parents, BackwardFn fn) {
  nodes_.push_back(Node{shape, std::move(parents), std::move(fn)});
  grads_.emplace_back();
  return static_cast<int>(nodes_.size()) - 1;
}

std::vector<double>& Tape::grad_buffer(int node) {
  auto& g = grads_[static_cast<std::size_t>(node)];
  if (g.empty()) g.assign(shape_size(nodes_[static_cast<std::size_t>(node)].shape), 0.0);
  return g;
}

const Shape& Tape::node_shape(int node) const {
  return nodes_[static_cast<std::size_t>(node)].shape;
}

GradMap Tape::backward(const Tensor& loss) {
  if (!loss.tracked() || loss.tape != this)
    throw TapeError("backward: loss is not tracked on this tape");
  if (loss.size() != 1)
    throw TapeError("backward: loss must be scalar, got " + shape_str(loss.shape));

  grad_buffer(loss.node)[0] = 1.0;
  for (int i = loss.node; i >= 0; --i) {
    auto& g = grads_[static_cast<std::size_t>(i)];
    if (g.empty()) continue;  // never reached by the loss
    auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.backward) node.backward(g, *this);
  }

  GradMap out;
  for (int id : leaves_) {
    auto& g = grads_[static_cast<std::size_t>(id)];
    const Shape& s = nodes_[static_cast<std::size_t>(id)].shape;
    if (g.empty())
      out.emplace(id, Tensor::zeros(s));
    else
      out.emplace(id, Tensor(s, g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Op helpers
// ---------------------------------------------------------------------------

namespace {

Tape* merged_tape(const Tensor& a, const Tensor& b) {
  if (a.tracked() && b.tracked() && a.tape != b.tape)
    throw TapeError("op: operands live on different tapes");
  if (a.tracked()) return a.tape;
  if (b.tracked()) return b.tape;
  return nullptr;
}

// Attach a result to the tape when any input is tracked.
Tensor make_result(Shape shape, std::vector<double> values, Tape* tape,
                   std::vector<int> parents, Tape::BackwardFn fn) {
  Tensor out(std::move(shape), std::move(values));
  if (tape != nullptr) {
    out.tape = tape;
    out.node = tape->add_node(out.shape, std::move(parents), std::move(fn));
  }
  return out;
}

// Broadcast patterns for elementwise binary ops (result shape is the larger
// operand's shape; Same means identical shapes).
enum class Bcast { Same, AScalar, BScalar, BRow, BCol, ARow, ACol };

struct BcastPlan {
  Bcast kind;
  Shape out;
  std::size_t rows = 0, cols = 0;  // of the rank-2 side when applicable
};

bool is_row_of(const Shape& small, const Shape& big) {
  // big is [m,n]; small is [n] or [1,n]
  if (big.size() != 2) return false;
  if (small.size() == 1) return small[0] == big[1];
  if (small.size() == 2) return small[0] == 1 && small[1] == big[1];
  return false;
}

bool is_col_of(const Shape& small, const Shape& big) {
  return big.size() == 2 && small.size() == 2 && small[0] == big[0] && small[1] == 1;
}

BcastPlan plan_broadcast(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape == b.shape) return {Bcast::Same, a.shape};
  if (a.size() == 1) return {Bcast::AScalar, b.shape};
  if (b.size() == 1) return {Bcast::BScalar, a.shape};
  if (is_row_of(b.shape, a.shape)) return {Bcast::BRow, a.shape, a.shape[0], a.shape[1]};
  if (is_col_of(b.shape, a.shape)) return {Bcast::BCol, a.shape, a.shape[0], a.shape[1]};
  if (is_row_of(a.shape, b.shape)) return {Bcast::ARow, b.shape, b.shape[0], b.shape[1]};
  if (is_col_of(a.shape, b.shape)) return {Bcast::ACol, b.shape, b.shape[0], b.shape[1]};
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a.shape) + " with " +
                   shape_str(b.shape));
}

// Map output linear index -> source linear index for the (possibly broadcast)
// operand. `self_is_small` marks the operand being broadcast.
inline std::size_t src_index(Bcast kind, bool self_is_small, std::size_t p, std::size_t cols) {
  if (!self_is_small) return p;
  switch (kind) {
    case Bcast::AScalar:
    case Bcast::BScalar: return 0;
    case Bcast::ARow:
    case Bcast::BRow: return p % cols;
    case Bcast::ACol:
    case Bcast::BCol: return p / cols;
    default: return p;
  }
}

Tensor binary_elementwise(const char* name, const Tensor& a, const Tensor& b,
                          double (*fwd)(double, double),
                          double (*dfda)(double, double),
                          double (*dfdb)(double, double)) {
  BcastPlan plan = plan_broadcast(name, a, b);
  const bool a_small = plan.kind == Bcast::AScalar || plan.kind == Bcast::ARow ||
                       plan.kind == Bcast::ACol;
  const bool b_small = plan.kind == Bcast::BScalar || plan.kind == Bcast::BRow ||
                       plan.kind == Bcast::BCol;
  const std::size_t n = shape_size(plan.out);
  std::vector<double> out(n);
  for (std::size_t p = 0; p < n; ++p) {
    double av = a.values[src_index(plan.kind, a_small, p, plan.cols)];
    double bv = b.values[src_index(plan.kind, b_small, p, plan.cols)];
    out[p] = fwd(av, bv);
  }

  Tape* tape = merged_tape(a, b);
  if (tape == nullptr) return Tensor(plan.out, std::move(out));

  std::vector<int> parents;
  if (a.tracked()) parents.push_back(a.node);
  if (b.tracked()) parents.push_back(b.node);
  const int a_node = a.node, b_node = b.node;
  const bool a_tracked = a.tracked(), b_tracked = b.tracked();
  auto av = a.values;  // captured copies for the backward pass
  auto bv = b.values;
  const Bcast kind = plan.kind;
  const std::size_t cols = plan.cols;

  auto fn = [=](const std::vector<double>& g, Tape& t) {
    if (a_tracked) {
      auto& ga = t.grad_buffer(a_node);
      for (std::size_t p = 0; p < g.size(); ++p) {
        std::size_t ia = src_index(kind, a_small, p, cols);
        std::size_t ib = src_index(kind, b_small, p, cols);
        ga[ia] += g[p] * dfda(av[ia], bv[ib]);
      }
    }
    if (b_tracked) {
      auto& gb = t.grad_buffer(b_node);
      for (std::size_t p = 0; p < g.size(); ++p) {
        std::size_t ia = src_index(kind, a_small, p, cols);
        std::size_t ib = src_index(kind, b_small, p, cols);
        gb[ib] += g[p] * dfdb(av[ia], bv[ib]);
      }
    }
  };
  return make_result(plan.out, std::move(out), tape, std::move(parents), std::move(fn));
}

Tensor unary_elementwise(const Tensor& x, double (*fwd)(double),
                         double (*grad_from_in_out)(double, double)) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x.values[i]);

  if (!x.tracked()) return Tensor(x.shape, std::move(out));
  auto xv = x.values;
  auto yv = out;
  const int xn = x.node;
  auto fn = [=](const std::vector<double>& g, Tape& t) {
    auto& gx = t.grad_buffer(xn);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * grad_from_in_out(xv[i], yv[i]);
  };
  return make_result(x.shape, std::move(out), x.tape, {xn}, std::move(fn));
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor relu(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor heaviside(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return v >= 0.0 ? 1.0 : 0.0; },
      [](double, double) { return 0.0; });
}

Tensor exp(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor abs(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor sign(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); },
      [](double, double) { return 0.0; });
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || a.rank() > 2 || b.rank() < 1 || b.rank() > 2)
    throw ShapeError("matmul: ranks must be 1 or 2, got " + shape_str(a.shape) + " x " +
                     shape_str(b.shape));
  const bool a_vec = a.rank() == 1;
  const bool b_vec = b.rank() == 1;
  const std::size_t m = a_vec ? 1 : a.shape[0];
  const std::size_t k = a_vec ? a.shape[0] : a.shape[1];
  const std::size_t k2 = b_vec ? b.shape[0] : b.shape[0];
  const std::size_t n = b_vec ? 1 : b.shape[1];
  if (k != k2)
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape) + " x " +
                     shape_str(b.shape));

  std::vector<double> out(m * n, 0.0);
  // i-k-j order: streams through b rows, vectorises well.
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.values.data() + i * k;
    double* orow = out.data() + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = b.values.data() + kk * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }

  Shape out_shape;
  if (!a_vec) out_shape.push_back(m);
  if (!b_vec) out_shape.push_back(n);
  // both vectors -> scalar (shape {})

  Tape* tape = merged_tape(a, b);
  if (tape == nullptr) return Tensor(out_shape, std::move(out));

  std::vector<int> parents;
  if (a.tracked()) parents.push_back(a.node);
  if (b.tracked()) parents.push_back(b.node);
  const int a_node = a.node, b_node = b.node;
  const bool a_tracked = a.tracked(), b_tracked = b.tracked();
  auto av = a.values;
  auto bv = b.values;

  auto fn = [=](const std::vector<double>& g, Tape& t) {
    // g has logical shape [m,n]
    if (a_tracked) {
      auto& ga = t.grad_buffer(a_node);  // [m,k]
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gv = g[i * n + j];
          for (std::size_t kk = 0; kk < k; ++kk) ga[i * k + kk] += gv * bv[kk * n + j];
        }
    }
    if (b_tracked) {
      auto& gb = t.grad_buffer(b_node);  // [k,n]
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double av_ik = av[i * k + kk];
          const double* grow = g.data() + i * n;
          double* gbrow = gb.data() + kk * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av_ik * grow[j];
        }
    }
  };
  return make_result(out_shape, std::move(out), tape, std::move(parents), std::move(fn));
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

namespace {

Tensor reduce_all(const Tensor& x, bool take_mean) {
  const std::size_t n = x.size();
  if (n == 0) throw ShapeError("sum/mean: empty tensor");
  double acc = 0.0;
  for (double v : x.values) acc += v;
  const double scale = take_mean ? 1.0 / static_cast<double>(n) : 1.0;
  std::vector<double> out{acc * scale};

  if (!x.tracked()) return Tensor({}, std::move(out));
  const int xn = x.node;
  auto fn = [=](const std::vector<double>& g, Tape& t) {
    auto& gx = t.grad_buffer(xn);
    const double gv = g[0] * scale;
    for (auto& e : gx) e += gv;
  };
  return make_result({}, std::move(out), x.tape, {xn}, std::move(fn));
}

Tensor reduce_last(const Tensor& x, bool take_mean) {
  if (x.rank() == 0) return reduce_all(x, take_mean);
  if (x.rank() == 1) return reduce_all(x, take_mean);
  if (x.rank() != 2)
    throw ShapeError("sum/mean over last axis: rank must be <= 2, got " + shape_str(x.shape));
  const std::size_t m = x.shape[0], n = x.shape[1];
  if (n == 0) throw ShapeError("sum/mean: empty axis");
  const double scale = take_mean ? 1.0 / static_cast<double>(n) : 1.0;
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += x.values[i * n + j];
    out[i] = acc * scale;
  }

  if (!x.tracked()) return Tensor({m}, std::move(out));
  const int xn = x.node;
  auto fn = [=](const std::vector<double>& g, Tape& t) {
    auto& gx = t.grad_buffer(xn);
    for (std::size_t i = 0; i < m; ++i) {
      const double gv = g[i] * scale;
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += gv;
    }
  };
  return make_result({m}, std::move(out), x.tape, {xn}, std::move(fn));
}

}  // namespace

Tensor sum(const Tensor& x) { return reduce_all(x, false); }
Tensor mean(const Tensor& x) { return reduce_all(x, true); }
Tensor sum_last(const Tensor& x) { return reduce_last(x, false); }
Tensor mean_last(const Tensor& x) { return reduce_last(x, true); }

// ---------------------------------------------------------------------------
// softmax (last axis)
// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& x) {
  if (x.rank() == 0 || x.rank() > 2)
    throw ShapeError("softmax: rank must be 1 or 2, got " + shape_str(x.shape));
  const std::size_t n = x.shape.back();
  const std::size_t m = x.size() / n;
  if (n == 0) throw ShapeError("softmax: empty axis");

  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.values.data() + i * n;
    double* orow = out.data() + i * n;
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      z += orow[j];
    }
    for (std::size_t j = 0; j < n; ++j) orow[j] /= z;
  }

  if (!x.tracked()) return Tensor(x.shape, std::move(out));
  auto pv = out;
  const int xn = x.node;
  auto fn = [=](const std::vector<double>& g, Tape& t) {
    auto& gx = t.grad_buffer(xn);
    for (std::size_t i = 0; i < m; ++i) {
      const double* p = pv.data() + i * n;
      const double* grow = g.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += grow[j] * p[j];
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += p[j] * (grow[j] - dot);
    }
  };
  return make_result(x.shape, std::move(out), x.tape, {xn}, std::move(fn));
}

// ---------------------------------------------------------------------------
// concat / slice / reshape / stop_gradient
// ---------------------------------------------------------------------------

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() == 0 || a.rank() > 2)
    throw ShapeError("concat: ranks must match and be 1 or 2, got " + shape_str(a.shape) +
                     " and " + shape_str(b.shape));
  if (a.rank() == 2 && a.shape[0] != b.shape[0])
    throw ShapeError("concat: leading dimensions differ, " + shape_str(a.shape) + " and " +
                     shape_str(b.shape));

  const std::size_t m = a.rank() == 2 ? a.shape[0] : 1;
  const std::size_t na = a.shape.back(), nb = b.shape.back();
  Shape out_shape = a.shape;
  out_shape.back() = na + nb;

  std::vector<double> out(m * (na + nb));
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(a.values.data() + i * na, na, out.data() + i * (na + nb));
    std::copy_n(b.values.data() + i * nb, nb, out.data() + i * (na + nb) + na);
  }

  Tape* tape = merged_tape(a, b);
  if (tape == nullptr) return Tensor(out_shape, std::move(out));

  std::vector<int> parents;
  if (a.tracked()) parents.push_back(a.node);
  if (b.tracked()) parents.push_back(b.node);
  const int a_node = a.node, b_node = b.node;
  const bool a_tracked = a.tracked(), b_tracked = b.tracked();
  auto fn = [=](const std::vector<double>& g, Tape& t) {
    if (a_tracked) {
      auto& ga = t.grad_buffer(a_node);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < na; ++j) ga[i * na + j] += g[i * (na + nb) + j];
    }
    if (b_tracked) {
      auto& gb = t.grad_buffer(b_node);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < nb; ++j) gb[i * nb + j] += g[i * (na + nb) + na + j];
    }
  };
  return make_result(out_shape, std::move(out), tape, std::move(parents), std::move(fn));
}

Tensor slice(const Tensor& x, std::size_t start, std::size_t len) {
  if (x.rank() == 0 || x.rank() > 2)
    throw ShapeError("slice: rank must be 1 or 2, got " + shape_str(x.shape));
  const std::size_t n = x.shape.back();
  if (len == 0 || start + len > n)
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of " + shape_str(x.shape));
  const std::size_t m = x.rank() == 2 ? x.shape[0] : 1;
  Shape out_shape = x.shape;
  out_shape.back() = len;

  std::vector<double> out(m * len);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(x.values.data() + i * n + start, len, out.data() + i * len);

  if (!x.tracked()) return Tensor(out_shape, std::move(out));
  const int xn = x.node;
  auto fn = [=](const std::vector<double>& g, Tape& t) {
    auto& gx = t.grad_buffer(xn);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < len; ++j) gx[i * n + start + j] += g[i * len + j];
  };
  return make_result(out_shape, std::move(out), x.tape, {xn}, std::move(fn));
}

Tensor reshape(const Tensor& x, Shape s) {
  if (shape_size(s) != x.size())
    throw ShapeError("reshape: " + shape_str(x.shape) + " to " + shape_str(s) +
                     " changes element count");
  if (!x.tracked()) return Tensor(std::move(s), x.values);
  const int xn = x.node;
  auto fn = [=](const std::vector<double>& g, Tape& t) {
    auto& gx = t.grad_buffer(xn);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  };
  return make_result(std::move(s), x.values, x.tape, {xn}, std::move(fn));
}

Tensor stop_gradient(const Tensor& x) {
  return Tensor(x.shape, x.values);  // constant copy: nothing upstream is reachable
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

namespace {

void need_inputs(OpKind kind, const std::vector<Tensor>& in, std::size_t n) {
  if (in.size() != n)
    throw ShapeError("tensor_op: op " + std::to_string(static_cast<int>(kind)) + " expects " +
                     std::to_string(n) + " inputs, got " + std::to_string(in.size()));
}

}  // namespace

Tensor tensor_op(OpKind kind, const std::vector<Tensor>& in, const OpAttrs& attrs) {
  switch (kind) {
    case OpKind::add: need_inputs(kind, in, 2); return add(in[0], in[1]);
    case OpKind::sub: need_inputs(kind, in, 2); return sub(in[0], in[1]);
    case OpKind::mul: need_inputs(kind, in, 2); return mul(in[0], in[1]);
    case OpKind::matmul: need_inputs(kind, in, 2); return matmul(in[0], in[1]);
    case OpKind::relu: need_inputs(kind, in, 1); return relu(in[0]);
    case OpKind::sigmoid: need_inputs(kind, in, 1); return sigmoid(in[0]);
    case OpKind::tanh: need_inputs(kind, in, 1); return tanh(in[0]);
    case OpKind::heaviside: need_inputs(kind, in, 1); return heaviside(in[0]);
    case OpKind::exp: need_inputs(kind, in, 1); return exp(in[0]);
    case OpKind::log: need_inputs(kind, in, 1); return log(in[0]);
    case OpKind::sum:
      need_inputs(kind, in, 1);
      return attrs.last_axis ? sum_last(in[0]) : sum(in[0]);
    case OpKind::mean:
      need_inputs(kind, in, 1);
      return attrs.last_axis ? mean_last(in[0]) : mean(in[0]);
    case OpKind::softmax: need_inputs(kind, in, 1); return softmax(in[0]);
    case OpKind::concat: need_inputs(kind, in, 2); return concat(in[0], in[1]);
    case OpKind::slice:
      need_inputs(kind, in, 1);
      return slice(in[0], attrs.slice_start, attrs.slice_len);
    case OpKind::square: need_inputs(kind, in, 1); return square(in[0]);
    case OpKind::sqrt: need_inputs(kind, in, 1); return sqrt(in[0]);
    case OpKind::abs: need_inputs(kind, in, 1); return abs(in[0]);
    case OpKind::sign: need_inputs(kind, in, 1); return sign(in[0]);
  }
  throw ShapeError("tensor_op: unknown op kind");
}

double grad_norm(const GradMap& grads) {
  double acc = 0.0;
  for (const auto& [id, g] : grads)
    for (double v : g.values) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace himo
