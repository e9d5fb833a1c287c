#pragma once

// Reverse-mode automatic differentiation on dense row-major double tensors.
//
// A Tensor is a shape plus a flat value buffer. Tensors are plain values by
// default; binding one to a Tape (via Tape::leaf or by deriving it from a
// tracked input) makes it part of a computation graph. Tape::backward walks
// the recorded operations in reverse and returns exact gradients for every
// leaf, with leaves the loss never reached getting exactly-zero gradients.
//
// Conventions that matter for reproducibility:
//  * everything is double precision, no parallelism, no reassociation:
//    identical inputs give bitwise-identical outputs and gradients,
//  * heaviside(0) == 1,
//  * kinked ops (relu, abs) use subgradient 0 at the kink; sign and
//    heaviside have zero gradient everywhere,
//  * a tape lives for one training step on one logical thread and is
//    discarded after backward.

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace himo {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_size(const Shape& s);

// Thrown when operand shapes do not satisfy an op's rules. The message names
// the op and the offending shapes.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Generic graph/tape misuse (non-scalar loss, mixed tapes, ...).
class TapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tape;

struct Tensor {
  Shape shape;                  // row-major; empty shape = scalar
  std::vector<double> values;
  Tape* tape = nullptr;         // nullptr: constant (not differentiated)
  int node = -1;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> v);

  static Tensor scalar(double v);
  static Tensor zeros(const Shape& s);
  static Tensor full(const Shape& s, double v);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  bool tracked() const { return tape != nullptr && node >= 0; }
  double item() const;  // requires size() == 1
};

// leaf node id -> gradient tensor (same shape as the leaf)
using GradMap = std::unordered_map<int, Tensor>;

class Tape {
 public:
  // Called with the node's output gradient; accumulates into parent buffers
  // via grad_buffer().
  using BackwardFn = std::function<void(const std::vector<double>&, Tape&)>;

  // Registers `init`'s values as a differentiable leaf and returns the
  // tracked tensor. Leaf creation order is stable and deterministic.
  Tensor leaf(const Tensor& init);

  int add_node(const Shape& shape, std::vector<int> parents, BackwardFn fn);

  // Gradient accumulation buffer for a node, zero-initialised on first use.
  std::vector<double>& grad_buffer(int node);

  // Reverse pass from a scalar loss. Returns gradients for every leaf of
  // this tape; unreached leaves map to exactly-zero tensors.
  GradMap backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<int>& leaf_nodes() const { return leaves_; }
  const Shape& node_shape(int node) const;

 private:
  struct Node {
    Shape shape;
    std::vector<int> parents;
    BackwardFn backward;  // empty for leaves
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::vector<int> leaves_;
};

// ---------------------------------------------------------------------------
// Operations. Each returns a fresh tensor; the result is tracked iff at least
// one input is tracked (all tracked inputs must share one tape).
// ---------------------------------------------------------------------------

// Elementwise binary ops accept: identical shapes, a scalar on either side,
// or a rank-2 [m,n] paired with a row [n] (or [1,n]) or a column [m,1].
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// matmul: [m,k]x[k,n] -> [m,n]; a rank-1 lhs acts as [1,k], a rank-1 rhs as
// [k,1], and the promoted dimension is squeezed from the result.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor heaviside(const Tensor& x);  // x >= 0 -> 1, else 0
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor sign(const Tensor& x);

Tensor sum(const Tensor& x);        // all elements -> scalar
Tensor sum_last(const Tensor& x);   // reduce last axis: [m,n]->[m], [n]->scalar
Tensor mean(const Tensor& x);
Tensor mean_last(const Tensor& x);

Tensor softmax(const Tensor& x);    // along the last axis, max-shifted

// concat/slice act along the last axis.
Tensor concat(const Tensor& a, const Tensor& b);
Tensor slice(const Tensor& x, std::size_t start, std::size_t len);

// Shape metadata change; values and gradients pass through untouched.
Tensor reshape(const Tensor& x, Shape s);

// Identity on values, blocks gradient flow entirely: the result is a
// constant, so no gradient ever reaches anything upstream of it.
Tensor stop_gradient(const Tensor& x);

// ---------------------------------------------------------------------------
// Uniform dispatch surface over the op set above.
// ---------------------------------------------------------------------------

enum class OpKind {
  add, sub, mul, matmul,
  relu, sigmoid, tanh, heaviside, exp, log,
  sum, mean, softmax, concat, slice,
  square, sqrt, abs, sign,
};

struct OpAttrs {
  bool last_axis = false;      // sum/mean: reduce last axis instead of all
  std::size_t slice_start = 0; // slice only
  std::size_t slice_len = 0;   // slice only; must be >= 1
};

Tensor tensor_op(OpKind kind, const std::vector<Tensor>& inputs,
                 const OpAttrs& attrs = {});

// Global L2 norm over a gradient map (diagnostic).
double grad_norm(const GradMap& grads);

}  // namespace himo
