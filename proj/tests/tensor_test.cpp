#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "himo/tensor.hpp"
#include "test_util.hpp"

using namespace himo;
using himo::testing::grad_check;
using himo::testing::GradCheckReport;

namespace {

// Convenience: gradient of a single-input builder at a fixed point.
GradCheckReport check1(const std::function<Tensor(const Tensor&)>& f, Tensor x) {
  return grad_check(
      [&](Tape*, const std::vector<Tensor>& in) { return sum(f(in[0])); }, {std::move(x)});
}

Tensor rows23() { return Tensor({2, 3}, {0.31, -1.2, 0.77, 1.5, -0.4, 0.9}); }

}  // namespace

TEST_SUITE_BEGIN("tensor");

TEST_CASE("finite differences agree on randomly generated graphs") {
  // The generator composes the smooth op set (arithmetic, matmul, sigmoid,
  // tanh, exp, guarded log/sqrt, square, reductions, softmax, concat, slice,
  // reshape) over mixed scalar/vector/matrix leaves.
  std::size_t total_partials = 0;
  for (std::uint64_t seed = 1; seed <= 120; ++seed) {
    const auto prog = himo::testing::random_graph_program(seed);
    const auto leaves = himo::testing::program_leaves(prog, seed);
    const auto report = grad_check(
        [&prog](Tape* tape, const std::vector<Tensor>& in) {
          return himo::testing::eval_program(prog, tape, in);
        },
        leaves);
    CAPTURE(seed);
    CAPTURE(report.worst_at);
    CAPTURE(report.worst_analytic);
    CAPTURE(report.worst_numeric);
    CHECK(report.max_rel_err < 1e-4);
    total_partials += report.checked;
  }
  // Make sure the fuzz actually exercised a meaningful number of partials.
  CHECK(total_partials > 1000);
}

TEST_CASE("each smooth op differentiates correctly at fixed points") {
  const Tensor m = rows23();
  const Tensor row({3}, {0.5, -0.25, 1.1});
  const Tensor col({2, 1}, {0.8, -0.6});
  const Tensor vec4({4}, {0.2, -0.7, 1.3, -0.1});
  const Tensor mat34({3, 4}, {0.1, 0.2, -0.3, 0.4, -0.5, 0.6, 0.7, -0.8, 0.9, -1.0, 1.1, 1.2});

  SUBCASE("binary, same shape") {
    for (OpKind k : {OpKind::add, OpKind::sub, OpKind::mul}) {
      const auto rep = grad_check(
          [k](Tape*, const std::vector<Tensor>& in) {
            return sum(tensor_op(k, {in[0], in[1]}));
          },
          {m, rows23()});
      CHECK(rep.max_rel_err < 1e-8);
    }
  }
  SUBCASE("binary, matrix against scalar / row / [1,n] row / column") {
    const Tensor one_row({1, 3}, {0.4, 0.9, -1.3});
    for (const Tensor& other : {Tensor::scalar(0.7), row, one_row, col}) {
      for (OpKind k : {OpKind::add, OpKind::sub, OpKind::mul}) {
        const auto rep = grad_check(
            [k](Tape*, const std::vector<Tensor>& in) {
              return sum(tensor_op(k, {in[0], in[1]}));
            },
            {m, other});
        CHECK(rep.max_rel_err < 1e-8);
        // and with the broadcast operand on the left
        const auto rep2 = grad_check(
            [k](Tape*, const std::vector<Tensor>& in) {
              return sum(tensor_op(k, {in[1], in[0]}));
            },
            {m, other});
        CHECK(rep2.max_rel_err < 1e-8);
      }
    }
  }
  SUBCASE("matmul in all rank combinations") {
    auto mm = [](Tape*, const std::vector<Tensor>& in) {
      return sum(matmul(in[0], in[1]));
    };
    CHECK(grad_check(mm, {m, mat34}).max_rel_err < 1e-8);          // [2,3]x[3,4]
    CHECK(grad_check(mm, {row, mat34}).max_rel_err < 1e-8);        // [3]x[3,4]
    CHECK(grad_check(mm, {mat34, vec4}).max_rel_err < 1e-8);       // [3,4]x[4]
    CHECK(grad_check(mm, {vec4, vec4}).max_rel_err < 1e-8);        // dot product
  }
  SUBCASE("smooth unaries") {
    CHECK(check1([](const Tensor& x) { return sigmoid(x); }, m).max_rel_err < 1e-8);
    CHECK(check1([](const Tensor& x) { return himo::tanh(x); }, m).max_rel_err < 1e-8);
    CHECK(check1([](const Tensor& x) { return himo::exp(x); }, m).max_rel_err < 1e-8);
    CHECK(check1([](const Tensor& x) { return square(x); }, m).max_rel_err < 1e-8);
    const Tensor pos({4}, {0.3, 1.7, 2.4, 0.05});
    CHECK(check1([](const Tensor& x) { return himo::log(x); }, pos).max_rel_err < 1e-7);
    CHECK(check1([](const Tensor& x) { return himo::sqrt(x); }, pos).max_rel_err < 1e-7);
  }
  SUBCASE("reductions and softmax") {
    CHECK(check1([](const Tensor& x) { return sum(x); }, m).max_rel_err < 1e-8);
    CHECK(check1([](const Tensor& x) { return sum_last(x); }, m).max_rel_err < 1e-8);
    CHECK(check1([](const Tensor& x) { return mean(x); }, m).max_rel_err < 1e-8);
    CHECK(check1([](const Tensor& x) { return mean_last(x); }, m).max_rel_err < 1e-8);
    // softmax forms a non-trivial loss only through a weighting; dot it with
    // a fixed row so its Jacobian actually matters.
    const auto rep = grad_check(
        [](Tape*, const std::vector<Tensor>& in) {
          const Tensor w({3}, {1.0, -2.0, 0.5});
          return sum(mul(softmax(in[0]), w));
        },
        {m});
    CHECK(rep.max_rel_err < 1e-8);
  }
  SUBCASE("concat, slice, reshape") {
    const auto rep = grad_check(
        [](Tape*, const std::vector<Tensor>& in) {
          const Tensor joined = concat(in[0], in[1]);      // [2,3]+[2,1] -> [2,4]
          const Tensor piece = slice(joined, 1, 2);        // columns 1..2
          return sum(square(reshape(piece, {4})));
        },
        {m, col});
    CHECK(rep.max_rel_err < 1e-8);
  }
}

TEST_CASE("kinked ops: correct away from the kink, subgradient zero at it") {
  const Tensor safe({5}, {-2.0, -0.5, 0.4, 1.0, 3.0});
  CHECK(check1([](const Tensor& x) { return relu(x); }, safe).max_rel_err < 1e-8);
  CHECK(check1([](const Tensor& x) { return himo::abs(x); }, safe).max_rel_err < 1e-8);

  // At exactly zero the backward pass must pick subgradient 0 for both.
  Tape tape;
  const Tensor x = tape.leaf(Tensor({3}, {-1.0, 0.0, 2.0}));
  const GradMap grads = tape.backward(sum(add(relu(x), himo::abs(x))));
  const Tensor& g = grads.at(x.node);
  CHECK(g.values[0] == -1.0);  // relu' = 0, abs' = -1
  CHECK(g.values[1] == 0.0);   // both kinks contribute exactly zero
  CHECK(g.values[2] == 2.0);   // relu' = 1, abs' = 1
}

TEST_CASE("heaviside and sign: frozen values, exactly zero gradients") {
  // heaviside uses the x >= 0 -> 1 convention, so the boundary maps to 1.
  Tape tape;
  const Tensor x = tape.leaf(Tensor({3}, {-0.5, 0.0, 0.3}));
  const Tensor h = heaviside(x);
  CHECK(h.values == std::vector<double>{0.0, 1.0, 1.0});
  const Tensor s = sign(tape.leaf(Tensor({3}, {-2.0, 0.0, 3.0})));
  CHECK(s.values == std::vector<double>{-1.0, 0.0, 1.0});

  const GradMap grads = tape.backward(sum(add(mul(h, h), mul(s, s))));
  for (int leaf : tape.leaf_nodes())
    for (double v : grads.at(leaf).values) CHECK(v == 0.0);
}

TEST_CASE("stop_gradient is the identity on values and a wall for gradients") {
  // loss = sum_i w_i * c_i with c = stop(w), so dloss/dw_i = c_i = w_i.
  Tape tape;
  const Tensor w = tape.leaf(Tensor({3}, {1.0, 2.0, 3.0}));
  const Tensor c = stop_gradient(w);
  CHECK_FALSE(c.tracked());
  CHECK(c.values == std::vector<double>{1.0, 2.0, 3.0});
  const GradMap grads = tape.backward(sum(mul(w, c)));
  CHECK(grads.at(w.node).values == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("hand-derived gradient: sum of squares") {
  // loss = x0^2 + x1^2 at [1,2]: value 5, gradient [2x0, 2x1] = [2,4].
  Tape tape;
  const Tensor x = tape.leaf(Tensor({2}, {1.0, 2.0}));
  const Tensor loss = sum(square(x));
  CHECK(loss.item() == 5.0);
  const GradMap grads = tape.backward(loss);
  CHECK(grads.at(x.node).values == std::vector<double>{2.0, 4.0});
}

TEST_CASE("leaves the loss never touches get exact zeros") {
  Tape tape;
  const Tensor a = tape.leaf(Tensor({2}, {1.0, 2.0}));
  const Tensor b = tape.leaf(Tensor({3}, {5.0, 6.0, 7.0}));
  const GradMap grads = tape.backward(sum(square(a)));
  REQUIRE(grads.count(b.node) == 1);
  CHECK(grads.at(b.node).shape == Shape{3});
  for (double v : grads.at(b.node).values) CHECK(v == 0.0);
  // every leaf is present in the map
  for (int leaf : tape.leaf_nodes()) CHECK(grads.count(leaf) == 1);
}

TEST_CASE("value spot-checks") {
  SUBCASE("softmax matches the direct computation and rows sum to one") {
    const Tensor p = softmax(Tensor({3}, {1.0, 2.0, 3.0}));
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int i = 0; i < 3; ++i)
      CHECK(p.values[i] == doctest::Approx(std::exp(1.0 + i) / z).epsilon(1e-12));
    const Tensor q = softmax(rows23());
    CHECK(q.values[0] + q.values[1] + q.values[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(q.values[3] + q.values[4] + q.values[5] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("matmul 2x2 hand example") {
    // [[1,2],[3,4]] x [[5,6],[7,8]] = [[19,22],[43,50]]
    const Tensor r = matmul(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 2}, {5, 6, 7, 8}));
    CHECK(r.values == std::vector<double>{19, 22, 43, 50});
  }
  SUBCASE("column broadcast") {
    // [[1,2],[3,4]] + [[10],[20]] = [[11,12],[23,24]]
    const Tensor r = add(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 1}, {10, 20}));
    CHECK(r.values == std::vector<double>{11, 12, 23, 24});
  }
  SUBCASE("slice takes last-axis windows") {
    const Tensor r = slice(rows23(), 1, 2);
    CHECK(r.shape == Shape{2, 2});
    CHECK(r.values == std::vector<double>{-1.2, 0.77, -0.4, 0.9});
  }
  SUBCASE("vector promotions in matmul squeeze back out") {
    const Tensor mv = matmul(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2}, {1, 1}));
    CHECK(mv.shape == Shape{2});
    CHECK(mv.values == std::vector<double>{3, 7});
    const Tensor dot = matmul(Tensor({3}, {1, 2, 3}), Tensor({3}, {4, 5, 6}));
    CHECK(dot.shape.empty());
    CHECK(dot.item() == 32.0);
  }
}

TEST_CASE("shape and tape misuse raise the dedicated error types") {
  Tape tape;
  SUBCASE("incompatible elementwise shapes") {
    CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), ShapeError);
    CHECK_THROWS_AS(mul(Tensor::zeros({4}), Tensor::zeros({5})), ShapeError);
  }
  SUBCASE("matmul inner dimension mismatch") {
    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
  }
  SUBCASE("concat row mismatch") {
    CHECK_THROWS_AS(concat(Tensor::zeros({2, 3}), Tensor::zeros({3, 3})), ShapeError);
  }
  SUBCASE("slice out of range") {
    CHECK_THROWS_AS(slice(Tensor::zeros({2, 3}), 2, 2), ShapeError);
  }
  SUBCASE("reshape must conserve the element count") {
    CHECK_THROWS_AS(reshape(Tensor::zeros({2, 3}), {7}), ShapeError);
  }
  SUBCASE("item on a non-scalar") {
    CHECK_THROWS_AS(Tensor::zeros({2}).item(), ShapeError);
  }
  SUBCASE("backward needs a scalar loss") {
    const Tensor x = tape.leaf(Tensor({2}, {1.0, 2.0}));
    CHECK_THROWS_AS(tape.backward(square(x)), TapeError);
  }
  SUBCASE("operands from two tapes cannot mix") {
    Tape other;
    const Tensor a = tape.leaf(Tensor({2}, {1.0, 2.0}));
    const Tensor b = other.leaf(Tensor({2}, {3.0, 4.0}));
    CHECK_THROWS_AS(add(a, b), TapeError);
  }
}

TEST_CASE("evaluation and gradients are bitwise deterministic") {
  const auto prog = himo::testing::random_graph_program(7);
  const auto leaves = himo::testing::program_leaves(prog, 7);

  auto run = [&] {
    Tape tape;
    std::vector<Tensor> tracked;
    for (const Tensor& t : leaves) tracked.push_back(tape.leaf(t));
    const Tensor loss = himo::testing::eval_program(prog, &tape, tracked);
    GradMap grads = tape.backward(loss);
    std::vector<double> flat = {loss.item()};
    for (int leaf : tape.leaf_nodes())
      for (double v : grads.at(leaf).values) flat.push_back(v);
    return flat;
  };
  CHECK(run() == run());
}

TEST_CASE("tensor_op dispatch matches the direct calls") {
  const Tensor m = rows23();
  OpAttrs attrs;
  attrs.slice_start = 1;
  attrs.slice_len = 2;
  CHECK(tensor_op(OpKind::slice, {m}, attrs).values == slice(m, 1, 2).values);
  OpAttrs last;
  last.last_axis = true;
  CHECK(tensor_op(OpKind::sum, {m}, last).values == sum_last(m).values);
  CHECK(tensor_op(OpKind::mean, {m}, last).values == mean_last(m).values);
  CHECK(tensor_op(OpKind::heaviside, {m}).values == heaviside(m).values);
}

TEST_SUITE_END();
