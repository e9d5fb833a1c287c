#pragma once

// Shared helpers for the test binaries: a finite-difference gradient oracle
// that re-evaluates a graph-building function under perturbed leaf values,
// and a replayable random-graph generator used to fuzz the autodiff core.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "himo/tensor.hpp"

namespace himo::testing {

// Builds a scalar loss from leaf tensors. When `tape` is non-null the inputs
// must be registered on it (so backward can reach them); when it is null the
// function must compute plain untracked values from the same inputs.
using LossBuilder =
    std::function<Tensor(Tape* tape, const std::vector<Tensor>& inputs)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;  // number of scalar partials compared
  std::string worst_at;     // "input i, element j"
};

// Central finite differences with step h * max(1, |x|) against tape
// gradients. Relative error is |a - n| / max(1, |a|, |n|).
GradCheckReport grad_check(const LossBuilder& build,
                           const std::vector<Tensor>& base_inputs,
                           double h = 1e-5);

// One instruction of a generated graph program. Programs are data, so the
// same graph can be evaluated tracked (for backward) and untracked (for
// finite differences).
struct GraphStep {
  enum class Kind {
    op,         // tensor_op(op_kind, {pool[a], pool[b]...}, attrs)
    log_safe,   // log(square(x) + 0.7)   — smooth, domain-safe
    sqrt_safe,  // sqrt(square(x) + 0.7)
    reshape_flat,
    stop_grad,
  };
  Kind kind = Kind::op;
  OpKind op_kind = OpKind::add;
  OpAttrs attrs;
  int a = -1;  // pool indices
  int b = -1;
};

struct GraphProgram {
  std::vector<Shape> leaf_shapes;
  std::vector<GraphStep> steps;
};

// Draws a random smooth program (no kinked ops; log/sqrt guarded). The
// generator rejects candidates whose values explode, so every returned
// program evaluates to moderate magnitudes.
GraphProgram random_graph_program(std::uint64_t seed);

// Deterministic leaf values for a program (positive and negative, bounded
// away from zero).
std::vector<Tensor> program_leaves(const GraphProgram& prog, std::uint64_t seed);

// Evaluates a program: pool starts at the (possibly tracked) inputs, each
// step appends one tensor, and the loss is the sum of every pool entry's
// element sum.
Tensor eval_program(const GraphProgram& prog, Tape* tape,
                    const std::vector<Tensor>& inputs);

}  // namespace himo::testing
