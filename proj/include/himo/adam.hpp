#pragma once

// Adam with bias correction. One AdamState per parameter tensor; moments are
// plain value tensors and never touch a tape. A zero gradient leaves the
// parameter bitwise unchanged (moments stay zero, update is exactly 0).

#include "himo/tensor.hpp"

namespace himo {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Tensor first_moment;
  Tensor second_moment;
  long step_count = 0;
  AdamConfig config;

  AdamState() = default;
  AdamState(const Shape& shape, const AdamConfig& cfg)
      : first_moment(Tensor::zeros(shape)),
        second_moment(Tensor::zeros(shape)),
        config(cfg) {}
};

// In-place update: param <- param - lr * m_hat / (sqrt(v_hat) + eps).
void adam_apply(AdamState& state, Tensor& param, const Tensor& grad);

}  // namespace himo
