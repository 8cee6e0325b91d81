#pragma once

#include <cstdint>

#include "far/tensor.hpp"

namespace far {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter optimizer moments. Accumulators always match the parameter
// shape; second moments stay non-negative.
struct AdamState {
  Tensor m;
  Tensor v;
  std::int64_t step = 0;
  AdamConfig config;

  AdamState() = default;
  explicit AdamState(Shape s, AdamConfig cfg = {})
      : m(s), v(s), step(0), config(cfg) {}
};

// Standard Adam update with bias-corrected moments:
//   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2,
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps).
// Moments advance even when lr == 0.
void adam_step(Tensor& params, const Tensor& grads, AdamState& state,
               double lr);

// lambda * sign(params) with sign(0) = 0; added to the data-loss gradient by
// the caller before adam_step.
Tensor l1_subgradient(const Tensor& params, double lambda);

}  // namespace far
