#include "far/adam.hpp"

#include <cmath>

namespace far {

void adam_step(Tensor& params, const Tensor& grads, AdamState& state,
               double lr) {
  require_same_shape(params, grads, "adam_step params/grads");
  require_same_shape(params, state.m, "adam_step params/moments");

  const AdamConfig& c = state.config;
  state.step += 1;
  const double corr1 = 1.0 - std::pow(c.beta1, double(state.step));
  const double corr2 = 1.0 - std::pow(c.beta2, double(state.step));

  double* p = params.data();
  const double* g = grads.data();
  double* m = state.m.data();
  double* v = state.v.data();
  for (std::int64_t i = 0, sz = params.size(); i < sz; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double mhat = m[i] / corr1;
    const double vhat = v[i] / corr2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + c.epsilon);
  }
}

Tensor l1_subgradient(const Tensor& params, double lambda) {
  Tensor out(params.shape());
  const double* p = params.data();
  double* o = out.data();
  for (std::int64_t i = 0, sz = params.size(); i < sz; ++i) {
    o[i] = p[i] > 0.0 ? lambda : (p[i] < 0.0 ? -lambda : 0.0);
  }
  return out;
}

}  // namespace far
