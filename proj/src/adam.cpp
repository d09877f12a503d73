#include "mbd/adam.hpp"

#include <cassert>
#include <cmath>

namespace mbd {

void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, double lr) {
  assert(params.size() == grads.size());
  assert(state.m.size() == params.size());
  state.t += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  double* __restrict m = state.m.data();
  double* __restrict v = state.v.data();
  double* __restrict p = params.data();
  const double* __restrict g = grads.data();
  const size_t n = params.size();
  for (size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double mhat = m[i] / corr1;
    const double vhat = v[i] / corr2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace mbd
