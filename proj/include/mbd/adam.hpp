#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace mbd {

// Adam moment buffers for one flat parameter vector (network weights plus
// the confidence map, concatenated by the trainer).
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;
  std::vector<double> m, v;

  explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update, in place.
void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, double lr);

inline double lr_at_epoch(double base, double decay, int epoch) {
  return base * std::pow(decay, epoch);
}

}  // namespace mbd
