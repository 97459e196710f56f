#pragma once

#include <cstdint>
#include <vector>

#include "gensync/tensor.hpp"

namespace gensync {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  uint64_t step = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam update with bias correction. Allocates the moment buffers on
/// first use; increments the state step counter.
void adam_step(Tensor& param, const std::vector<double>& grad, AdamState& state,
               const AdamConfig& cfg);

}  // namespace gensync
