#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gensync/tensor.hpp"

namespace gensync {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int64_t coords_checked = 0;
};

/// Central-finite-difference oracle. Runs `f` once under a tape to obtain the
/// analytic gradients of every listed parameter, then perturbs sampled
/// coordinates by +-step and compares. Relative error per coordinate is
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
///
/// `f` must be deterministic; the baseline is evaluated twice and a mismatch
/// raises ContractError. `max_coords_per_param` == 0 checks every coordinate.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double step, int64_t max_coords_per_param = 0,
                           uint64_t sample_seed = 0);

}  // namespace gensync
