#include "gensync/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gensync/rng.hpp"

namespace gensync {

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double step, int64_t max_coords_per_param,
                           uint64_t sample_seed) {
  if (step <= 0.0) throw ContractError("grad_check: step must be positive");

  for (const auto& [name, t] : params) {
    (void)name;
    Tensor copy = t;
    copy.zero_grad();
  }

  double base1;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    base1 = loss.value();
    tape.backward(loss);
  }
  const double base2 = f().value();
  if (base1 != base2) {
    throw ContractError("grad_check: f is not deterministic (baselines " +
                        std::to_string(base1) + " vs " + std::to_string(base2) + ")");
  }

  GradCheckReport report;
  RandomStream rng(sample_seed);
  for (const auto& [name, t] : params) {
    Tensor param = t;
    const int64_t n = param.size();
    std::vector<int64_t> coords(static_cast<size_t>(n));
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords_per_param > 0 && n > max_coords_per_param) {
      // deterministic partial Fisher-Yates
      for (int64_t i = 0; i < max_coords_per_param; ++i) {
        const int64_t j = i + rng.uniform_int(static_cast<int>(n - i));
        std::swap(coords[static_cast<size_t>(i)], coords[static_cast<size_t>(j)]);
      }
      coords.resize(static_cast<size_t>(max_coords_per_param));
    }
    const std::vector<double>* analytic = param.has_grad() ? &param.grad_vec() : nullptr;
    for (int64_t idx : coords) {
      const double a = analytic ? (*analytic)[static_cast<size_t>(idx)] : 0.0;
      const double saved = param.at(idx);
      param.at(idx) = saved + step;
      const double fp = f().value();
      param.at(idx) = saved - step;
      const double fm = f().value();
      param.at(idx) = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double rel =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name;
        report.worst_index = idx;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace gensync
