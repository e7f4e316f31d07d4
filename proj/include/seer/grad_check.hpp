#pragma once

#include <functional>
#include <vector>

#include "seer/common.hpp"
#include "seer/net.hpp"

namespace seer {

struct LossEval {
  double loss = 0.0;
  GradList grads;
  // Smallest |ReLU pre-activation| over the evaluation plus signed near-kink
  // unit counts; a coordinate whose perturbation changes the counts moved a
  // unit across (or onto) a kink, making the central difference meaningless.
  double min_abs_preact = std::numeric_limits<double>::infinity();
  long kink_pos = 0;
  long kink_neg = 0;
  long degenerate_pairs = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  size_t checked = 0;
  size_t skipped = 0;
  std::string worst_param;
};

/// Central-difference check of an analytic gradient. `loss_fn` must be a
/// deterministic function of the parameters. Samples up to `max_coords`
/// coordinates uniformly across the parameter set (all of them when the set
/// is small). Relative error uses a 1e-3 floor on the denominator so that
/// coordinates with near-zero gradient compare against finite-difference
/// noise honestly.
inline GradCheckReport grad_check(const std::function<LossEval()>& loss_fn, ParameterSet& params,
                                  Rng& rng, double h = 1e-5, size_t max_coords = 200) {
  LossEval base = loss_fn();
  if (base.grads.size() != params.size()) {
    throw std::invalid_argument("grad_check: loss_fn gradient list does not match parameters");
  }

  // Flat index -> (param, row-major offset).
  std::vector<std::pair<size_t, Eigen::Index>> coords;
  size_t total = params.total_coeffs();
  size_t n_check = std::min(max_coords, total);
  for (size_t k = 0; k < n_check; ++k) {
    size_t flat = (total <= max_coords) ? k : rng.index(total);
    size_t pi = 0;
    while (flat >= static_cast<size_t>(params[pi].value->size())) {
      flat -= static_cast<size_t>(params[pi].value->size());
      ++pi;
    }
    coords.emplace_back(pi, static_cast<Eigen::Index>(flat));
  }

  GradCheckReport report;
  for (auto [pi, off] : coords) {
    double* slot = params[pi].value->data() + off;
    double saved = *slot;
    *slot = saved + h;
    LossEval plus = loss_fn();
    *slot = saved - h;
    LossEval minus = loss_fn();
    *slot = saved;
    bool crossed = plus.kink_pos != base.kink_pos || plus.kink_neg != base.kink_neg ||
                   minus.kink_pos != base.kink_pos || minus.kink_neg != base.kink_neg ||
                   plus.degenerate_pairs != base.degenerate_pairs ||
                   minus.degenerate_pairs != base.degenerate_pairs;
    if (crossed) {
      report.skipped += 1;
      continue;
    }
    double numeric = (plus.loss - minus.loss) / (2.0 * h);
    double analytic = *(base.grads[pi].data() + off);
    double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-3);
    double rel = std::abs(analytic - numeric) / denom;
    report.checked += 1;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param = params[pi].name;
    }
  }
  return report;
}

}  // namespace seer
