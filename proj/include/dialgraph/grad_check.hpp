#pragma once

#include <functional>
#include <string>

#include "dialgraph/param_store.hpp"

namespace dialgraph {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;  // "name[i,j]" of the worst entry
  double autodiff = 0.0;    // gradient values at that entry
  double finite_diff = 0.0;
};

/// Central-difference check of reverse-mode gradients.
///
/// `model_fn` rebuilds the loss from the current parameter values and must be
/// deterministic. For every parameter entry the autodiff gradient is compared
/// against (f(x+eps) - f(x-eps)) / (2 eps); the relative error is
/// |fd - ad| / max(1, |fd|, |ad|). Returns the worst entry found.
GradCheckResult finite_diff_check(const std::function<Tensor()>& model_fn, ParameterStore& params,
                                  double eps = 1e-5);

}  // namespace dialgraph
