#pragma once

#include <map>
#include <string>

#include "dialgraph/param_store.hpp"

namespace dialgraph {

/// Cosine annealing: lr(step) = lr0 * 0.5 * (1 + cos(pi * step / total)).
struct CosineSchedule {
  double initial_lr = 1e-3;
  long total_steps = 1;
};

double cosine_lr(long step, const CosineSchedule& schedule);

struct AdamWOptions {
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// AdamW with decoupled weight decay, bias-corrected moments, and a cosine
/// learning-rate schedule over the configured number of steps.
class AdamW {
 public:
  AdamW(const CosineSchedule& schedule, const AdamWOptions& options = {});

  /// One update over every parameter in the store. Gradients must be
  /// populated (zero_grads + backward); a missing gradient is a contract
  /// error naming the parameter.
  void step(ParameterStore& params);

  long step_count() const { return step_count_; }
  double last_lr() const { return last_lr_; }

 private:
  struct Moments {
    Mat m;
    Mat v;
  };
  CosineSchedule schedule_;
  AdamWOptions opt_;
  std::map<std::string, Moments> moments_;
  long step_count_ = 0;
  double last_lr_ = 0.0;
};

}  // namespace dialgraph
