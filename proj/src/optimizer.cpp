#include "dialgraph/optimizer.hpp"

#include <cmath>

namespace dialgraph {

double cosine_lr(long step, const CosineSchedule& schedule) {
  if (step < 0 || step > schedule.total_steps)
    throw ContractError("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                        std::to_string(schedule.total_steps) + "]");
  double frac = static_cast<double>(step) / static_cast<double>(schedule.total_steps);
  return schedule.initial_lr * 0.5 * (1.0 + std::cos(M_PI * frac));
}

AdamW::AdamW(const CosineSchedule& schedule, const AdamWOptions& options)
    : schedule_(schedule), opt_(options) {}

void AdamW::step(ParameterStore& params) {
  double lr = cosine_lr(step_count_, schedule_);
  last_lr_ = lr;
  ++step_count_;
  double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_count_));
  double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_count_));

  params.for_each([&](const std::string& name, Tensor& p) {
    if (!p.has_grad())
      throw ContractError("adamw_step: missing gradient for parameter '" + name + "'");
    const Mat& g = p.grad();
    auto [it, inserted] = moments_.try_emplace(name);
    Moments& mom = it->second;
    if (inserted) {
      mom.m = Mat::Zero(p.rows(), p.cols());
      mom.v = Mat::Zero(p.rows(), p.cols());
    }
    mom.m = opt_.beta1 * mom.m + (1.0 - opt_.beta1) * g;
    mom.v = (opt_.beta2 * mom.v.array() + (1.0 - opt_.beta2) * g.array().square()).matrix();

    Mat& w = p.value_mut();
    // Decoupled decay, then the bias-corrected Adam update.
    w -= (lr * opt_.weight_decay) * w;
    w.array() -= lr * (mom.m.array() / bc1) / ((mom.v.array() / bc2).sqrt() + opt_.eps);
  });
}

}  // namespace dialgraph
