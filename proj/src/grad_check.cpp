#include "dialgraph/grad_check.hpp"

#include <cmath>
#include <map>

namespace dialgraph {

GradCheckResult finite_diff_check(const std::function<Tensor()>& model_fn, ParameterStore& params,
                                  double eps) {
  if (eps <= 0.0) throw ContractError("finite_diff_check: eps must be positive");

  params.zero_grads();
  Tensor loss = model_fn();
  if (!loss.is_scalar())
    throw ContractError("finite_diff_check: model_fn must return a scalar loss");
  backward(loss);

  std::map<std::string, Mat> autodiff;
  params.for_each([&](const std::string& name, const Tensor& p) { autodiff[name] = p.grad(); });

  auto eval = [&]() {
    NoGradGuard ng;
    double v = model_fn().item();
    if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite probe value");
    return v;
  };

  GradCheckResult result;
  params.for_each([&](const std::string& name, Tensor& p) {
    Mat& w = p.value_mut();
    const Mat& ad = autodiff[name];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        double saved = w(i, j);
        w(i, j) = saved + eps;
        double fp = eval();
        w(i, j) = saved - eps;
        double fm = eval();
        w(i, j) = saved;
        double fd = (fp - fm) / (2.0 * eps);
        double rel = std::abs(fd - ad(i, j)) /
                     std::max({1.0, std::abs(fd), std::abs(ad(i, j))});
        if (rel > result.max_rel_error) {
          result.max_rel_error = rel;
          result.worst_param =
              name + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
          result.autodiff = ad(i, j);
          result.finite_diff = fd;
        }
      }
    }
  });
  return result;
}

}  // namespace dialgraph
