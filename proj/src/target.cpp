#include "warpu/target.hpp"

#include "warpu/errors.hpp"

#include <cmath>
#include <string>

namespace warpu {

TargetDensity::TargetDensity(int dim, LogDensity log_q, Gradient grad)
    : dim_(dim), f_(std::move(log_q)), grad_(std::move(grad)), count_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  if (dim < 1) throw InputError("target dimension must be positive");
  if (!f_) throw InputError("target needs a log density");
}

double TargetDensity::log_q(const Eigen::VectorXd& theta) const {
  if (theta.size() != dim_)
    throw InputError("target expects dimension " + std::to_string(dim_) + ", got " + std::to_string(theta.size()));
  count_->fetch_add(1, std::memory_order_relaxed);
  const double v = f_(theta);
  if (std::isnan(v)) {
    if (theta.allFinite()) throw NumericError("target log density returned NaN at a finite point");
    return -std::numeric_limits<double>::infinity();
  }
  return v;
}

Eigen::VectorXd TargetDensity::grad_log_q(const Eigen::VectorXd& theta) const {
  if (!grad_) throw InputError("target has no gradient");
  if (theta.size() != dim_) throw InputError("gradient dimension mismatch");
  return grad_(theta);
}

TargetDensity TargetDensity::rescaled(double log_factor) const {
  auto f = f_;
  TargetDensity::Gradient g = grad_;
  return TargetDensity(dim_, [f, log_factor](const Eigen::VectorXd& x) { return f(x) + log_factor; }, g);
}

}  // namespace warpu
