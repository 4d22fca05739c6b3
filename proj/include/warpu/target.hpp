#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>

namespace warpu {

// Unnormalised log density q. Every call to log_q bumps a shared atomic
// counter; copies of a TargetDensity share the same counter.
class TargetDensity {
 public:
  using LogDensity = std::function<double(const Eigen::VectorXd&)>;
  using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  TargetDensity(int dim, LogDensity log_q, Gradient grad = {});

  int dim() const { return dim_; }
  double log_q(const Eigen::VectorXd& theta) const;

  bool has_gradient() const { return static_cast<bool>(grad_); }
  Eigen::VectorXd grad_log_q(const Eigen::VectorXd& theta) const;

  std::uint64_t eval_count() const { return count_->load(std::memory_order_relaxed); }
  void reset_count() const { count_->store(0, std::memory_order_relaxed); }

  // q scaled by exp(log_factor), with its own counter.
  TargetDensity rescaled(double log_factor) const;

 private:
  int dim_;
  LogDensity f_;
  Gradient grad_;
  std::shared_ptr<std::atomic<std::uint64_t>> count_;
};

}  // namespace warpu
