#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <span>
#include <string>

namespace warpu {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLog2Pi = 1.8378770664093454836;

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

template <typename Range>
double log_sum_exp(const Range& xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf || std::isinf(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_sum_exp(const Eigen::VectorXd& v) {
  return log_sum_exp(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

// Normalise log weights into probabilities. Returns the log normaliser.
inline double normalize_log_weights(const Eigen::VectorXd& logw, Eigen::VectorXd& probs) {
  const double lse = log_sum_exp(logw);
  probs.resize(logw.size());
  for (Eigen::Index i = 0; i < logw.size(); ++i) probs[i] = (logw[i] == kNegInf) ? 0.0 : std::exp(logw[i] - lse);
  return lse;
}

// log of the standard d-variate normal density.
inline double log_std_normal(const Eigen::VectorXd& z) {
  return -0.5 * static_cast<double>(z.size()) * kLog2Pi - 0.5 * z.squaredNorm();
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Index k drawn with probability probs[k]; u in (0, 1].
inline int draw_index(const Eigen::VectorXd& probs, double u) {
  double acc = 0.0;
  const double total = probs.sum();
  const double target = u * total;
  int last_positive = -1;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    last_positive = static_cast<int>(k);
    acc += probs[k];
    if (target <= acc) return static_cast<int>(k);
  }
  return last_positive;
}

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace warpu
