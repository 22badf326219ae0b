#pragma once

// Shared vocabulary types for the starcut library.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace starcut {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when an operation receives input that violates its preconditions.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a randomized procedure exhausts its iteration or sample cap.
class AlgorithmFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidInput(message);
}

/// Smallest positive normal double; Gaussian widths are floored here.
inline constexpr double kMinWidth = std::numeric_limits<double>::min();
inline const double kLogMinWidth = std::log(std::numeric_limits<double>::min());

/// exp() of a log-domain width, floored at the smallest normal double.
inline double width_from_log(double log_width) {
  return log_width <= kLogMinWidth ? kMinWidth : std::exp(log_width);
}

/// log of the volume of the unit n-ball.
inline double log_unit_ball_volume(int n) {
  return 0.5 * n * std::log(M_PI) - std::lgamma(0.5 * n + 1.0);
}

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace starcut
