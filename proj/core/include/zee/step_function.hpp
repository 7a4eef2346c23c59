#pragma once

#include <algorithm>
#include <type_traits>
#include <utility>
#include <vector>

#include "zee/errors.hpp"

namespace zee {

namespace detail {
template <class T>
T zero_like(const T& x) {
  if constexpr (std::is_arithmetic_v<T>) {
    (void)x;
    return T(0);
  } else {
    T z = x;
    z.setZero();
    return z;
  }
}
}  // namespace detail

// Which side of a knot a segment value applies to.
//   Cadlag: value_j holds on [knot_{j-1}, knot_j)  (right-continuous, counting-process style)
//   Caglad: value_j holds on (knot_{j-1}, knot_j]  (left-continuous, at-risk style)
enum class Continuity { Cadlag, Caglad };

// Piecewise-constant function on [0, tau] with finitely many knots.
// values has one more entry than knots: values[0] is the segment touching 0,
// values[j+1] the segment after knot j. Integration is exact segment-by-segment
// summation and does not depend on the continuity convention.
template <class T>
class StepFunction {
 public:
  StepFunction(double tau, std::vector<double> knots, std::vector<T> values,
               Continuity cont = Continuity::Cadlag)
      : tau_(tau),
        knots_(std::move(knots)),
        values_(std::move(values)),
        cont_(cont) {
    if (tau_ < 0.0) fail(ErrorCode::DomainError, "domain end must be >= 0");
    if (values_.size() != knots_.size() + 1)
      fail(ErrorCode::DomainError, "step function needs one more value than knots");
    for (std::size_t j = 0; j < knots_.size(); ++j) {
      if (knots_[j] < 0.0 || knots_[j] > tau_)
        fail(ErrorCode::DomainError, "knot outside [0, tau]");
      if (j > 0 && !(knots_[j - 1] < knots_[j]))
        fail(ErrorCode::DomainError, "knots must be strictly increasing");
    }
  }

  static StepFunction constant(double tau, T value) {
    return StepFunction(tau, {}, {std::move(value)});
  }

  double domain_end() const { return tau_; }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<T>& segment_values() const { return values_; }
  Continuity continuity() const { return cont_; }

  const T& operator()(double t) const {
    if (t < 0.0 || t > tau_)
      fail(ErrorCode::DomainError, "evaluation outside [0, tau]");
    return values_[segment_index(t)];
  }

  // Exact integral over [a, b]: sum of value * overlap length per segment.
  T integrate(double a, double b) const {
    if (a < 0.0 || b > tau_ || a > b)
      fail(ErrorCode::DomainError, "integration range outside [0, tau]");
    T acc = detail::zero_like(values_[0]);
    double lo = a;
    for (std::size_t j = 0; j <= knots_.size(); ++j) {
      const double hi = (j < knots_.size()) ? std::min(knots_[j], b) : b;
      if (hi > lo) acc += values_[j] * (hi - lo);
      lo = std::max(lo, hi);
      if (lo >= b) break;
    }
    return acc;
  }

  // Jump sizes at each knot (value after minus value before); as a measure,
  // the atoms of the Lebesgue-Stieltjes derivative sit at the knots.
  std::vector<std::pair<double, T>> increments() const {
    std::vector<std::pair<double, T>> out;
    out.reserve(knots_.size());
    for (std::size_t j = 0; j < knots_.size(); ++j)
      out.emplace_back(knots_[j], values_[j + 1] - values_[j]);
    return out;
  }

  template <class F>
  auto map(F&& f) const {
    using U = std::decay_t<decltype(f(values_[0]))>;
    std::vector<U> vals;
    vals.reserve(values_.size());
    for (const auto& v : values_) vals.push_back(f(v));
    return StepFunction<U>(tau_, knots_, std::move(vals), cont_);
  }

 private:
  std::size_t segment_index(double t) const {
    if (cont_ == Continuity::Cadlag) {
      // segment = number of knots <= t
      return static_cast<std::size_t>(
          std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin());
    }
    // caglad: segment = number of knots < t
    return static_cast<std::size_t>(
        std::lower_bound(knots_.begin(), knots_.end(), t) - knots_.begin());
  }

  double tau_;
  std::vector<double> knots_;
  std::vector<T> values_;
  Continuity cont_;
};

// Free-function form used throughout the tests.
template <class T>
T integrate(const StepFunction<T>& f, double a, double b) {
  return f.integrate(a, b);
}

}  // namespace zee
