#pragma once

// Bivariate Gaussian process models on [0,1] x [0,1] with closed-form
// covariance derivatives up to total order four.

#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "eec/errors.hpp"

namespace eec {

// ---------------------------------------------------------------------------
// Stationary kernels
// ---------------------------------------------------------------------------

/// C(tau) = exp(-tau^2 / (2 scale^2)).
struct SquaredExponential {
  double scale = 1.0;
};

/// C(tau) = sum_k w_k cos(omega_k tau), weights summing to one.
struct CosineMixture {
  std::vector<double> weights;
  std::vector<double> frequencies;
};

class Kernel {
 public:
  using Family = std::variant<SquaredExponential, CosineMixture>;

  Kernel() : family_(SquaredExponential{1.0}) {}
  explicit Kernel(Family f) : family_(std::move(f)) {}

  static Kernel squared_exponential(double scale) {
    if (!(scale > 0.0)) throw ArgumentError("squared-exponential scale must be positive");
    return Kernel(SquaredExponential{scale});
  }

  static Kernel cosine_mixture(std::vector<double> weights, std::vector<double> frequencies) {
    if (weights.empty() || weights.size() != frequencies.size())
      throw ArgumentError("cosine mixture needs matching, non-empty weight and frequency lists");
    for (double w : weights)
      if (!(w > 0.0)) throw ArgumentError("cosine mixture weights must be positive");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("cosine mixture weights must sum to 1");
    return Kernel(CosineMixture{std::move(weights), std::move(frequencies)});
  }

  const Family& family() const { return family_; }

  /// d^order C / d tau^order at lag.
  double derivative(double lag, int order) const {
    if (order < 0 || order > 4)
      throw ArgumentError("kernel derivative order must be in 0..4, got " + std::to_string(order));
    return std::visit([&](const auto& k) { return eval(k, lag, order); }, family_);
  }

  /// Variance of the derivative process, -C''(0).
  double lambda() const { return -derivative(0.0, 2); }

  std::string describe() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, SquaredExponential>) {
            return "sqexp(" + std::to_string(k.scale) + ")";
          } else {
            return "cosine(" + std::to_string(k.weights.size()) + " terms)";
          }
        },
        family_);
  }

 private:
  static double eval(const SquaredExponential& k, double lag, int order) {
    // d^n/dtau^n exp(-x^2/2), x = tau/scale, is (-1/scale)^n He_n(x) exp(-x^2/2).
    const double x = lag / k.scale;
    const double x2 = x * x;
    const double base = std::exp(-0.5 * x2);
    const double inv = 1.0 / k.scale;
    switch (order) {
      case 0: return base;
      case 1: return -inv * x * base;
      case 2: return inv * inv * (x2 - 1.0) * base;
      case 3: return -inv * inv * inv * x * (x2 - 3.0) * base;
      default: return inv * inv * inv * inv * (x2 * x2 - 6.0 * x2 + 3.0) * base;
    }
  }

  static double eval(const CosineMixture& k, double lag, int order) {
    double sum = 0.0;
    for (std::size_t i = 0; i < k.weights.size(); ++i) {
      const double w = k.frequencies[i];
      const double p = std::pow(w, order);
      const double phase = w * lag;
      switch (order) {
        case 0: sum += k.weights[i] * std::cos(phase); break;
        case 1: sum -= k.weights[i] * p * std::sin(phase); break;
        case 2: sum -= k.weights[i] * p * std::cos(phase); break;
        case 3: sum += k.weights[i] * p * std::sin(phase); break;
        default: sum += k.weights[i] * p * std::cos(phase); break;
      }
    }
    return sum;
  }

  Family family_;
};

inline double kernel_eval(const Kernel& kernel, double lag, int order) {
  return kernel.derivative(lag, order);
}

// ---------------------------------------------------------------------------
// Cross-correlation r(t, s) = E{X(t) Y(s)}
// ---------------------------------------------------------------------------

/// Y(s) = c X(s + d) + sqrt(1 - c^2) Z(s): r(t, s) = c C(t - s - d).
struct ShiftMixture {
  double c = 0.5;
  double d = 0.0;
  Kernel base;
};

/// Y(s) = a(s) X(t*) + independent remainder, a(s) = c C_s(s - s*):
/// r(t, s) = c C_t(t - t*) C_s(s - s*).
struct PointAnchor {
  double c = 0.5;
  double t_star = 0.5;
  double s_star = 0.5;
  Kernel t_kernel;
  Kernel s_kernel;
};

/// r identically zero.
struct Independent {};

using CrossCorrelation = std::variant<ShiftMixture, PointAnchor, Independent>;

namespace detail {

inline double cross_partial(const CrossCorrelation& cross, double t, double s, int at, int bs) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ShiftMixture>) {
          const double sign = (bs % 2 == 0) ? 1.0 : -1.0;
          return f.c * sign * f.base.derivative(t - s - f.d, at + bs);
        } else if constexpr (std::is_same_v<T, PointAnchor>) {
          return f.c * f.t_kernel.derivative(t - f.t_star, at) *
                 f.s_kernel.derivative(s - f.s_star, bs);
        } else {
          return 0.0;
        }
      },
      cross);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bivariate model
// ---------------------------------------------------------------------------

enum class Process { X, Y };

/// One entry of a joint covariance request: the `order`-th derivative of a
/// process at a point.
struct PointSpec {
  Process process;
  double point;
  int order;
};

/// Centered, unit-variance pair (X(t), Y(s)) on [0,1]^2. Immutable.
class BivariateModel {
 public:
  BivariateModel(Kernel kernel_x, Kernel kernel_y, CrossCorrelation cross, std::string label)
      : kx_(std::move(kernel_x)), ky_(std::move(kernel_y)), cross_(std::move(cross)),
        label_(std::move(label)) {}

  const Kernel& kernel_x() const { return kx_; }
  const Kernel& kernel_y() const { return ky_; }
  const CrossCorrelation& cross() const { return cross_; }
  const std::string& label() const { return label_; }

  /// True when this object is the X<->Y relabelling of the stored cross form.
  bool transposed() const { return transposed_; }

  double lambda_x() const { return kx_.lambda(); }
  double lambda_y() const { return ky_.lambda(); }

  bool independent() const { return std::holds_alternative<Independent>(cross_); }

  /// d^order_t d^order_s r(t, s).
  double cross_partial(double t, double s, int order_t, int order_s) const {
    if (order_t < 0 || order_s < 0 || order_t + order_s > 4)
      throw ArgumentError("cross derivative orders must be non-negative with total <= 4");
    return transposed_ ? detail::cross_partial(cross_, s, t, order_s, order_t)
                       : detail::cross_partial(cross_, t, s, order_t, order_s);
  }

  double r(double t, double s) const { return cross_partial(t, s, 0, 0); }

  /// Swap the roles of X and Y: r(t, s) becomes r(s, t).
  BivariateModel transpose() const {
    BivariateModel m(ky_, kx_, cross_, label_ + "^T");
    m.transposed_ = !transposed_;
    if (m.transposed_ == false) m.label_ = untransposed_label();
    return m;
  }

  const Kernel& kernel(Process p) const { return p == Process::X ? kx_ : ky_; }

 private:
  std::string untransposed_label() const {
    if (label_.size() >= 2 && label_.compare(label_.size() - 2, 2, "^T") == 0)
      return label_.substr(0, label_.size() - 2);
    return label_;
  }

  Kernel kx_;
  Kernel ky_;
  CrossCorrelation cross_;
  std::string label_;
  bool transposed_ = false;
};

inline double cross_eval(const BivariateModel& model, double t, double s, int order_t,
                         int order_s) {
  return model.cross_partial(t, s, order_t, order_s);
}

/// Covariance of two derivative values of the model.
inline double covariance(const BivariateModel& model, const PointSpec& a, const PointSpec& b) {
  if (a.process == b.process) {
    const double sign = (a.order % 2 == 0) ? 1.0 : -1.0;
    return sign * model.kernel(a.process).derivative(b.point - a.point, a.order + b.order);
  }
  if (a.process == Process::X) return model.cross_partial(a.point, b.point, a.order, b.order);
  return model.cross_partial(b.point, a.point, b.order, a.order);
}

/// Joint covariance of the requested derivative values. Entry (i, j) is
/// Cov(specs[i], specs[j]); the result is exactly symmetric.
inline Eigen::MatrixXd joint_cov(const BivariateModel& model, std::span<const PointSpec> specs) {
  const auto n = static_cast<Eigen::Index>(specs.size());
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& a = specs[static_cast<std::size_t>(i)];
    if (a.order < 0 || a.order > 2)
      throw ArgumentError("joint_cov supports derivative orders 0..2");
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = covariance(model, a, specs[static_cast<std::size_t>(j)]);
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  return cov;
}

inline Eigen::MatrixXd joint_cov(const BivariateModel& model,
                                 std::initializer_list<PointSpec> specs) {
  return joint_cov(model, std::span<const PointSpec>(specs.begin(), specs.size()));
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names = {
      "diagonal",          "interior-point", "corner-nondegenerate", "corner-semidegenerate",
      "corner-degenerate", "edge-point",     "edge-point-degenerate", "independent"};
  return names;
}

/// Shipped models, one per asymptotic regime.
///   diagonal               r = 0.5 C(t - s): maximum along t = s
///   interior-point         r = 0.5 C(t - .5) C(s - .5)
///   corner-nondegenerate   r = 0.6 C(t - s - 1.5): maximum at (1, 0)
///   corner-semidegenerate  r = 0.5 C(t) C(s + .5): (0, 0), dr/dt = 0, dr/ds != 0
///   corner-degenerate      r = 0.5 C(t) C(s): (0, 0), both partials zero
///   edge-point             r = 0.5 C(t - .5) C(s + .5): (0.5, 0), dr/ds != 0
///   edge-point-degenerate  r = 0.5 C(t - .5) C(s): (0.5, 0), dr/ds = 0
///   independent            r = 0
/// C is the unit squared-exponential kernel, also used for both marginals.
inline BivariateModel fixture(std::string_view name) {
  const Kernel se = Kernel::squared_exponential(1.0);
  auto anchor = [&](double t_star, double s_star) {
    return BivariateModel(se, se, PointAnchor{0.5, t_star, s_star, se, se}, std::string(name));
  };
  if (name == "diagonal") return BivariateModel(se, se, ShiftMixture{0.5, 0.0, se}, "diagonal");
  if (name == "interior-point") return anchor(0.5, 0.5);
  if (name == "corner-nondegenerate")
    return BivariateModel(se, se, ShiftMixture{0.6, 1.5, se}, "corner-nondegenerate");
  if (name == "corner-semidegenerate") return anchor(0.0, -0.5);
  if (name == "corner-degenerate") return anchor(0.0, 0.0);
  if (name == "edge-point") return anchor(0.5, -0.5);
  if (name == "edge-point-degenerate") return anchor(0.5, 0.0);
  if (name == "independent") return BivariateModel(se, se, Independent{}, "independent");

  std::string valid;
  for (const auto& n : fixture_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ArgumentError("unknown fixture '" + std::string(name) + "'; valid names: " + valid);
}

}  // namespace eec
