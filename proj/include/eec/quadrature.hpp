#pragma once

// Globally adaptive Gauss-Kronrod (10/21) quadrature with QUADPACK-style
// error estimates, plus the semi-infinite and nested two-dimensional forms
// used throughout the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

namespace eec::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;
  double abs_integral = 0.0;  // integral of |f|, used for absolute floors
  std::size_t evaluations = 0;
  bool converged = true;
};

struct Options {
  double rel_tol = 1e-10;
  double abs_tol = 0.0;
  double abs_integral_tol = 0.0;  // relative to the integral of |f|
  std::size_t max_evals = 200'000;
};

namespace detail {

inline constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};

inline constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208323221823, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};

// Gauss weights for the odd-indexed Kronrod nodes.
inline constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Panel {
  double a, b, value, error, abs_value;
  bool operator<(const Panel& o) const {
    if (error != o.error) return error < o.error;
    return a > o.a;  // deterministic tie-break
  }
};

template <class F>
Panel gk21(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kWgk[10];
  double abs_k = std::abs(kronrod);
  double gauss = 0.0;
  std::array<double, 10> f1{}, f2{};
  for (int j = 0; j < 10; ++j) {
    const double dx = half * kXgk[j];
    f1[j] = f(center - dx);
    f2[j] = f(center + dx);
    const double sum = f1[j] + f2[j];
    kronrod += kWgk[j] * sum;
    abs_k += kWgk[j] * (std::abs(f1[j]) + std::abs(f2[j]));
    if (j % 2 == 1) gauss += kWg[j / 2] * sum;
  }
  const double mean = 0.5 * kronrod;
  double asc = kWgk[10] * std::abs(fc - mean);
  for (int j = 0; j < 10; ++j) asc += kWgk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));

  const double value = kronrod * half;
  const double abs_value = abs_k * std::abs(half);
  asc *= std::abs(half);
  double err = std::abs((kronrod - gauss) * half);
  if (asc != 0.0 && err != 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (abs_value > std::numeric_limits<double>::min() / (50 * eps))
    err = std::max(err, 50 * eps * abs_value);
  return {a, b, value, err, abs_value};
}

}  // namespace detail

/// Integrates f over [a, b] by repeatedly bisecting the panel with the
/// largest error estimate until the total error meets the tolerance or the
/// evaluation budget runs out. Never throws; check `converged`.
template <class F>
Result integrate(F&& f, double a, double b, const Options& opt = {}) {
  Result res;
  if (a == b) return res;
  std::priority_queue<detail::Panel> heap;
  heap.push(detail::gk21(f, a, b));
  res.evaluations = 21;
  double total = heap.top().value;
  double total_err = heap.top().error;
  double total_abs = heap.top().abs_value;

  auto satisfied = [&] {
    const double target =
        std::max({opt.abs_tol, opt.rel_tol * std::abs(total), opt.abs_integral_tol * total_abs});
    return total_err <= target;
  };

  while (!satisfied()) {
    if (res.evaluations + 42 > opt.max_evals) {
      res.converged = false;
      break;
    }
    const detail::Panel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {  // interval exhausted
      res.converged = false;
      break;
    }
    heap.pop();
    const detail::Panel left = detail::gk21(f, worst.a, mid);
    const detail::Panel right = detail::gk21(f, mid, worst.b);
    res.evaluations += 42;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    total_abs += left.abs_value + right.abs_value - worst.abs_value;
    heap.push(left);
    heap.push(right);
  }

  // Re-sum in a fixed order to remove drift from the running updates.
  std::vector<detail::Panel> panels;
  panels.reserve(heap.size());
  while (!heap.empty()) {
    panels.push_back(heap.top());
    heap.pop();
  }
  std::sort(panels.begin(), panels.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
  res.value = res.error = res.abs_integral = 0.0;
  for (const auto& p : panels) {
    res.value += p.value;
    res.error += p.error;
    res.abs_integral += p.abs_value;
  }
  if (!res.converged)
    res.converged = res.error <= std::max({opt.abs_tol, opt.rel_tol * std::abs(res.value),
                                           opt.abs_integral_tol * res.abs_integral});
  return res;
}

/// Integrates f over [a, inf) through x = a + scale * s / (1 - s).
template <class F>
Result integrate_to_infinity(F&& f, double a, double scale, const Options& opt = {}) {
  auto mapped = [&](double s) {
    const double one_minus = 1.0 - s;
    const double x = a + scale * s / one_minus;
    const double jac = scale / (one_minus * one_minus);
    const double v = f(x);
    return v == 0.0 ? 0.0 : v * jac;
  };
  return integrate(mapped, 0.0, 1.0, opt);
}

/// Nested adaptive integration of f(x, y) over a <= x <= b,
/// lo(x) <= y <= hi(x). The inner tolerance should be tighter than the outer.
template <class F, class Lo, class Hi>
Result integrate_nested(F&& f, double a, double b, Lo&& lo, Hi&& hi, const Options& outer,
                        const Options& inner) {
  std::size_t inner_evals = 0;
  double inner_err = 0.0;
  auto slice = [&](double x) {
    auto fy = [&](double y) { return f(x, y); };
    const Result r = integrate(fy, lo(x), hi(x), inner);
    inner_evals += r.evaluations;
    inner_err = std::max(inner_err, r.abs_integral > 0 ? r.error / r.abs_integral : 0.0);
    return r.value;
  };
  Result res = integrate(slice, a, b, outer);
  res.evaluations = inner_evals;
  res.error += inner_err * res.abs_integral;
  return res;
}

}  // namespace eec::quad
