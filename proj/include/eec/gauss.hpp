#pragma once

// Dense Gaussian computations: pivoted factorization, conditioning,
// orthant probabilities (dims 1..4), truncated moments and the bivariate
// corner-tail integral.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eec/errors.hpp"
#include "eec/estimate.hpp"
#include "eec/normal.hpp"
#include "eec/quadrature.hpp"
#include "eec/tolerances.hpp"

namespace eec {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Factorizations
// ---------------------------------------------------------------------------

/// Symmetric factorization with complete diagonal pivoting, stopped once the
/// largest remaining pivot is negligible. `factor` is n x rank in the
/// original row order, so `factor * factor^T` approximates the input.
struct PivotedFactor {
  Eigen::MatrixXd factor;
  std::vector<Eigen::Index> order;  // pivot sequence
  Eigen::Index rank = 0;
  double min_pivot = kInf;   // smallest pivot or residual indicator
  double max_pivot = 0.0;
};

inline PivotedFactor pivoted_cholesky(const Eigen::MatrixXd& a, double relative_stop = 1e-14) {
  const Eigen::Index n = a.rows();
  PivotedFactor out;
  out.factor = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd diag = a.diagonal();
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  const double scale = std::max(1.0, n > 0 ? diag.cwiseAbs().maxCoeff() : 1.0);
  const double stop = relative_stop * scale;

  Eigen::Index k = 0;
  for (; k < n; ++k) {
    Eigen::Index p = -1;
    double best = -kInf;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!used[static_cast<std::size_t>(i)] && diag(i) > best) {
        best = diag(i);
        p = i;
      }
    if (best <= stop) break;
    used[static_cast<std::size_t>(p)] = true;
    out.order.push_back(p);
    out.min_pivot = std::min(out.min_pivot, best);
    out.max_pivot = std::max(out.max_pivot, best);
    const double root = std::sqrt(best);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)] && i != p) continue;
      double v = a(i, p);
      for (Eigen::Index j = 0; j < k; ++j) v -= out.factor(i, j) * out.factor(p, j);
      out.factor(i, k) = (i == p) ? root : v / root;
    }
    for (Eigen::Index i = 0; i < n; ++i)
      if (!used[static_cast<std::size_t>(i)]) diag(i) -= out.factor(i, k) * out.factor(i, k);
  }
  out.rank = k;
  out.factor.conservativeResize(n, k);

  if (k < n) {
    // Residual Schur complement: a PSD remainder has every entry bounded by
    // the stop level; anything else is recorded as a negative pivot.
    std::vector<Eigen::Index> rest;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!used[static_cast<std::size_t>(i)]) rest.push_back(i);
    double worst = kInf;
    for (std::size_t x = 0; x < rest.size(); ++x) {
      const Eigen::Index i = rest[x];
      worst = std::min(worst, diag(i));
      for (std::size_t y = x + 1; y < rest.size(); ++y) {
        const Eigen::Index j = rest[y];
        const double s = a(i, j) - out.factor.row(i).dot(out.factor.row(j));
        if (std::abs(s) > std::sqrt(std::max(diag(i), 0.0) * std::max(diag(j), 0.0)) + stop)
          worst = std::min(worst, -std::abs(s));
      }
    }
    out.min_pivot = std::min(out.min_pivot, worst);
  }
  if (n == 0) out.min_pivot = 0.0;
  return out;
}

/// Plain Cholesky that reports the first pivot below `floor`.
inline Eigen::MatrixXd cholesky_checked(const Eigen::MatrixXd& a, double floor,
                                        const char* context = "covariance") {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > floor)) {
      throw DegeneracyError(std::string(context) + " is degenerate: pivot " + std::to_string(j) +
                                " = " + std::to_string(d),
                            static_cast<std::size_t>(j), d);
    }
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  return l;
}

// ---------------------------------------------------------------------------
// Conditioning
// ---------------------------------------------------------------------------

/// Law of the unobserved block given the observed block of a centered
/// Gaussian vector: E{u | o} = mean_map * o, Cov{u | o} = residual_cov.
struct ConditionalLaw {
  std::vector<Eigen::Index> unobserved;
  std::vector<Eigen::Index> observed;
  Eigen::MatrixXd mean_map;      // |u| x |o|
  Eigen::MatrixXd residual_cov;  // |u| x |u|
};

inline ConditionalLaw condition(const Eigen::MatrixXd& cov, std::span<const Eigen::Index> observed,
                                double pivot_floor = 1e-12) {
  const Eigen::Index n = cov.rows();
  ConditionalLaw law;
  std::vector<bool> is_obs(static_cast<std::size_t>(n), false);
  for (Eigen::Index o : observed) {
    if (o < 0 || o >= n) throw ArgumentError("observed index out of range");
    if (is_obs[static_cast<std::size_t>(o)]) throw ArgumentError("duplicate observed index");
    is_obs[static_cast<std::size_t>(o)] = true;
  }
  law.observed.assign(observed.begin(), observed.end());
  for (Eigen::Index i = 0; i < n; ++i)
    if (!is_obs[static_cast<std::size_t>(i)]) law.unobserved.push_back(i);

  const auto nu = static_cast<Eigen::Index>(law.unobserved.size());
  const auto no = static_cast<Eigen::Index>(law.observed.size());
  Eigen::MatrixXd uu(nu, nu), uo(nu, no), oo(no, no);
  for (Eigen::Index i = 0; i < nu; ++i) {
    for (Eigen::Index j = 0; j < nu; ++j)
      uu(i, j) = cov(law.unobserved[static_cast<std::size_t>(i)], law.unobserved[static_cast<std::size_t>(j)]);
    for (Eigen::Index j = 0; j < no; ++j)
      uo(i, j) = cov(law.unobserved[static_cast<std::size_t>(i)], law.observed[static_cast<std::size_t>(j)]);
  }
  for (Eigen::Index i = 0; i < no; ++i)
    for (Eigen::Index j = 0; j < no; ++j)
      oo(i, j) = cov(law.observed[static_cast<std::size_t>(i)], law.observed[static_cast<std::size_t>(j)]);

  if (no == 0) {
    law.mean_map.resize(nu, 0);
    law.residual_cov = uu;
    return law;
  }
  Eigen::MatrixXd l;
  try {
    l = cholesky_checked(oo, pivot_floor, "observed block");
  } catch (const DegeneracyError& e) {
    const std::size_t idx = static_cast<std::size_t>(law.observed[e.pivot_index()]);
    throw DegeneracyError("observed block is singular at covariance index " + std::to_string(idx),
                          idx, e.pivot());
  }
  // W = L^{-1} uo^T, so uo oo^{-1} uo^T = W^T W.
  const Eigen::MatrixXd w = l.triangularView<Eigen::Lower>().solve(uo.transpose());
  law.mean_map = l.transpose().triangularView<Eigen::Upper>().solve(w).transpose();
  Eigen::MatrixXd res = uu - w.transpose() * w;
  law.residual_cov = 0.5 * (res + res.transpose());
  return law;
}

inline ConditionalLaw condition(const Eigen::MatrixXd& cov,
                                std::initializer_list<Eigen::Index> observed,
                                double pivot_floor = 1e-12) {
  return condition(cov, std::span<const Eigen::Index>(observed.begin(), observed.size()),
                   pivot_floor);
}

// ---------------------------------------------------------------------------
// Bivariate normal upper orthant
// ---------------------------------------------------------------------------

/// P{Z1 >= h, Z2 >= k} for standard normals with correlation rho.
/// Non-negative rho uses the arcsine-angle integral (all terms positive);
/// negative rho integrates the conditional tail directly to avoid cancelling
/// against the product of marginals.
inline double bvn_upper(double h, double k, double rho) {
  if (h == kInf || k == kInf) return 0.0;
  if (h == -kInf) return k == -kInf ? 1.0 : norm_sf(k);
  if (k == -kInf) return norm_sf(h);
  if (rho >= 1.0) return norm_sf(std::max(h, k));
  if (rho <= -1.0) return std::max(0.0, norm_sf(h) - norm_cdf(k));
  if (rho == 0.0) return norm_sf(h) * norm_sf(k);

  quad::Options opt;
  opt.rel_tol = 1e-13;
  opt.max_evals = 20'000;
  if (rho > 0.0) {
    const double diff2 = (h - k) * (h - k);
    const double hk = h * k;
    auto f = [&](double theta) {
      const double sn = std::sin(theta);
      const double cs2 = (1.0 - sn) * (1.0 + sn);
      if (cs2 <= 0.0) return diff2 == 0.0 ? std::exp(-0.5 * hk) : 0.0;
      return std::exp(-0.5 * diff2 / cs2 - hk / (1.0 + sn));
    };
    const auto r = quad::integrate(f, 0.0, std::asin(rho), opt);
    return norm_sf(h) * norm_sf(k) + r.value / (2.0 * std::numbers::pi);
  }
  // integrate over the variable with the larger threshold
  if (k > h) std::swap(h, k);
  const double sd = std::sqrt((1.0 - rho) * (1.0 + rho));
  auto g = [&](double x) { return norm_pdf(x) * norm_sf((k - rho * x) / sd); };
  const double start = std::max(h, -40.0);
  const double scale = 1.0 / std::max(1.0, start);
  return quad::integrate_to_infinity(g, start, scale, opt).value;
}

// ---------------------------------------------------------------------------
// Multivariate normal orthant probabilities (dims 1..4)
// ---------------------------------------------------------------------------

namespace detail {

inline void require_square(const Eigen::MatrixXd& cov, std::size_t n, const char* what) {
  if (cov.rows() != cov.cols() || static_cast<std::size_t>(cov.rows()) != n)
    throw ArgumentError(std::string(what) + ": covariance and bound sizes differ");
}

/// Quasi-Monte Carlo separation-of-variables estimate of P{xi >= lower},
/// xi ~ N(0, cov), using variable prioritization and randomly shifted
/// Richtmyer lattices with a fixed shift seed.
inline Estimate lattice_orthant(const Eigen::MatrixXd& cov, const std::vector<double>& lower,
                                const Tolerances& tol) {
  const int d = static_cast<int>(lower.size());
  Eigen::MatrixXd c = cov;
  std::vector<double> a = lower;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
  std::vector<double> y(static_cast<std::size_t>(d), 0.0);

  // Prioritize the variable with the smallest conditional tail probability,
  // evaluated at the conditional means of those already placed.
  for (int k = 0; k < d; ++k) {
    int best = k;
    double best_p = kInf;
    for (int i = k; i < d; ++i) {
      double var = c(i, i);
      double shift = 0.0;
      for (int j = 0; j < k; ++j) {
        var -= l(i, j) * l(i, j);
        shift += l(i, j) * y[static_cast<std::size_t>(j)];
      }
      if (!(var > tol.observed_pivot))
        throw DegeneracyError("orthant covariance is degenerate", static_cast<std::size_t>(i), var);
      const double p = norm_sf((a[static_cast<std::size_t>(i)] - shift) / std::sqrt(var));
      if (p < best_p) {
        best_p = p;
        best = i;
      }
    }
    if (best != k) {
      c.row(k).swap(c.row(best));
      c.col(k).swap(c.col(best));
      l.row(k).swap(l.row(best));
      std::swap(a[static_cast<std::size_t>(k)], a[static_cast<std::size_t>(best)]);
    }
    double var = c(k, k);
    double shift = 0.0;
    for (int j = 0; j < k; ++j) {
      var -= l(k, j) * l(k, j);
      shift += l(k, j) * y[static_cast<std::size_t>(j)];
    }
    l(k, k) = std::sqrt(var);
    for (int i = k + 1; i < d; ++i) {
      double v = c(i, k);
      for (int j = 0; j < k; ++j) v -= l(i, j) * l(k, j);
      l(i, k) = v / l(k, k);
    }
    const double z = (a[static_cast<std::size_t>(k)] - shift) / l(k, k);
    const double q = norm_sf(z);
    y[static_cast<std::size_t>(k)] = q > 0.0 ? norm_pdf(z) / q : z;
  }

  auto integrand = [&](const std::array<double, 3>& w) {
    std::array<double, 4> ys{};
    double f = 1.0;
    for (int k = 0; k < d; ++k) {
      double shift = 0.0;
      for (int j = 0; j < k; ++j) shift += l(k, j) * ys[static_cast<std::size_t>(j)];
      const double q = norm_sf((a[static_cast<std::size_t>(k)] - shift) / l(k, k));
      f *= q;
      if (f == 0.0) return 0.0;
      if (k + 1 < d) {
        const double tail = std::max(w[static_cast<std::size_t>(k)] * q,
                                     std::numeric_limits<double>::min());
        ys[static_cast<std::size_t>(k)] = norm_sf_inverse(tail);
      }
    }
    return f;
  };

  constexpr int kShifts = 12;
  const std::array<double, 3> alpha = {std::sqrt(2.0), std::sqrt(3.0), std::sqrt(5.0)};
  std::mt19937_64 rng(0x5eed5eedULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::array<std::array<double, 3>, kShifts> shifts{};
  for (auto& s : shifts)
    for (auto& v : s) v = unif(rng);

  Estimate est;
  est.method = Method::Lattice;
  std::array<double, kShifts> sums{};
  std::size_t done = 0;
  std::size_t points = 1024;
  constexpr std::size_t kMaxPoints = std::size_t{1} << 18;
  while (true) {
    for (int s = 0; s < kShifts; ++s) {
      double acc = 0.0;
      for (std::size_t i = done; i < points; ++i) {
        std::array<double, 3> w{};
        for (int j = 0; j + 1 < d; ++j) {
          const double x = std::fmod(static_cast<double>(i + 1) * alpha[static_cast<std::size_t>(j)] +
                                         shifts[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)],
                                     1.0);
          w[static_cast<std::size_t>(j)] = std::abs(2.0 * x - 1.0);
        }
        acc += integrand(w);
      }
      sums[static_cast<std::size_t>(s)] += acc;
    }
    done = points;
    double mean = 0.0;
    for (double s : sums) mean += s / static_cast<double>(points);
    mean /= kShifts;
    double var = 0.0;
    for (double s : sums) {
      const double dev = s / static_cast<double>(points) - mean;
      var += dev * dev;
    }
    var /= (kShifts - 1);
    est.value = mean;
    est.error = 3.0 * std::sqrt(var / kShifts);
    est.n = points * kShifts;
    const bool ok = est.error <= tol.mvn_abs && est.error <= tol.mvn_rel * std::abs(mean);
    if (ok || mean == 0.0) break;
    if (points >= kMaxPoints) {
      est.low_confidence = true;
      break;
    }
    points *= 2;
  }
  return est;
}

/// P{xi >= lower} for a centered law by recursive conditioning on the most
/// restrictive coordinate, integrating it out by adaptive quadrature until
/// two coordinates remain (evaluated by bvn_upper).
inline quad::Result orthant_recursive(const Eigen::MatrixXd& c, const std::vector<double>& a,
                                      double rel_tol) {
  const auto d = static_cast<Eigen::Index>(a.size());
  quad::Result out;
  if (d == 1) {
    out.value = norm_sf(a[0] / std::sqrt(c(0, 0)));
    return out;
  }
  if (d == 2) {
    const double s0 = std::sqrt(c(0, 0)), s1 = std::sqrt(c(1, 1));
    out.value = bvn_upper(a[0] / s0, a[1] / s1, std::clamp(c(0, 1) / (s0 * s1), -1.0, 1.0));
    out.error = 1e-14 * out.value;
    return out;
  }
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < d; ++i)
    if (a[static_cast<std::size_t>(i)] / std::sqrt(c(i, i)) >
        a[static_cast<std::size_t>(k)] / std::sqrt(c(k, k)))
      k = i;
  const double sk = std::sqrt(c(k, k));
  std::vector<Eigen::Index> rest;
  for (Eigen::Index i = 0; i < d; ++i)
    if (i != k) rest.push_back(i);
  const auto m = d - 1;
  Eigen::MatrixXd sub(m, m);
  std::vector<double> beta(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index pi = rest[static_cast<std::size_t>(i)];
    beta[static_cast<std::size_t>(i)] = c(pi, k) / c(k, k);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index pj = rest[static_cast<std::size_t>(j)];
      sub(i, j) = c(pi, pj) - c(pi, k) * c(pj, k) / c(k, k);
    }
  }
  sub = 0.5 * (sub + sub.transpose());
  std::vector<double> shifted(static_cast<std::size_t>(m));
  double inner_err = 0.0;
  auto f = [&](double z) {  // z standardized value of coordinate k
    const double x = sk * z;
    for (Eigen::Index i = 0; i < m; ++i)
      shifted[static_cast<std::size_t>(i)] =
          a[static_cast<std::size_t>(rest[static_cast<std::size_t>(i)])] - beta[static_cast<std::size_t>(i)] * x;
    const quad::Result r = orthant_recursive(sub, shifted, rel_tol * 0.1);
    inner_err = std::max(inner_err, r.value > 0 ? r.error / r.value : 0.0);
    return norm_pdf(z) * r.value;
  };
  quad::Options opt;
  opt.rel_tol = rel_tol;
  opt.max_evals = 50'000;
  const double lo = std::max(a[static_cast<std::size_t>(k)] / sk, -40.0);
  const double hi = std::max(lo, 0.0) + 40.0;
  // split near the start where the density mass concentrates
  const double mid = lo + 1.0 / std::max(1.0, lo) * 8.0;
  const quad::Result r1 = quad::integrate(f, lo, std::min(mid, hi), opt);
  const quad::Result r2 = mid < hi ? quad::integrate(f, mid, hi, opt) : quad::Result{};
  out.value = r1.value + r2.value;
  out.error = r1.error + r2.error + inner_err * out.value;
  out.evaluations = r1.evaluations + r2.evaluations;
  out.converged = r1.converged && r2.converged;
  return out;
}

}  // namespace detail

/// Lattice estimate of P{xi >= lower}, xi ~ N(0, cov), dims 1..4. Exposed as
/// an independent check of mvn_cdf.
inline Estimate mvn_cdf_lattice(const Eigen::MatrixXd& cov, std::span<const double> lower,
                                const Tolerances& tol = {}) {
  const std::size_t n = lower.size();
  if (n == 0 || n > 4)
    throw UnsupportedDimensionError("mvn_cdf_lattice supports dimensions 1..4, got " +
                                    std::to_string(n));
  detail::require_square(cov, n, "mvn_cdf_lattice");
  return detail::lattice_orthant(cov, std::vector<double>(lower.begin(), lower.end()), tol);
}

/// P{xi_i >= lower_i for all i}, xi ~ N(mean, cov), dims 1..4. Entries of
/// `lower` equal to -inf drop out. Dims 1 and 2 are evaluated by closed form
/// or one-dimensional quadrature; dims 3 and 4 by nested quadrature over the
/// bivariate kernel.
inline Estimate mvn_cdf(const Eigen::MatrixXd& cov, std::span<const double> lower,
                        std::span<const double> mean = {}, const Tolerances& tol = {}) {
  const std::size_t n = lower.size();
  if (n == 0 || n > 4)
    throw UnsupportedDimensionError("mvn_cdf supports dimensions 1..4, got " + std::to_string(n));
  detail::require_square(cov, n, "mvn_cdf");
  if (!mean.empty() && mean.size() != n) throw ArgumentError("mvn_cdf: mean size differs");

  // Degeneracy is judged on the full matrix, then infinite bounds drop out.
  (void)cholesky_checked(cov, tol.observed_pivot, "mvn_cdf covariance");

  std::vector<Eigen::Index> keep;
  std::vector<double> a;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(lower[i])) throw ArgumentError("mvn_cdf: NaN bound");
    if (lower[i] == kInf) return {0.0, 0.0, 0, Method::Quadrature};
    if (lower[i] == -kInf) continue;
    keep.push_back(static_cast<Eigen::Index>(i));
    a.push_back(lower[i] - (mean.empty() ? 0.0 : mean[i]));
  }
  const auto m = static_cast<Eigen::Index>(keep.size());
  if (m == 0) return {1.0, 0.0, 0, Method::Quadrature};
  Eigen::MatrixXd c(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      c(i, j) = cov(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);

  if (m == 1) return {norm_sf(a[0] / std::sqrt(c(0, 0))), 0.0, 1, Method::Quadrature};
  if (m == 2) {
    const double s0 = std::sqrt(c(0, 0)), s1 = std::sqrt(c(1, 1));
    const double rho = std::clamp(c(0, 1) / (s0 * s1), -1.0, 1.0);
    const double v = bvn_upper(a[0] / s0, a[1] / s1, rho);
    return {v, 1e-14 * std::max(v, 1e-300), 1, Method::Quadrature};
  }
  bool diagonal = true;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if (c(i, j) != 0.0) diagonal = false;
  if (diagonal) {
    double v = 1.0;
    for (Eigen::Index i = 0; i < m; ++i) v *= norm_sf(a[static_cast<std::size_t>(i)] / std::sqrt(c(i, i)));
    return {v, 0.0, 1, Method::Quadrature};
  }
  const quad::Result r = detail::orthant_recursive(c, a, 1e-10);
  Estimate est{r.value, r.error, r.evaluations, Method::Quadrature};
  if (!r.converged || r.error > std::max(tol.mvn_abs, tol.mvn_rel * r.value)) est.low_confidence = true;
  return est;
}

inline Estimate mvn_cdf(const Eigen::MatrixXd& cov, std::initializer_list<double> lower,
                        const Tolerances& tol = {}) {
  return mvn_cdf(cov, std::span<const double>(lower.begin(), lower.size()), {}, tol);
}

// ---------------------------------------------------------------------------
// Truncated moments
// ---------------------------------------------------------------------------

namespace detail {

struct SubLaw {
  Eigen::MatrixXd cov;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<Eigen::Index> index;  // positions in the parent vector
};

/// Law of xi without component k, given xi_k = value.
inline SubLaw condition_on_component(const Eigen::MatrixXd& cov, const std::vector<double>& mean,
                                     const std::vector<double>& lower, Eigen::Index k,
                                     double value) {
  const Eigen::Index n = cov.rows();
  SubLaw s;
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != k) s.index.push_back(i);
  const auto m = static_cast<Eigen::Index>(s.index.size());
  s.cov.resize(m, m);
  const double vk = cov(k, k);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index pi = s.index[static_cast<std::size_t>(i)];
    s.mean.push_back(mean[static_cast<std::size_t>(pi)] +
                     cov(pi, k) / vk * (value - mean[static_cast<std::size_t>(k)]));
    s.lower.push_back(lower[static_cast<std::size_t>(pi)]);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index pj = s.index[static_cast<std::size_t>(j)];
      s.cov(i, j) = cov(pi, pj) - cov(pi, k) * cov(pj, k) / vk;
    }
  }
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  return s;
}

inline double gaussian_density(double x, double mean, double var) {
  return norm_pdf((x - mean) / std::sqrt(var)) / std::sqrt(var);
}

/// Result of the reduction route: value and accumulated error bound.
struct Reduced {
  double value = 0.0;
  double error = 0.0;
};

inline Reduced orthant(const Eigen::MatrixXd& cov, const std::vector<double>& mean,
                       const std::vector<double>& lower, const Tolerances& tol) {
  if (cov.rows() == 0) return {1.0, 0.0};
  // Drop unbounded components here so conditional sub-laws of dimension
  // above four still reach mvn_cdf with at most four live bounds.
  std::vector<Eigen::Index> live;
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (lower[i] != -kInf) live.push_back(static_cast<Eigen::Index>(i));
  if (live.empty()) return {1.0, 0.0};
  const auto m = static_cast<Eigen::Index>(live.size());
  Eigen::MatrixXd c(m, m);
  std::vector<double> a, mu;
  for (Eigen::Index i = 0; i < m; ++i) {
    a.push_back(lower[static_cast<std::size_t>(live[static_cast<std::size_t>(i)])]);
    mu.push_back(mean[static_cast<std::size_t>(live[static_cast<std::size_t>(i)])]);
    for (Eigen::Index j = 0; j < m; ++j)
      c(i, j) = cov(live[static_cast<std::size_t>(i)], live[static_cast<std::size_t>(j)]);
  }
  const Estimate e = mvn_cdf(c, a, mu, tol);
  return {e.value, e.error};
}

/// E{xi_i 1{xi >= lower}} for every i, by the Gaussian integration-by-parts
/// identity E{(xi_i - mu_i) g(xi)} = sum_k cov_ik E{d_k g(xi)}.
/// `prob` supplies P{xi >= lower} when a mean is non-zero; it is computed on
/// demand otherwise.
inline std::vector<Reduced> first_moments(const Eigen::MatrixXd& cov, const std::vector<double>& mean,
                                          const std::vector<double>& lower, const Tolerances& tol,
                                          const Reduced* prob = nullptr) {
  const Eigen::Index n = cov.rows();
  std::vector<Reduced> out(static_cast<std::size_t>(n));
  bool need_prob = false;
  for (double m : mean)
    if (m != 0.0) need_prob = true;
  Reduced p{};
  if (need_prob) p = prob ? *prob : orthant(cov, mean, lower, tol);

  std::vector<Reduced> face(static_cast<std::size_t>(n));  // density-weighted face probabilities
  for (Eigen::Index k = 0; k < n; ++k) {
    const double ak = lower[static_cast<std::size_t>(k)];
    if (ak == -kInf) continue;
    const double dens = gaussian_density(ak, mean[static_cast<std::size_t>(k)], cov(k, k));
    if (dens == 0.0) continue;
    const SubLaw sub = condition_on_component(cov, mean, lower, k, ak);
    const Reduced q = orthant(sub.cov, sub.mean, sub.lower, tol);
    face[static_cast<std::size_t>(k)] = {dens * q.value, dens * q.error};
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    Reduced r{mean[static_cast<std::size_t>(i)] * p.value,
              std::abs(mean[static_cast<std::size_t>(i)]) * p.error};
    for (Eigen::Index k = 0; k < n; ++k) {
      r.value += cov(i, k) * face[static_cast<std::size_t>(k)].value;
      r.error += std::abs(cov(i, k)) * face[static_cast<std::size_t>(k)].error;
    }
    out[static_cast<std::size_t>(i)] = r;
  }
  return out;
}

/// E{xi_i xi_j 1{xi >= lower}} for every pair.
inline std::vector<std::vector<Reduced>> second_moments(const Eigen::MatrixXd& cov,
                                                        const std::vector<double>& mean,
                                                        const std::vector<double>& lower,
                                                        const Tolerances& tol,
                                                        Reduced* prob_out = nullptr) {
  const Eigen::Index n = cov.rows();
  const Reduced p = orthant(cov, mean, lower, tol);
  if (prob_out) *prob_out = p;
  const std::vector<Reduced> m1 = first_moments(cov, mean, lower, tol, &p);

  // face_moment[k][j] = phi_k(a_k) E{xi_j 1{rest >= lower} | xi_k = a_k}
  std::vector<std::vector<Reduced>> face(static_cast<std::size_t>(n),
                                         std::vector<Reduced>(static_cast<std::size_t>(n)));
  for (Eigen::Index k = 0; k < n; ++k) {
    const double ak = lower[static_cast<std::size_t>(k)];
    if (ak == -kInf) continue;
    const double dens = gaussian_density(ak, mean[static_cast<std::size_t>(k)], cov(k, k));
    if (dens == 0.0) continue;
    const SubLaw sub = condition_on_component(cov, mean, lower, k, ak);
    const Reduced q = orthant(sub.cov, sub.mean, sub.lower, tol);
    const std::vector<Reduced> sub_m1 =
        sub.cov.rows() > 0 ? first_moments(sub.cov, sub.mean, sub.lower, tol, &q) : std::vector<Reduced>{};
    face[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] = {dens * ak * q.value,
                                                                      dens * std::abs(ak) * q.error};
    for (std::size_t x = 0; x < sub.index.size(); ++x) {
      const auto j = static_cast<std::size_t>(sub.index[x]);
      face[static_cast<std::size_t>(k)][j] = {dens * sub_m1[x].value, dens * sub_m1[x].error};
    }
  }

  std::vector<std::vector<Reduced>> out(static_cast<std::size_t>(n),
                                        std::vector<Reduced>(static_cast<std::size_t>(n)));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
      Reduced r{mean[ui] * m1[uj].value + cov(i, j) * p.value,
                std::abs(mean[ui]) * m1[uj].error + std::abs(cov(i, j)) * p.error};
      for (Eigen::Index k = 0; k < n; ++k) {
        r.value += cov(i, k) * face[static_cast<std::size_t>(k)][uj].value;
        r.error += std::abs(cov(i, k)) * face[static_cast<std::size_t>(k)][uj].error;
      }
      out[ui][uj] = r;
    }
  return out;
}

/// E{xi^alpha 1{xi >= lower}} by nested adaptive quadrature in whitened
/// coordinates, with the innermost coordinate integrated in closed form.
/// Independent of the reduction route; used as its cross-check.
inline double moment_by_quadrature(const Eigen::MatrixXd& cov, const std::vector<double>& mean,
                                   const std::vector<double>& lower, const std::vector<int>& alpha) {
  const int d = static_cast<int>(cov.rows());
  const Eigen::MatrixXd l = cholesky_checked(cov, 0.0, "truncated-moment covariance");
  std::vector<int> factors;  // indices of linear forms multiplied together
  for (int i = 0; i < d; ++i)
    for (int r = 0; r < alpha[static_cast<std::size_t>(i)]; ++r) factors.push_back(i);

  std::vector<double> z(static_cast<std::size_t>(d), 0.0);
  quad::Options opt;
  opt.rel_tol = 1e-11;
  opt.abs_tol = 1e-17;
  opt.abs_integral_tol = 1e-12;

  // Truncated standard-normal moments E{Z^p 1{Z >= b}}.
  auto tail_moment = [](int p, double b) {
    if (b == -kInf) return p == 0 ? 1.0 : (p == 1 ? 0.0 : 1.0);
    const double q = norm_sf(b), f = norm_pdf(b);
    if (p == 0) return q;
    if (p == 1) return f;
    return b * f + q;
  };

  std::function<double(int)> level = [&](int k) -> double {
    double partial = mean[static_cast<std::size_t>(k)];
    for (int j = 0; j < k; ++j) partial += l(k, j) * z[static_cast<std::size_t>(j)];
    const double a = lower[static_cast<std::size_t>(k)];
    const double b = a == -kInf ? -kInf : (a - partial) / l(k, k);
    if (k == d - 1) {
      // each factor is alpha_f + beta_f z_k
      double c0 = 1.0, c1 = 0.0, c2 = 0.0;
      for (int f : factors) {
        double af = mean[static_cast<std::size_t>(f)];
        for (int j = 0; j < std::min(f + 1, d - 1); ++j) af += l(f, j) * z[static_cast<std::size_t>(j)];
        const double bf = f == d - 1 ? l(f, d - 1) : 0.0;
        // (c0 + c1 z + c2 z^2)(af + bf z), degree never exceeds 2
        const double n0 = c0 * af, n1 = c0 * bf + c1 * af, n2 = c1 * bf + c2 * af;
        c0 = n0;
        c1 = n1;
        c2 = n2;
      }
      return c0 * tail_moment(0, b) + c1 * tail_moment(1, b) + c2 * tail_moment(2, b);
    }
    auto body = [&](double zk) {
      z[static_cast<std::size_t>(k)] = zk;
      return norm_pdf(zk) * level(k + 1);
    };
    const double lo = std::max(b, -12.0);
    const double hi = std::max(lo, 0.0) + 12.0;
    return quad::integrate(body, lo, hi, opt).value;
  };
  return level(0);
}

}  // namespace detail

/// E{xi^monomial 1{xi >= lower}} for xi ~ N(0, cov), total degree <= 2.
/// Evaluated by the integration-by-parts reduction to lower-dimensional
/// orthant probabilities and cross-checked by nested quadrature; the error
/// reported is the larger of the reduction error and the discrepancy.
inline Estimate truncated_moment(const Eigen::MatrixXd& cov, std::span<const double> lower,
                                 std::span<const int> monomial, const Tolerances& tol = {}) {
  const std::size_t n = lower.size();
  if (n == 0 || n > 4)
    throw UnsupportedDimensionError("truncated_moment supports dimensions 1..4, got " +
                                    std::to_string(n));
  detail::require_square(cov, n, "truncated_moment");
  if (monomial.size() != n) throw ArgumentError("truncated_moment: monomial size differs");
  int degree = 0;
  for (int e : monomial) {
    if (e < 0) throw ArgumentError("truncated_moment: negative exponent");
    degree += e;
  }
  if (degree > 2) throw ArgumentError("truncated_moment: total degree must be <= 2");
  (void)cholesky_checked(cov, tol.observed_pivot, "truncated-moment covariance");

  const std::vector<double> a(lower.begin(), lower.end());
  const std::vector<double> mu(n, 0.0);
  const std::vector<int> alpha(monomial.begin(), monomial.end());

  detail::Reduced red;
  if (degree == 0) {
    red = detail::orthant(cov, mu, a, tol);
  } else if (degree == 1) {
    const auto i = static_cast<std::size_t>(std::find(alpha.begin(), alpha.end(), 1) - alpha.begin());
    red = detail::first_moments(cov, mu, a, tol)[i];
  } else {
    std::size_t i = 0, j = 0;
    const auto two = std::find(alpha.begin(), alpha.end(), 2);
    if (two != alpha.end()) {
      i = j = static_cast<std::size_t>(two - alpha.begin());
    } else {
      i = static_cast<std::size_t>(std::find(alpha.begin(), alpha.end(), 1) - alpha.begin());
      j = static_cast<std::size_t>(std::find(alpha.begin() + static_cast<long>(i) + 1, alpha.end(), 1) -
                                   alpha.begin());
    }
    red = detail::second_moments(cov, mu, a, tol)[i][j];
  }

  const double quad_value = detail::moment_by_quadrature(cov, mu, a, alpha);
  const double gap = std::abs(red.value - quad_value);
  if (gap > tol.moment_agreement * std::max(std::abs(red.value), std::abs(quad_value)) + 1e-13)
    throw ConsistencyError("truncated moment: reduction and quadrature disagree", red.value, quad_value);
  return {red.value, std::max(red.error, gap), 2, Method::Quadrature};
}

inline Estimate truncated_moment(const Eigen::MatrixXd& cov, std::initializer_list<double> lower,
                                 std::initializer_list<int> monomial, const Tolerances& tol = {}) {
  return truncated_moment(cov, std::span<const double>(lower.begin(), lower.size()),
                          std::span<const int>(monomial.begin(), monomial.size()), tol);
}

// ---------------------------------------------------------------------------
// Bivariate corner tail
// ---------------------------------------------------------------------------

struct TailAsymptotic {
  double value = 0.0;
  double a = 0.0;  // (S^-1)_11 + (S^-1)_21
  double b = 0.0;  // (S^-1)_12 + (S^-1)_22
};

/// Row sums of the inverse of a 2x2 covariance.
inline std::array<double, 2> inverse_row_sums(const Eigen::Matrix2d& sigma) {
  const Eigen::MatrixXd l = cholesky_checked(sigma, 1e-12, "2x2 covariance");
  (void)l;
  const Eigen::Matrix2d p = sigma.inverse();
  return {p(0, 0) + p(1, 0), p(0, 1) + p(1, 1)};
}

/// Leading-order value 1 / (u^2 a b) of the corner-tail integral.
inline TailAsymptotic mills_ratio_asymptotic(const Eigen::Matrix2d& sigma, double u) {
  const auto [a, b] = inverse_row_sums(sigma);
  if (!(a > 0.0) || !(b > 0.0))
    throw RegimeError("corner is not the dominating point: a = " + std::to_string(a) +
                      ", b = " + std::to_string(b));
  return {1.0 / (u * u * a * b), a, b};
}

/// integral over x, y >= 0 of exp{-1/2 (x, y) S^-1 (x, y)^T - (u, u) S^-1 (x, y)^T}.
/// This is the corner tail with the level factor exp{-1/2 (u,u) S^-1 (u,u)^T}
/// taken out, so it stays O(u^-2) instead of underflowing. The inner
/// integral is closed form through the Mills ratio.
inline Estimate bivariate_tail_exact(const Eigen::Matrix2d& sigma, double u, double rel_tol = 1e-8) {
  (void)cholesky_checked(sigma, 1e-12, "2x2 covariance");
  const Eigen::Matrix2d p = sigma.inverse();
  const double a = p(0, 0) + p(1, 0), b = p(0, 1) + p(1, 1);
  const double rp22 = std::sqrt(p(1, 1));
  auto f = [&](double x) {
    const double z = (p(0, 1) * x + b * u) / rp22;
    return std::exp(-0.5 * p(0, 0) * x * x - a * u * x + log_mills_ratio(z)) / rp22;
  };
  const double scale = 1.0 / (std::sqrt(p(0, 0)) + std::max(0.0, a * u));
  quad::Options opt;
  opt.rel_tol = rel_tol;
  opt.max_evals = 100'000;
  const quad::Result r = quad::integrate_to_infinity(f, 0.0, scale, opt);
  if (!r.converged)
    throw AccuracyError("bivariate tail quadrature did not converge", r.value, r.error);
  return {r.value, r.error, r.evaluations, Method::Quadrature};
}

}  // namespace eec
