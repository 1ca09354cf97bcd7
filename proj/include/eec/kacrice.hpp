#pragma once

// Expected Euler characteristic of the joint excursion set for processes on
// [0,1], assembled from the nine face pairs (two endpoints and the open
// interior for each coordinate).

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eec/classify.hpp"
#include "eec/errors.hpp"
#include "eec/estimate.hpp"
#include "eec/gauss.hpp"
#include "eec/model.hpp"
#include "eec/parallel.hpp"
#include "eec/quadrature.hpp"
#include "eec/tolerances.hpp"

namespace eec {

enum class Face { Left, Right, Interior };

inline std::string to_string(Face f) {
  switch (f) {
    case Face::Left: return "left";
    case Face::Right: return "right";
    case Face::Interior: return "interior";
  }
  return "?";
}

inline constexpr std::array<Face, 3> kFaces = {Face::Left, Face::Right, Face::Interior};

inline double face_point(Face f) { return f == Face::Left ? 0.0 : 1.0; }

inline bool on_endpoint(double x) { return x == 0.0 || x == 1.0; }

/// Outward sign of the derivative at an endpoint.
inline double outward_sign(double endpoint) { return endpoint == 0.0 ? -1.0 : 1.0; }

struct FacePairTerm {
  Face face_x = Face::Left;
  Face face_y = Face::Left;
  int sign = 1;
  Estimate value;
  bool included = true;
};

struct EecResult {
  Estimate total;
  std::vector<FacePairTerm> terms;
  double u = 0.0;
  std::vector<std::string> notes;
};

enum class Theorem { Full, Restricted };

struct EecOptions {
  Theorem theorem = Theorem::Full;
  // Evaluate transposed models in their stored orientation and relabel the
  // terms, so eec(M) and eec(transpose(M)) agree bit for bit.
  bool canonical_orientation = true;
  Tolerances tol;
};

// ---------------------------------------------------------------------------
// Face-pair integrands
// ---------------------------------------------------------------------------

/// P{X(t0) >= u, Y(s0) >= u, e_t X'(t0) >= 0, e_s Y'(s0) >= 0}, e the outward
/// signs. A disabled constraint drops that derivative from the event.
inline Estimate corner_corner_term(const BivariateModel& model, double t0, double s0, double u,
                                   bool constrain_x = true, bool constrain_y = true,
                                   const Tolerances& tol = {}) {
  if (!on_endpoint(t0) || !on_endpoint(s0))
    throw ArgumentError("corner_corner_term: corners must be 0 or 1");
  Eigen::MatrixXd cov = joint_cov(model, {{Process::X, t0, 0},
                                          {Process::Y, s0, 0},
                                          {Process::X, t0, 1},
                                          {Process::Y, s0, 1}});
  const double et = outward_sign(t0), es = outward_sign(s0);
  cov.row(2) *= et;
  cov.col(2) *= et;
  cov.row(3) *= es;
  cov.col(3) *= es;
  const std::array<double, 4> lower = {u, u, constrain_x ? 0.0 : -kInf, constrain_y ? 0.0 : -kInf};
  return mvn_cdf(cov, lower, {}, tol);
}

namespace detail {

inline void check_moments(const Eigen::MatrixXd& cov, const std::vector<double>& lower,
                          const std::vector<int>& alpha, double reduced, const Tolerances& tol) {
  const double q = moment_by_quadrature(cov, std::vector<double>(lower.size(), 0.0), lower, alpha);
  if (std::abs(q - reduced) > tol.moment_agreement * std::max(std::abs(q), std::abs(reduced)) + 1e-13)
    throw ConsistencyError("Kac-Rice moment: reduction and quadrature disagree", reduced, q);
}

}  // namespace detail

/// p_{X'(t)}(0) E{X''(t) 1{X(t) >= u, Y(s0) >= u, e Y'(s0) >= 0} | X'(t) = 0}.
inline double edge_point_integrand(const BivariateModel& model, double t, double s0, double u,
                                   bool constrain_y = true, const Tolerances& tol = {}) {
  if (!on_endpoint(s0)) throw ArgumentError("edge_point_integrand: s0 must be 0 or 1");
  Eigen::MatrixXd cov = joint_cov(model, {{Process::X, t, 0},
                                          {Process::Y, s0, 0},
                                          {Process::Y, s0, 1},
                                          {Process::X, t, 2},
                                          {Process::X, t, 1}});
  const double es = outward_sign(s0);
  cov.row(2) *= es;
  cov.col(2) *= es;
  const ConditionalLaw law = condition(cov, {4}, tol.observed_pivot);
  const Eigen::Index m = constrain_y ? 3 : 2;
  const Eigen::MatrixXd s = law.residual_cov.topLeftCorner(m, m);
  const Eigen::VectorXd c = law.residual_cov.block(3, 0, 1, m).transpose();
  std::vector<double> lower = {u, u};
  if (constrain_y) lower.push_back(0.0);
  const auto m1 = detail::first_moments(s, std::vector<double>(static_cast<std::size_t>(m), 0.0), lower, tol);
  Eigen::VectorXd mv(m);
  for (Eigen::Index i = 0; i < m; ++i) mv(i) = m1[static_cast<std::size_t>(i)].value;
  const Eigen::VectorXd beta = s.ldlt().solve(c);
  if (tol.cross_check_moments)
    for (Eigen::Index i = 0; i < m; ++i) {
      std::vector<int> alpha(static_cast<std::size_t>(m), 0);
      alpha[static_cast<std::size_t>(i)] = 1;
      detail::check_moments(s, lower, alpha, mv(i), tol);
    }
  const double density = 1.0 / std::sqrt(2.0 * std::numbers::pi * cov(4, 4));
  return density * beta.dot(mv);
}

/// p_{X'(t),Y'(s)}(0,0) E{X''(t) Y''(s) 1{X(t) >= u, Y(s) >= u} | X'(t) = Y'(s) = 0}.
inline double interior_interior_integrand(const BivariateModel& model, double t, double s,
                                          double u, const Tolerances& tol = {}) {
  const Eigen::MatrixXd cov = joint_cov(model, {{Process::X, t, 0},
                                                {Process::Y, s, 0},
                                                {Process::X, t, 2},
                                                {Process::Y, s, 2},
                                                {Process::X, t, 1},
                                                {Process::Y, s, 1}});
  const double dprime = cov(4, 4) * cov(5, 5) - cov(4, 5) * cov(4, 5);
  if (!(dprime > tol.observed_pivot))
    throw DegeneracyError("derivative pair (X'(t), Y'(s)) is degenerate", 4, dprime);
  const ConditionalLaw law = condition(cov, {4, 5}, tol.observed_pivot);
  const Eigen::Matrix2d sx = law.residual_cov.topLeftCorner(2, 2);
  const Eigen::Matrix2d cross = law.residual_cov.block(2, 0, 2, 2);  // Cov((X'', Y''), (X, Y))
  const Eigen::Matrix2d b = cross * sx.inverse();                    // regression of (X'', Y'') on (X, Y)
  const Eigen::Matrix2d eta = law.residual_cov.bottomRightCorner(2, 2) - b * cross.transpose();

  const std::vector<double> lower = {u, u};
  detail::Reduced prob;
  const auto m2 = detail::second_moments(sx, {0.0, 0.0}, lower, tol, &prob);
  double e = eta(0, 1) * prob.value;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) e += b(0, i) * b(1, j) * m2[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].value;
  if (tol.cross_check_moments) {
    detail::check_moments(sx, lower, {1, 1}, m2[0][1].value, tol);
    detail::check_moments(sx, lower, {2, 0}, m2[0][0].value, tol);
    detail::check_moments(sx, lower, {0, 2}, m2[1][1].value, tol);
  }
  return e / (2.0 * std::numbers::pi * std::sqrt(dprime));
}

/// Conditional mean of X''(t) given X(t) = x, Y(s) = y and X'(t) = Y'(s) = 0,
/// as the pair of coefficients on (x, y).
inline std::array<double, 2> conditional_hessian_mean_x(const BivariateModel& model, double t,
                                                        double s) {
  const Eigen::MatrixXd cov = joint_cov(model, {{Process::X, t, 2},
                                                {Process::X, t, 0},
                                                {Process::Y, s, 0},
                                                {Process::X, t, 1},
                                                {Process::Y, s, 1}});
  const ConditionalLaw law = condition(cov, {1, 2, 3, 4});
  return {law.mean_map(0, 0), law.mean_map(0, 1)};
}

// ---------------------------------------------------------------------------
// Face-pair assembly
// ---------------------------------------------------------------------------

/// Which faces and sign constraints take part.
struct FaceSelection {
  std::array<bool, 3> x_faces = {true, true, true};
  std::array<bool, 3> y_faces = {true, true, true};
  bool constrain_x = true;
  bool constrain_y = true;
};

/// Faces adjacent to a unique maximizer, with derivative sign constraints
/// kept only in coordinates whose partial of r vanishes there. Models
/// without a unique maximizer keep every face.
inline FaceSelection restricted_faces(const CaseClassification& c, const Tolerances& tol = {}) {
  FaceSelection sel;
  if (c.tag == CaseTag::DiagonalLine || c.tag == CaseTag::GeneralFallback || c.maximizers.size() != 1)
    return sel;
  const Point2 p = c.maximizers.front();
  const bool zx = std::abs(c.geometry.r1) < tol.gradient_zero;
  const bool zy = std::abs(c.geometry.r2) < tol.gradient_zero;
  auto pick = [](double x, bool zero) {
    return std::array<bool, 3>{x == 0.0, x == 1.0, zero};
  };
  sel.x_faces = pick(p.t, zx);
  sel.y_faces = pick(p.s, zy);
  sel.constrain_x = zx;
  sel.constrain_y = zy;
  return sel;
}

namespace detail {

inline quad::Result integrate_panels(const auto& f, const std::vector<double>& cuts,
                                     const quad::Options& opt) {
  quad::Result total;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const quad::Result r = quad::integrate(f, cuts[i], cuts[i + 1], opt);
    total.value += r.value;
    total.error += r.error;
    total.abs_integral += r.abs_integral;
    total.evaluations += r.evaluations;
    total.converged = total.converged && r.converged;
  }
  return total;
}

inline Estimate to_estimate(const quad::Result& r, const char* what) {
  if (!r.converged) throw AccuracyError(std::string(what) + ": quadrature did not converge", r.value, r.error);
  return {r.value, r.error, r.evaluations, Method::Quadrature};
}

}  // namespace detail

/// One term of the face-pair sum. The returned value is the integral itself;
/// `sign` carries (-1)^(dim K + dim L).
inline FacePairTerm face_pair_integral(const BivariateModel& model, Face fx, Face fy, double u,
                                       const Tolerances& tol = {}, bool constrain_x = true,
                                       bool constrain_y = true) {
  FacePairTerm term;
  term.face_x = fx;
  term.face_y = fy;
  const int k = fx == Face::Interior ? 1 : 0;
  const int l = fy == Face::Interior ? 1 : 0;
  term.sign = (k + l) % 2 == 0 ? 1 : -1;

  quad::Options opt;
  opt.rel_tol = tol.quad_rel;
  opt.max_evals = tol.quad_max_evals;
  const std::vector<double> quarters = {0.0, 0.25, 0.5, 0.75, 1.0};

  if (k == 0 && l == 0) {
    term.value = corner_corner_term(model, face_point(fx), face_point(fy), u, constrain_x, constrain_y, tol);
  } else if (k == 1 && l == 0) {
    const double s0 = face_point(fy);
    auto f = [&](double t) { return edge_point_integrand(model, t, s0, u, constrain_y, tol); };
    term.value = detail::to_estimate(detail::integrate_panels(f, quarters, opt), "edge term");
  } else if (k == 0 && l == 1) {
    const BivariateModel swapped = model.transpose();
    const double t0 = face_point(fx);
    auto f = [&](double s) { return edge_point_integrand(swapped, s, t0, u, constrain_x, tol); };
    term.value = detail::to_estimate(detail::integrate_panels(f, quarters, opt), "edge term");
  } else {
    // Rotated coordinates w = t - s, z = t + s follow ridges along the
    // diagonal; the Jacobian of (w, z) -> (t, s) is 1/2.
    quad::Options inner = opt;
    inner.rel_tol = std::min(opt.rel_tol, tol.inner_quad_rel);
    auto slice = [&](double w) {
      auto g = [&](double z) {
        return 0.5 * interior_interior_integrand(model, 0.5 * (z + w), 0.5 * (z - w), u, tol);
      };
      const double lo = std::abs(w), hi = 2.0 - std::abs(w);
      if (!(hi > lo)) return 0.0;
      const double mid = 0.5 * (lo + hi);
      quad::Result a = quad::integrate(g, lo, mid, inner);
      quad::Result b = quad::integrate(g, mid, hi, inner);
      return a.value + b.value;
    };
    const std::vector<double> cuts = {-1.0, -0.5, 0.0, 0.5, 1.0};
    term.value = detail::to_estimate(detail::integrate_panels(slice, cuts, opt), "interior term");
  }
  return term;
}

namespace detail {

inline EecResult eec_oriented(const BivariateModel& model, double u, const EecOptions& opt) {
  EecResult res;
  res.u = u;
  FaceSelection sel;
  if (opt.theorem == Theorem::Restricted) {
    const CaseClassification c = classify(model, opt.tol);
    sel = restricted_faces(c, opt.tol);
    if (c.tag == CaseTag::DiagonalLine || c.tag == CaseTag::GeneralFallback)
      res.notes.push_back("no unique maximizer; restricted face set falls back to all faces");
  }
  res.terms.resize(9);
  parallel_for(9, [&](std::size_t idx) {
    const Face fx = kFaces[idx / 3], fy = kFaces[idx % 3];
    if (sel.x_faces[idx / 3] && sel.y_faces[idx % 3]) {
      res.terms[idx] = face_pair_integral(model, fx, fy, u, opt.tol, sel.constrain_x, sel.constrain_y);
    } else {
      FacePairTerm t;
      t.face_x = fx;
      t.face_y = fy;
      const int k = fx == Face::Interior, l = fy == Face::Interior;
      t.sign = (k + l) % 2 == 0 ? 1 : -1;
      t.included = false;
      res.terms[idx] = t;
    }
  });
  double total = 0.0, var = 0.0;
  std::size_t evals = 0;
  for (const auto& t : res.terms) {
    total += t.sign * t.value.value;
    var += t.value.error * t.value.error;
    evals += t.value.n;
  }
  res.total = {total, std::sqrt(var), evals, Method::Quadrature};
  for (const auto& t : res.terms)
    if (t.value.low_confidence || t.value.error > opt.tol.low_confidence * std::abs(total))
      res.total.low_confidence = true;
  return res;
}

}  // namespace detail

/// E{chi(A_u)} as the signed sum of the nine face-pair terms.
inline EecResult eec(const BivariateModel& model, double u, const EecOptions& opt = {}) {
  if (!std::isfinite(u)) throw ArgumentError("eec: level must be finite");
  if (opt.canonical_orientation && model.transposed()) {
    EecResult r = detail::eec_oriented(model.transpose(), u, opt);
    // term (a, b) of the stored orientation is term (b, a) here
    std::vector<FacePairTerm> relabeled(9);
    for (std::size_t idx = 0; idx < 9; ++idx) {
      FacePairTerm t = r.terms[idx];
      std::swap(t.face_x, t.face_y);
      relabeled[(idx % 3) * 3 + idx / 3] = t;
    }
    r.terms = std::move(relabeled);
    return r;
  }
  return detail::eec_oriented(model, u, opt);
}

/// One-process Euler characteristic expectation on [0,1] for a stationary
/// kernel: the two endpoint terms minus the interior Kac-Rice integral.
inline double eec_marginal(const Kernel& kernel, double u) {
  const double lambda = kernel.lambda();
  // endpoint: X'(t0) is independent of X(t0), so each is P{X >= u} / 2
  const double corners = norm_sf(u);
  // interior: E{X'' 1{X >= u} | X' = 0} = -lambda phi(u), constant in t
  const double interior = -lambda * norm_pdf(u) / std::sqrt(2.0 * std::numbers::pi * lambda);
  return corners - interior;
}

}  // namespace eec
