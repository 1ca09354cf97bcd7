#pragma once

// Leading-order tail asymptotics A u^{-p} exp(-u^2 / (1 + R)) of the joint
// excursion probability, by regime of the maximizer set of r.

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "eec/classify.hpp"
#include "eec/errors.hpp"
#include "eec/gauss.hpp"
#include "eec/kacrice.hpp"
#include "eec/model.hpp"

namespace eec {

/// Leading term of a Laplace integral with interior minimizer t0 of h:
/// integral g exp(-u^2 h) ~ g(t0) sqrt(2 pi / (u^2 h'')) exp(-u^2 h(t0)).
/// With `half_range` the minimizer is an endpoint and the value halves.
inline double laplace_1d(double h_value, double h_second, double amplitude, double u,
                         bool half_range = false) {
  if (!(h_second > 0.0)) throw RegimeError("laplace_1d: h'' must be positive, got " + std::to_string(h_second));
  const double v = amplitude * std::sqrt(2.0 * std::numbers::pi / (u * u * h_second)) * std::exp(-u * u * h_value);
  return half_range ? 0.5 * v : v;
}

inline double laplace_2d(double h_value, const Eigen::Matrix2d& h_hessian, double amplitude, double u) {
  const double det = h_hessian.determinant();
  if (!(h_hessian(0, 0) > 0.0) || !(det > 0.0))
    throw RegimeError("laplace_2d: Hessian of h is not positive definite");
  return amplitude * (2.0 * std::numbers::pi / (u * u)) / std::sqrt(det) * std::exp(-u * u * h_value);
}

/// Cov((X(t), Y(s)) | X'(t) = Y'(s) = 0) in closed form.
inline Eigen::Matrix2d sigma_conditional(const BivariateModel& model, double t, double s) {
  const LocalGeometry g = local_geometry(model, t, s);
  const double d = g.lambda1 * g.lambda2 - g.r12 * g.r12;
  if (!(d > 1e-12)) throw DegeneracyError("sigma_conditional: lambda1 lambda2 - r12^2 is not positive", 1, d);
  Eigen::Matrix2d m;
  m(0, 0) = 1.0 - g.lambda1 * g.r2 * g.r2 / d;
  m(1, 1) = 1.0 - g.lambda2 * g.r1 * g.r1 / d;
  m(0, 1) = m(1, 0) = g.r + g.r12 * g.r1 * g.r2 / d;
  return m;
}

/// h(t, s) = (1, 1) Sigma(t, s)^{-1} (1, 1)^T / 2.
inline double h_function(const BivariateModel& model, double t, double s) {
  const Eigen::Matrix2d m = sigma_conditional(model, t, s);
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(0, 1);
  if (!(det > 1e-12)) throw DegeneracyError("h_function: Sigma(t, s) is singular", 1, det);
  return 0.5 * (m(0, 0) + m(1, 1) - 2.0 * m(0, 1)) / det;
}

/// Hessian of h at a corner maximizer where both partials of r vanish, in
/// coordinates (t, s).
inline Eigen::Matrix2d h_hessian_at_maximizer(double lambda1, double lambda2, double R, double R11,
                                              double R22, double R12) {
  const double scale = 1.0 / ((1.0 + R) * (1.0 + R) * (lambda1 * lambda2 - R12 * R12));
  Eigen::Matrix2d h;
  h(0, 0) = (lambda1 - R11) * (R12 * R12 - lambda2 * R11);
  h(1, 1) = (lambda2 - R22) * (R12 * R12 - lambda1 * R22);
  h(0, 1) = h(1, 0) = R12 * (lambda1 - R11) * (R22 - lambda2);
  return scale * h;
}

struct AsymptoticTerm {
  double coefficient = 0.0;  // A
  int power = 2;             // p
  double rate = 1.0;         // 1 + R
  CaseTag tag = CaseTag::GeneralFallback;

  double value(double u) const { return coefficient * std::pow(u, -power) * std::exp(-u * u / rate); }
};

/// Standard: the coefficient formulas as usually stated. Corrected: edge
/// terms whose endpoint sign constraint is not forced by the gradient of r
/// carry the probability 1/2 of that constraint, and the quarter-plane
/// Laplace orthant uses the inverse of the Hessian of h as covariance.
enum class ClosedFormVariant { Standard, Corrected };

namespace detail {

inline double checked_sqrt(double x, const char* name) {
  if (!(x > 0.0)) throw RegimeError(std::string("closed form needs ") + name + " > 0, got " + std::to_string(x));
  return std::sqrt(x);
}

}  // namespace detail

/// Leading-order term for a classified model.
inline AsymptoticTerm closed_form(const BivariateModel& model, const CaseClassification& c,
                                  ClosedFormVariant variant = ClosedFormVariant::Standard) {
  (void)model;
  const bool corrected = variant == ClosedFormVariant::Corrected;
  const double free_edge = corrected ? 0.5 : 1.0;
  if (c.tag == CaseTag::GeneralFallback)
    throw RegimeError("closed form is unavailable for the general fallback regime");
  const double R = c.R;
  if (!(R > -1.0 && R < 1.0)) throw RegimeError("closed form needs |R| < 1");
  double l1 = c.geometry.lambda1, l2 = c.geometry.lambda2;
  double R11 = c.geometry.r11, R22 = c.geometry.r22;
  const double R12 = c.geometry.r12;
  if (c.roles_swapped) {
    std::swap(l1, l2);
    std::swap(R11, R22);
  }
  const double base = (1.0 + R) * (1.0 + R) / (2.0 * std::numbers::pi * std::sqrt(1.0 - R * R));

  AsymptoticTerm term;
  term.rate = 1.0 + R;
  term.tag = c.tag;
  using detail::checked_sqrt;
  switch (c.tag) {
    case CaseTag::Corner_r1r2Nonzero:
      term.coefficient = base;
      break;
    case CaseTag::Corner_r1Zero:
      term.coefficient =
          (0.5 + checked_sqrt(l1 - R11, "lambda1 - R11") / (2.0 * checked_sqrt(-R11, "-R11"))) * base;
      break;
    case CaseTag::Corner_BothZero: {
      const Point2 p = c.maximizers.front();
      // both events are taken in the inward/outward orientation of this corner
      const double sigma = outward_sign(p.t) * outward_sign(p.s);
      Eigen::MatrixXd dcov(2, 2);
      dcov << l1, sigma * R12, sigma * R12, l2;
      const double p_derivative = mvn_cdf(dcov, {0.0, 0.0}).value;
      const Eigen::Matrix2d hh = h_hessian_at_maximizer(l1, l2, R, R11, R22, R12);
      if (!(hh.determinant() > 0.0)) throw RegimeError("closed form needs R11 R22 - R12^2 > 0");
      const Eigen::Matrix2d oriented =
          (Eigen::Matrix2d() << hh(0, 0), sigma * hh(0, 1), sigma * hh(0, 1), hh(1, 1)).finished();
      const Eigen::MatrixXd zcov = corrected ? Eigen::MatrixXd(oriented.inverse()) : Eigen::MatrixXd(oriented);
      const double p_quarter = mvn_cdf(zcov, {0.0, 0.0}).value;
      term.coefficient =
          (p_derivative +
           free_edge * checked_sqrt(l1 - R11, "lambda1 - R11") / (2.0 * checked_sqrt(-R11, "-R11")) +
           free_edge * checked_sqrt(l2 - R22, "lambda2 - R22") / (2.0 * checked_sqrt(-R22, "-R22")) +
           p_quarter * std::sqrt((l1 - R11) * (l2 - R22)) / checked_sqrt(R11 * R22 - R12 * R12, "R11 R22 - R12^2")) *
          base;
      break;
    }
    case CaseTag::EdgePoint_r2Nonzero:
      term.coefficient = checked_sqrt(l1 - R11, "lambda1 - R11") / checked_sqrt(-R11, "-R11") * base;
      break;
    case CaseTag::EdgePoint_r2Zero:
      term.coefficient =
          (free_edge * checked_sqrt(l1 - R11, "lambda1 - R11") / checked_sqrt(-R11, "-R11") +
           checked_sqrt(l1 - R11, "lambda1 - R11") * checked_sqrt(l2 - R22, "lambda2 - R22") /
               (2.0 * checked_sqrt(R11 * R22 - R12 * R12, "R11 R22 - R12^2"))) *
          base;
      break;
    case CaseTag::UniqueInterior:
      term.coefficient = checked_sqrt(l1 - R11, "lambda1 - R11") * checked_sqrt(l2 - R22, "lambda2 - R22") /
                         checked_sqrt(R11 * R22 - R12 * R12, "R11 R22 - R12^2") * base;
      break;
    case CaseTag::DiagonalLine: {
      const double rho2 = R11;  // rho''(0)
      if (!(rho2 < 0.0)) throw RegimeError("closed form needs rho''(0) < 0");
      term.power = 1;
      term.coefficient = std::pow(2.0 * std::numbers::pi, -1.5) *
                         std::sqrt((l1 - rho2) * (l2 - rho2) * (1.0 + R) / (-rho2 * (1.0 - R)));
      break;
    }
    case CaseTag::GeneralFallback:
      break;
  }
  if (!(term.coefficient > 0.0) || !std::isfinite(term.coefficient))
    throw RegimeError("closed form coefficient is not positive");
  return term;
}

inline AsymptoticTerm closed_form(const BivariateModel& model,
                                  ClosedFormVariant variant = ClosedFormVariant::Standard) {
  return closed_form(model, classify(model), variant);
}

using Approximation = std::variant<AsymptoticTerm, EecResult>;

/// Closed form when the regime is recognised, numeric EEC otherwise.
inline Approximation approximate(const BivariateModel& model, double u, const EecOptions& opt = {}) {
  const CaseClassification c = classify(model, opt.tol);
  if (c.tag != CaseTag::GeneralFallback) return closed_form(model, c);
  return eec::eec(model, u, opt);
}

}  // namespace eec
