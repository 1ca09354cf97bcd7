#pragma once

// Numerical checks of the standing assumptions on a model.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eec/classify.hpp"
#include "eec/errors.hpp"
#include "eec/gauss.hpp"
#include "eec/model.hpp"
#include "eec/tolerances.hpp"

namespace eec {

struct ValidationReport {
  bool psd_ok = false;
  double min_pivot = 0.0;
  double unit_variance_max_err = 0.0;
  bool h3_ok = false;
  double h3_worst_eigenvalue = -std::numeric_limits<double>::infinity();
  int maximizer_count = 0;
  std::vector<std::string> notes;
};

/// Uniform grid i / (n - 1), i = 0..n-1.
inline std::vector<double> uniform_grid(int n) {
  if (n < 2) throw ArgumentError("grid needs at least 2 points");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n - 1);
  g.back() = 1.0;
  return g;
}

/// Joint covariance of (X on grid, Y on grid), X block first.
inline Eigen::MatrixXd grid_cov(const BivariateModel& model, const std::vector<double>& grid) {
  std::vector<PointSpec> specs;
  specs.reserve(2 * grid.size());
  for (double t : grid) specs.push_back({Process::X, t, 0});
  for (double s : grid) specs.push_back({Process::Y, s, 0});
  return joint_cov(model, specs);
}

inline ValidationReport validate_model(const BivariateModel& model, int grid_n, const Tolerances& tol = {}) {
  if (grid_n < 16) throw ArgumentError("validate_model: gridN must be at least 16");
  ValidationReport rep;
  const std::vector<double> grid = uniform_grid(grid_n);
  const Eigen::MatrixXd cov = grid_cov(model, grid);

  const PivotedFactor f = pivoted_cholesky(cov);
  rep.min_pivot = f.min_pivot;
  rep.psd_ok = rep.min_pivot > tol.psd_pivot;
  if (!rep.psd_ok) rep.notes.push_back("joint grid covariance is not positive semi-definite");

  for (Eigen::Index i = 0; i < cov.rows(); ++i)
    rep.unit_variance_max_err = std::max(rep.unit_variance_max_err, std::abs(cov(i, i) - 1.0));
  if (rep.unit_variance_max_err > 1e-12) rep.notes.push_back("variances deviate from 1");

  const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
  for (int b = 0; b < 2; ++b) {
    const PivotedFactor fb = pivoted_cholesky(cov.block(b * n, b * n, n, n), 0.0);
    if (fb.rank < n || fb.min_pivot < tol.degenerate_pivot) {
      std::ostringstream os;
      os << (b == 0 ? "X" : "Y") << " grid block is numerically degenerate (rank " << fb.rank << " of " << n
         << ", smallest pivot " << std::scientific << std::setprecision(2) << fb.min_pivot << ")";
      rep.notes.push_back(os.str());
    }
  }

  // pointwise non-degeneracy of the values and derivatives used by Kac-Rice
  int h2_failures = 0;
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0})
    for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const Eigen::MatrixXd c = joint_cov(model, {{Process::X, t, 0},
                                                  {Process::Y, s, 0},
                                                  {Process::X, t, 1},
                                                  {Process::Y, s, 1}});
      try {
        cholesky_checked(c, tol.nondegenerate_pivot, "point covariance");
      } catch (const DegeneracyError&) {
        ++h2_failures;
      }
    }
  if (h2_failures > 0)
    rep.notes.push_back(std::to_string(h2_failures) + " of 25 point pairs have a degenerate (X, Y, X', Y') law");

  const CaseClassification c = classify(model, tol);
  rep.maximizer_count = static_cast<int>(c.maximizers.size());
  rep.h3_ok = true;
  for (const Point2& p : c.maximizers) {
    const LocalGeometry g = local_geometry(model, p.t, p.s);
    if (std::abs(g.r1) < tol.gradient_zero) rep.h3_worst_eigenvalue = std::max(rep.h3_worst_eigenvalue, g.r11);
    if (std::abs(g.r2) < tol.gradient_zero) rep.h3_worst_eigenvalue = std::max(rep.h3_worst_eigenvalue, g.r22);
  }
  if (rep.h3_worst_eigenvalue > tol.h3) {
    rep.h3_ok = false;
    rep.notes.push_back("Hessian of r is not negative semi-definite at a maximizer");
  }
  for (const auto& n2 : c.notes) rep.notes.push_back(n2);
  return rep;
}

}  // namespace eec
