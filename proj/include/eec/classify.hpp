#pragma once

// Location of the global maximizers of r(t, s) on [0,1]^2 and the local
// derivative bundle used by the closed-form asymptotics.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "eec/errors.hpp"
#include "eec/model.hpp"
#include "eec/parallel.hpp"
#include "eec/tolerances.hpp"

namespace eec {

struct LocalGeometry {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double r = 0.0;
  double r1 = 0.0;   // d r / dt
  double r2 = 0.0;   // d r / ds
  double r11 = 0.0;
  double r22 = 0.0;
  double r12 = 0.0;
};

inline LocalGeometry local_geometry(const BivariateModel& model, double t, double s) {
  LocalGeometry g;
  g.lambda1 = model.lambda_x();
  g.lambda2 = model.lambda_y();
  g.r = model.cross_partial(t, s, 0, 0);
  g.r1 = model.cross_partial(t, s, 1, 0);
  g.r2 = model.cross_partial(t, s, 0, 1);
  g.r11 = model.cross_partial(t, s, 2, 0);
  g.r22 = model.cross_partial(t, s, 0, 2);
  g.r12 = model.cross_partial(t, s, 1, 1);
  return g;
}

enum class CaseTag {
  Corner_r1r2Nonzero,
  Corner_r1Zero,
  Corner_BothZero,
  EdgePoint_r2Nonzero,
  EdgePoint_r2Zero,
  UniqueInterior,
  DiagonalLine,
  GeneralFallback,
};

inline std::string to_string(CaseTag t) {
  switch (t) {
    case CaseTag::Corner_r1r2Nonzero: return "Corner_r1r2Nonzero";
    case CaseTag::Corner_r1Zero: return "Corner_r1Zero";
    case CaseTag::Corner_BothZero: return "Corner_BothZero";
    case CaseTag::EdgePoint_r2Nonzero: return "EdgePoint_r2Nonzero";
    case CaseTag::EdgePoint_r2Zero: return "EdgePoint_r2Zero";
    case CaseTag::UniqueInterior: return "UniqueInterior";
    case CaseTag::DiagonalLine: return "DiagonalLine";
    case CaseTag::GeneralFallback: return "GeneralFallback";
  }
  return "?";
}

struct Point2 {
  double t = 0.0;
  double s = 0.0;
};

struct CaseClassification {
  CaseTag tag = CaseTag::GeneralFallback;
  std::vector<Point2> maximizers;
  double R = 0.0;
  LocalGeometry geometry;  // at maximizers.front()
  // Regimes stated with the vanishing partial in t at a corner, or with the
  // edge in s, also occur mirrored; then the X and Y roles are exchanged.
  bool roles_swapped = false;
  std::vector<std::string> notes;
};

namespace detail {

inline bool on_bound(double x) { return x == 0.0 || x == 1.0; }

/// Projected Newton ascent for r on the unit square from a seed.
inline Point2 refine_maximizer(const BivariateModel& model, Point2 p, const Tolerances& tol) {
  auto value = [&](const Point2& q) { return model.r(q.t, q.s); };
  auto clamp01 = [](double x) { return std::clamp(x, 0.0, 1.0); };
  for (int it = 0; it < tol.newton_iterations; ++it) {
    const LocalGeometry g = local_geometry(model, p.t, p.s);
    // coordinates pinned at a bound with the gradient pointing outward
    const bool fix_t = (p.t <= 0.0 && g.r1 <= 0.0) || (p.t >= 1.0 && g.r1 >= 0.0);
    const bool fix_s = (p.s <= 0.0 && g.r2 <= 0.0) || (p.s >= 1.0 && g.r2 >= 0.0);
    double dt = 0.0, ds = 0.0;
    if (!fix_t && !fix_s) {
      const double det = g.r11 * g.r22 - g.r12 * g.r12;
      if (g.r11 < 0.0 && det > 0.0) {
        dt = -(g.r22 * g.r1 - g.r12 * g.r2) / det;
        ds = -(-g.r12 * g.r1 + g.r11 * g.r2) / det;
      } else {
        dt = g.r1;
        ds = g.r2;
      }
    } else if (!fix_t) {
      dt = g.r11 < 0.0 ? -g.r1 / g.r11 : g.r1;
    } else if (!fix_s) {
      ds = g.r22 < 0.0 ? -g.r2 / g.r22 : g.r2;
    }
    const double f0 = value(p);
    double step = 1.0;
    Point2 next = p;
    bool moved = false;
    for (int k = 0; k < 60; ++k) {
      next = {clamp01(p.t + step * dt), clamp01(p.s + step * ds)};
      if (value(next) >= f0) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    const double len = std::hypot(next.t - p.t, next.s - p.s);
    p = next;
    if (len < tol.newton_step) break;
  }
  // snap to the boundary when within rounding of it
  for (double* x : {&p.t, &p.s}) {
    if (*x < 1e-12) *x = 0.0;
    if (*x > 1.0 - 1e-12) *x = 1.0;
  }
  return p;
}

}  // namespace detail

/// Finds the global maximizers of r and matches the asymptotic regime.
inline CaseClassification classify(const BivariateModel& model, const Tolerances& tol = {}) {
  const int n = tol.scan_points;
  if (n < 3) throw ArgumentError("classify: scan grid needs at least 3 points per side");
  const double h = 1.0 / (n - 1);
  std::vector<double> grid(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    for (int j = 0; j < n; ++j)
      grid[i * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] =
          model.r(static_cast<double>(i) * h, j * h);
  });
  auto at = [&](int i, int j) {
    return grid[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
  };
  const double gmax = *std::max_element(grid.begin(), grid.end());

  CaseClassification out;

  // One-dimensional maximizer sets show up as long runs of near-maximal cells.
  std::vector<std::pair<int, int>> near;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (at(i, j) >= gmax - tol.maximizer_cluster) near.emplace_back(i, j);
  if (near.size() >= 5) {
    const int offset = near.front().first - near.front().second;
    const bool same_diagonal = std::all_of(near.begin(), near.end(), [&](const auto& c) {
      return c.first - c.second == offset;
    });
    out.R = gmax;
    for (const auto& [i, j] : near) out.maximizers.push_back({i * h, j * h});
    out.geometry = local_geometry(model, out.maximizers.front().t, out.maximizers.front().s);
    if (same_diagonal && offset == 0 && static_cast<int>(near.size()) == n) {
      out.tag = CaseTag::DiagonalLine;
      return out;
    }
    out.tag = CaseTag::GeneralFallback;
    out.notes.push_back(same_diagonal
                            ? "maximizer set is a partial segment parallel to the diagonal"
                            : "maximizer set is one-dimensional and not parallel to the diagonal");
    return out;
  }

  // Seeds: discrete local maxima close to the top.
  std::vector<Point2> seeds;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = at(i, j);
      if (v < gmax - tol.seed_window) continue;
      bool local = true;
      for (int di = -1; di <= 1 && local; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          const int a = i + di, b = j + dj;
          if ((di || dj) && a >= 0 && a < n && b >= 0 && b < n && at(a, b) > v) {
            local = false;
            break;
          }
        }
      if (local) seeds.push_back({i * h, j * h});
    }

  std::vector<std::pair<Point2, double>> refined;
  for (const Point2& s : seeds) {
    const Point2 p = detail::refine_maximizer(model, s, tol);
    refined.emplace_back(p, model.r(p.t, p.s));
  }
  double best = -1.0;
  for (const auto& [p, v] : refined) best = std::max(best, v);
  for (const auto& [p, v] : refined) {
    if (v < best - tol.maximizer_cluster) continue;
    const bool dup = std::any_of(out.maximizers.begin(), out.maximizers.end(), [&](const Point2& q) {
      return std::hypot(q.t - p.t, q.s - p.s) < tol.maximizer_merge;
    });
    if (!dup) out.maximizers.push_back(p);
  }
  out.R = best;
  const Point2 m = out.maximizers.front();
  out.geometry = local_geometry(model, m.t, m.s);
  if (out.maximizers.size() > 1) {
    out.tag = CaseTag::GeneralFallback;
    out.notes.push_back(std::to_string(out.maximizers.size()) + " isolated maximizers");
    return out;
  }

  const LocalGeometry& g = out.geometry;
  const bool z1 = std::abs(g.r1) < tol.gradient_zero;
  const bool z2 = std::abs(g.r2) < tol.gradient_zero;
  const bool bt = detail::on_bound(m.t), bs = detail::on_bound(m.s);
  if (bt && bs) {
    if (!z1 && !z2) {
      out.tag = CaseTag::Corner_r1r2Nonzero;
    } else if (z1 && z2) {
      out.tag = CaseTag::Corner_BothZero;
    } else {
      out.tag = CaseTag::Corner_r1Zero;
      out.roles_swapped = z2;
    }
  } else if (bt || bs) {
    // edge: interior coordinate is the one whose partial vanishes
    out.roles_swapped = bt;
    const bool interior_zero = bt ? z2 : z1;
    const bool edge_zero = bt ? z1 : z2;
    if (!interior_zero) {
      out.tag = CaseTag::GeneralFallback;
      out.notes.push_back("gradient does not vanish along the edge at the maximizer");
    } else {
      out.tag = edge_zero ? CaseTag::EdgePoint_r2Zero : CaseTag::EdgePoint_r2Nonzero;
    }
  } else {
    if (z1 && z2 && g.r11 < 0.0 && g.r22 < 0.0) {
      out.tag = CaseTag::UniqueInterior;
    } else {
      out.tag = CaseTag::GeneralFallback;
      out.notes.push_back("interior maximizer without a negative definite Hessian");
    }
  }
  return out;
}

}  // namespace eec
