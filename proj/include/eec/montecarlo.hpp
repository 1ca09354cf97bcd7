#pragma once

// Grid simulation of (X, Y): joint excursion probability (plain and
// importance sampled) and the empirical Euler characteristic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eec/classify.hpp"
#include "eec/errors.hpp"
#include "eec/estimate.hpp"
#include "eec/gauss.hpp"
#include "eec/model.hpp"
#include "eec/parallel.hpp"
#include "eec/tolerances.hpp"
#include "eec/validate.hpp"

namespace eec {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Engine for replicate `rep` of a run seeded with `seed`.
inline std::mt19937_64 replicate_engine(std::uint64_t seed, std::uint64_t rep) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ rep));
}

/// Pairwise sum, fixed association order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

/// Mean and standard error of per-replicate values.
inline Estimate sample_mean(const std::vector<double>& v, Method method) {
  const double n = static_cast<double>(v.size());
  const double mean = pairwise_sum(v) / n;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  const double var = v.size() > 1 ? pairwise_sum(sq) / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n), v.size(), method};
}

/// One factorization of the joint grid covariance, shared by all replicates.
class PathSampler {
 public:
  PathSampler(const BivariateModel& model, int grid_n, const Tolerances& tol = {}) {
    if (grid_n < 64 || grid_n > 4096) throw ArgumentError("gridN must lie in [64, 4096]");
    grid_ = uniform_grid(grid_n);
    const PivotedFactor f = pivoted_cholesky(grid_cov(model, grid_));
    if (!(f.min_pivot > tol.psd_pivot))
      throw DegeneracyError("path covariance is not positive semi-definite (min pivot " +
                                std::to_string(f.min_pivot) + ")",
                            0, f.min_pivot);
    factor_ = f.factor;
    cond_ = f.rank > 0 ? f.max_pivot / std::max(f.min_pivot, 1e-300) : 0.0;
  }

  const std::vector<double>& grid() const { return grid_; }
  int grid_n() const { return static_cast<int>(grid_.size()); }
  Eigen::Index rank() const { return factor_.cols(); }
  const Eigen::MatrixXd& factor() const { return factor_; }
  double condition() const { return cond_; }

  /// Whitened standard normal draw for replicate `rep`.
  Eigen::VectorXd draw(std::mt19937_64& eng) const {
    std::normal_distribution<double> nd;
    Eigen::VectorXd z(rank());
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = nd(eng);
    return z;
  }

 private:
  std::vector<double> grid_;
  Eigen::MatrixXd factor_;  // 2n x rank, X rows first
  double cond_ = 0.0;
};

struct PathBatch {
  std::vector<double> grid;
  Eigen::MatrixXd x_paths;  // replicates x grid
  Eigen::MatrixXd y_paths;
  std::uint64_t seed = 0;
  double factorization_cond = 0.0;
};

inline PathBatch sample_paths(const BivariateModel& model, int grid_n, int reps, std::uint64_t seed,
                              const Tolerances& tol = {}) {
  if (reps < 1) throw ArgumentError("reps must be at least 1");
  const PathSampler sampler(model, grid_n, tol);
  const Eigen::Index n = grid_n;
  PathBatch b;
  b.grid = sampler.grid();
  b.seed = seed;
  b.factorization_cond = sampler.condition();
  b.x_paths.resize(reps, n);
  b.y_paths.resize(reps, n);
  parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
    auto eng = replicate_engine(seed, r);
    const Eigen::VectorXd path = sampler.factor() * sampler.draw(eng);
    b.x_paths.row(static_cast<Eigen::Index>(r)) = path.head(n).transpose();
    b.y_paths.row(static_cast<Eigen::Index>(r)) = path.tail(n).transpose();
  });
  return b;
}

/// Number of maximal runs of grid values >= u.
inline int count_excursion_components(std::span<const double> path, double u) {
  int count = 0;
  bool inside = false;
  for (double v : path) {
    const bool above = v >= u;
    if (above && !inside) ++count;
    inside = above;
  }
  return count;
}

namespace detail {

inline constexpr std::size_t kChunk = 64;

/// Runs visit(rep, path) for every replicate; paths are generated in fixed
/// chunks so the result never depends on the worker count.
template <class Draw, class Visit>
void for_each_path(const PathSampler& sampler, std::size_t reps, std::uint64_t seed, Draw&& draw,
                   Visit&& visit) {
  const std::size_t chunks = (reps + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kChunk, hi = std::min(reps, lo + kChunk);
    Eigen::MatrixXd z(sampler.rank(), static_cast<Eigen::Index>(hi - lo));
    for (std::size_t r = lo; r < hi; ++r) {
      auto eng = replicate_engine(seed, r);
      z.col(static_cast<Eigen::Index>(r - lo)) = draw(r, eng);
    }
    const Eigen::MatrixXd paths = sampler.factor() * z;
    for (std::size_t r = lo; r < hi; ++r) visit(r, paths.col(static_cast<Eigen::Index>(r - lo)), z.col(static_cast<Eigen::Index>(r - lo)));
  });
}

inline std::span<const double> half(const Eigen::Ref<const Eigen::VectorXd>& path, int which, Eigen::Index n) {
  return {path.data() + which * n, static_cast<std::size_t>(n)};
}

}  // namespace detail

/// Mean of chi(X-excursion) chi(Y-excursion) over replicates.
inline Estimate estimate_eec(const BivariateModel& model, double u, int grid_n, int reps, std::uint64_t seed,
                             const Tolerances& tol = {}) {
  if (reps < 1) throw ArgumentError("reps must be at least 1");
  const PathSampler sampler(model, grid_n, tol);
  const Eigen::Index n = grid_n;
  std::vector<double> v(static_cast<std::size_t>(reps));
  detail::for_each_path(
      sampler, v.size(), seed, [&](std::size_t, std::mt19937_64& eng) { return sampler.draw(eng); },
      [&](std::size_t r, const Eigen::Ref<const Eigen::VectorXd>& path, const auto&) {
        v[r] = static_cast<double>(count_excursion_components(detail::half(path, 0, n), u)) *
               count_excursion_components(detail::half(path, 1, n), u);
      });
  return sample_mean(v, Method::PlainMC);
}

struct McEstimate : Estimate {
  int grid_n = 0;
  double effective_sample_size = 0.0;
};

/// Spread-out subset of the maximizers of r, used as importance-sampling
/// anchors: all of them when few, otherwise farthest-point sampling.
inline std::vector<Point2> default_shift(const BivariateModel& model, std::size_t max_points = 16,
                                         const Tolerances& tol = {}) {
  const CaseClassification c = classify(model, tol);
  const std::vector<Point2>& m = c.maximizers;
  if (m.size() <= max_points) return m;
  std::vector<Point2> out = {m.front()};
  std::vector<double> dist(m.size(), kInf);
  while (out.size() < max_points) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      dist[i] = std::min(dist[i], std::hypot(m[i].t - out.back().t, m[i].s - out.back().s));
      if (dist[i] > dist[best]) best = i;
    }
    out.push_back(m[best]);
  }
  return out;
}

/// P{max X >= u, max Y >= u} on the grid. Without `shift` this is plain
/// Monte Carlo. With `shift` the paths are drawn from an equal-weight
/// mixture of mean shifts E{(X, Y) | X(t*) = u, Y(s*) = u}, one per anchor,
/// and reweighted by the exact likelihood ratio.
inline McEstimate estimate_joint_excursion(const BivariateModel& model, double u, int grid_n, int reps,
                                           std::uint64_t seed,
                                           const std::optional<std::vector<Point2>>& shift = std::nullopt,
                                           const Tolerances& tol = {}) {
  if (reps < 1) throw ArgumentError("reps must be at least 1");
  const PathSampler sampler(model, grid_n, tol);
  const Eigen::Index n = grid_n;
  const Eigen::MatrixXd& f = sampler.factor();

  // whitened shifts: L delta = Sigma_{., o} Sigma_oo^{-1} (u, u)
  std::vector<Eigen::VectorXd> deltas;
  if (shift) {
    if (shift->empty()) throw ArgumentError("importance sampling needs at least one anchor");
    for (const Point2& p : *shift) {
      if (!(p.t >= 0.0 && p.t <= 1.0 && p.s >= 0.0 && p.s <= 1.0))
        throw ArgumentError("importance-sampling anchor outside [0,1]^2");
      const Eigen::Index it = std::lround(p.t * static_cast<double>(n - 1));
      const Eigen::Index is = n + std::lround(p.s * static_cast<double>(n - 1));
      Eigen::MatrixXd lo(2, f.cols());
      lo.row(0) = f.row(it);
      lo.row(1) = f.row(is);
      const Eigen::Matrix2d soo = lo * lo.transpose();
      if (!(soo.determinant() > tol.observed_pivot))
        throw DegeneracyError("importance-sampling anchor values are degenerate", 0, soo.determinant());
      deltas.push_back(lo.transpose() * soo.ldlt().solve(Eigen::Vector2d(u, u)));
    }
  }
  const std::size_t k = deltas.size();
  std::vector<double> half_norm(k);
  for (std::size_t j = 0; j < k; ++j) half_norm[j] = 0.5 * deltas[j].squaredNorm();

  std::vector<double> v(static_cast<std::size_t>(reps));
  detail::for_each_path(
      sampler, v.size(), seed,
      [&](std::size_t, std::mt19937_64& eng) -> Eigen::VectorXd {
        if (k == 0) return sampler.draw(eng);
        const std::size_t comp = std::uniform_int_distribution<std::size_t>(0, k - 1)(eng);
        return sampler.draw(eng) + deltas[comp];
      },
      [&](std::size_t r, const Eigen::Ref<const Eigen::VectorXd>& path, const auto& z) {
        const auto x = detail::half(path, 0, n), y = detail::half(path, 1, n);
        const bool hit = *std::max_element(x.begin(), x.end()) >= u && *std::max_element(y.begin(), y.end()) >= u;
        if (!hit) {
          v[r] = 0.0;
          return;
        }
        if (k == 0) {
          v[r] = 1.0;
          return;
        }
        // weight = 1 / mean_j exp(delta_j . z - |delta_j|^2 / 2)
        std::vector<double> e(k);
        double top = -kInf;
        for (std::size_t j = 0; j < k; ++j) {
          e[j] = deltas[j].dot(z) - half_norm[j];
          top = std::max(top, e[j]);
        }
        double s = 0.0;
        for (double ej : e) s += std::exp(ej - top);
        v[r] = std::exp(-top - std::log(s / static_cast<double>(k)));
      });

  McEstimate out;
  static_cast<Estimate&>(out) = sample_mean(v, k == 0 ? Method::PlainMC : Method::ImportanceSampled);
  out.grid_n = grid_n;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = v[i] * v[i];
  const double s1 = pairwise_sum(v), s2 = pairwise_sum(sq);
  out.effective_sample_size = s2 > 0.0 ? s1 * s1 / s2 : 0.0;
  if (k > 0 && out.effective_sample_size < tol.min_effective_sample_size) out.low_confidence = true;
  return out;
}

/// Plain joint-excursion estimates on nested subgrids of one set of paths:
/// the fine grid has `fine_n` points and level j keeps every 2^j-th point.
/// Returned coarsest first.
inline std::vector<McEstimate> excursion_refinement(const BivariateModel& model, double u, int fine_n, int levels,
                                                    int reps, std::uint64_t seed, const Tolerances& tol = {}) {
  if (levels < 1 || ((fine_n - 1) % (1 << (levels - 1))) != 0)
    throw ArgumentError("fine grid must nest the requested number of dyadic levels");
  const PathSampler sampler(model, fine_n, tol);
  const Eigen::Index n = fine_n;
  std::vector<std::vector<double>> v(static_cast<std::size_t>(levels), std::vector<double>(static_cast<std::size_t>(reps)));
  detail::for_each_path(
      sampler, static_cast<std::size_t>(reps), seed, [&](std::size_t, std::mt19937_64& eng) { return sampler.draw(eng); },
      [&](std::size_t r, const Eigen::Ref<const Eigen::VectorXd>& path, const auto&) {
        for (int j = 0; j < levels; ++j) {
          const Eigen::Index stride = Eigen::Index(1) << j;
          double mx = -kInf, my = -kInf;
          for (Eigen::Index i = 0; i < n; i += stride) {
            mx = std::max(mx, path(i));
            my = std::max(my, path(n + i));
          }
          v[static_cast<std::size_t>(j)][r] = (mx >= u && my >= u) ? 1.0 : 0.0;
        }
      });
  std::vector<McEstimate> out;
  for (int j = levels - 1; j >= 0; --j) {
    McEstimate e;
    static_cast<Estimate&>(e) = sample_mean(v[static_cast<std::size_t>(j)], Method::PlainMC);
    e.grid_n = static_cast<int>((fine_n - 1) / (1 << j)) + 1;
    e.effective_sample_size = static_cast<double>(reps);
    out.push_back(e);
  }
  return out;
}

}  // namespace eec
