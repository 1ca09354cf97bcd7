#pragma once

#include <cstddef>

namespace eec {

/// Every numerical threshold used by the library, in one place. Tests and
/// the CLI refer to these by name.
struct Tolerances {
  // model validation
  double psd_pivot = -1e-8;          // factorization pivots above this count as PSD
  double degenerate_pivot = 1e-12;   // diagonal-block pivots below this are noted
  double nondegenerate_pivot = 1e-10;  // point-wise derivative blocks must exceed this
  double h3 = 1e-8;                  // Hessian restrictions must be <= this

  // classification
  double gradient_zero = 1e-7;
  double maximizer_cluster = 1e-9;
  double maximizer_merge = 1e-4;
  double seed_window = 1e-3;
  int scan_points = 101;
  int newton_iterations = 50;
  double newton_step = 1e-12;

  // Gaussian computations
  double observed_pivot = 1e-12;     // conditioning / CDF pivot floor
  double residual_pivot = -1e-10;
  double mvn_abs = 1e-7;
  double mvn_rel = 1e-5;
  double moment_agreement = 1e-5;
  double tail_rel = 1e-8;

  // Kac-Rice quadrature
  double quad_rel = 1e-6;
  double inner_quad_rel = 1e-9;
  std::size_t quad_max_evals = 1'000'000;
  double low_confidence = 1e-4;
  bool cross_check_moments = false;

  // simulation
  double min_effective_sample_size = 100.0;
};

}  // namespace eec
