#pragma once

#include <cstddef>
#include <string_view>

namespace eec {

enum class Method { PlainMC, ImportanceSampled, Quadrature, Lattice };

constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::PlainMC: return "PlainMC";
    case Method::ImportanceSampled: return "ImportanceSampled";
    case Method::Quadrature: return "Quadrature";
    case Method::Lattice: return "Lattice";
  }
  return "?";
}

/// A value together with its error measure. For Monte Carlo methods `error`
/// is the standard error; for deterministic integration it is the estimated
/// absolute error.
struct Estimate {
  double value = 0.0;
  double error = 0.0;
  std::size_t n = 0;
  Method method = Method::Quadrature;
  bool low_confidence = false;
};

}  // namespace eec
