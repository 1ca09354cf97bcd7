#pragma once

// Plain-text model description: one `key = value` per line, `#` comments.
//
//   kernel_x   = sqexp        scale_x = 1
//   kernel_y   = sqexp        scale_y = 1
//   cross_form = shift-mixture | point-anchor | independent
//   c, d                      (shift-mixture)
//   c, t_star, s_star         (point-anchor)
//   label      = free text

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>

#include "eec/errors.hpp"
#include "eec/model.hpp"

namespace eec {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_real(const std::map<std::string, std::string>& kv, const std::string& key, double fallback,
                         bool required) {
  const auto it = kv.find(key);
  if (it == kv.end()) {
    if (required) throw ArgumentError("model file: missing key '" + key + "'");
    return fallback;
  }
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0' || !std::isfinite(v))
    throw ArgumentError("model file: '" + key + "' is not a number: " + it->second);
  return v;
}

inline Kernel parse_kernel(const std::map<std::string, std::string>& kv, const std::string& which) {
  const auto it = kv.find("kernel_" + which);
  const std::string family = it == kv.end() ? "sqexp" : it->second;
  if (family != "sqexp" && family != "squared-exponential")
    throw ArgumentError("model file: kernel_" + which + " must be sqexp, got '" + family + "'");
  return Kernel::squared_exponential(parse_real(kv, "scale_" + which, 1.0, false));
}

}  // namespace detail

inline BivariateModel parse_model(std::istream& in) {
  static const char* const keys[] = {"kernel_x", "kernel_y", "cross_form", "c", "d",
                                     "t_star",   "s_star",   "scale_x",    "scale_y", "label"};
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ArgumentError("model file line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (std::find(std::begin(keys), std::end(keys), key) == std::end(keys))
      throw ArgumentError("model file line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!kv.emplace(key, value).second)
      throw ArgumentError("model file line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }

  const Kernel kx = detail::parse_kernel(kv, "x");
  const Kernel ky = detail::parse_kernel(kv, "y");
  const std::string label = kv.count("label") ? kv.at("label") : "model";
  const auto form = kv.find("cross_form");
  if (form == kv.end()) throw ArgumentError("model file: missing key 'cross_form'");

  if (form->second == "independent") return BivariateModel(kx, ky, Independent{}, label);
  const double c = detail::parse_real(kv, "c", 0.0, true);
  if (!(c > 0.0 && c < 1.0)) throw ArgumentError("model file: c must lie in (0, 1)");
  if (form->second == "shift-mixture")
    return BivariateModel(kx, ky, ShiftMixture{c, detail::parse_real(kv, "d", 0.0, false), kx}, label);
  if (form->second == "point-anchor")
    return BivariateModel(kx, ky,
                          PointAnchor{c, detail::parse_real(kv, "t_star", 0.0, true),
                                      detail::parse_real(kv, "s_star", 0.0, true), kx, ky},
                          label);
  throw ArgumentError("model file: cross_form must be shift-mixture, point-anchor or independent");
}

inline BivariateModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open model file '" + path + "'");
  return parse_model(in);
}

}  // namespace eec
