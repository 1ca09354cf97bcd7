#pragma once

// Command-line front end: every command writes one CSV table.
//
//   validate     model checks
//   classify     maximizer location and regime
//   eec          numeric expected Euler characteristic with term breakdown
//   closed-form  leading-order asymptotic term
//   simulate     Monte Carlo EEC and joint excursion estimates
//   compare      closed form vs numeric EEC vs importance-sampled MC, with
//                acceptance bands (exit 4 when violated)

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eec/asymptotics.hpp"
#include "eec/classify.hpp"
#include "eec/errors.hpp"
#include "eec/kacrice.hpp"
#include "eec/model.hpp"
#include "eec/model_io.hpp"
#include "eec/montecarlo.hpp"
#include "eec/tolerances.hpp"
#include "eec/validate.hpp"

namespace eec::cli {

enum class Command { Validate, Classify, Eec, ClosedForm, Simulate, Compare };

inline constexpr int kOk = 0;
inline constexpr int kArgumentError = 2;
inline constexpr int kNumericalError = 3;
inline constexpr int kBandViolation = 4;

struct RunConfig {
  Command command = Command::Validate;
  std::string model_name;
  std::string model_file;
  std::vector<double> u;
  int grid = 512;
  int reps = 20000;
  std::optional<std::uint64_t> seed;
  Tolerances tol;
  std::string out;  // empty: standard output
  Theorem theorem = Theorem::Full;
  ClosedFormVariant variant = ClosedFormVariant::Standard;
};

/// Bands enforced by `compare`.
struct Bands {
  double ratio_lo = 0.85;
  double ratio_hi = 1.15;
  double mc_sigmas = 3.0;
  double mc_relative = 0.10;
};

inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

class Csv {
 public:
  explicit Csv(std::ostream& os) : os_(os) {}
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << quoted(cells[i]);
    os_ << '\n';
  }

 private:
  std::ostream& os_;
};

inline BivariateModel resolve_model(const RunConfig& cfg) {
  if (cfg.model_name.empty() == cfg.model_file.empty())
    throw ArgumentError("exactly one of --model and --model-file is required");
  return cfg.model_name.empty() ? load_model(cfg.model_file) : fixture(cfg.model_name);
}

inline void check_config(const RunConfig& cfg) {
  const bool needs_u = cfg.command != Command::Validate && cfg.command != Command::Classify;
  if (needs_u && cfg.u.empty()) throw ArgumentError("--u needs at least one level");
  const bool needs_seed = cfg.command == Command::Simulate || cfg.command == Command::Compare;
  if (needs_seed && !cfg.seed) throw ArgumentError("--seed is required for simulate and compare");
  if (cfg.reps < 1) throw ArgumentError("--reps must be positive");
  if (!(cfg.tol.quad_rel > 0.0)) throw ArgumentError("--tol-quad must be positive");
  for (double u : cfg.u)
    if (!std::isfinite(u)) throw ArgumentError("--u values must be finite");
}

namespace detail {

inline int cmd_validate(const RunConfig& cfg, const BivariateModel& m, Csv& csv) {
  const int n = std::max(cfg.grid, 16);
  const ValidationReport r = validate_model(m, n, cfg.tol);
  csv.row({"model", "grid_n", "psd_ok", "min_pivot", "unit_variance_max_err", "h3_ok", "h3_worst_eigenvalue",
           "maximizer_count", "notes"});
  std::string notes;
  for (const auto& s : r.notes) notes += (notes.empty() ? "" : "; ") + s;
  csv.row({m.label(), std::to_string(n), r.psd_ok ? "true" : "false", num(r.min_pivot),
           num(r.unit_variance_max_err), r.h3_ok ? "true" : "false", num(r.h3_worst_eigenvalue),
           std::to_string(r.maximizer_count), notes});
  return r.psd_ok && r.h3_ok ? kOk : kNumericalError;
}

inline int cmd_classify(const RunConfig& cfg, const BivariateModel& m, Csv& csv) {
  const CaseClassification c = classify(m, cfg.tol);
  const LocalGeometry& g = c.geometry;
  csv.row({"model", "tag", "t_star", "s_star", "R", "maximizer_count", "roles_swapped", "lambda1", "lambda2", "r1",
           "r2", "r11", "r22", "r12"});
  const Point2 p = c.maximizers.front();
  csv.row({m.label(), to_string(c.tag), num(p.t), num(p.s), num(c.R), std::to_string(c.maximizers.size()),
           c.roles_swapped ? "true" : "false", num(g.lambda1), num(g.lambda2), num(g.r1), num(g.r2), num(g.r11),
           num(g.r22), num(g.r12)});
  return kOk;
}

inline std::string term_column(const FacePairTerm& t) {
  auto name = [](Face f) {
    switch (f) {
      case Face::Left: return std::string("left");
      case Face::Right: return std::string("right");
      case Face::Interior: return std::string("interior");
    }
    return std::string("?");
  };
  return "x_" + name(t.face_x) + "_y_" + name(t.face_y);
}

inline int cmd_eec(const RunConfig& cfg, const BivariateModel& m, Csv& csv) {
  EecOptions opt;
  opt.theorem = cfg.theorem;
  opt.tol = cfg.tol;
  bool header = false;
  for (double u : cfg.u) {
    const EecResult r = eec::eec(m, u, opt);
    if (!header) {
      std::vector<std::string> h = {"u", "eec", "error", "low_confidence"};
      for (const auto& t : r.terms) h.push_back(term_column(t));
      csv.row(h);
      header = true;
    }
    std::vector<std::string> row = {num(u), num(r.total.value), num(r.total.error),
                                    r.total.low_confidence ? "true" : "false"};
    for (const auto& t : r.terms) row.push_back(num(t.sign * t.value.value));
    csv.row(row);
  }
  return kOk;
}

inline int cmd_closed_form(const RunConfig& cfg, const BivariateModel& m, Csv& csv) {
  const CaseClassification c = classify(m, cfg.tol);
  const AsymptoticTerm a = closed_form(m, c, cfg.variant);
  csv.row({"u", "tag", "coefficient", "power", "rate", "value"});
  for (double u : cfg.u)
    csv.row({num(u), to_string(a.tag), num(a.coefficient), std::to_string(a.power), num(a.rate), num(a.value(u))});
  return kOk;
}

inline int cmd_simulate(const RunConfig& cfg, const BivariateModel& m, Csv& csv) {
  const std::vector<Point2> anchors = default_shift(m, 16, cfg.tol);
  csv.row({"u", "grid_n", "reps", "seed", "eec_mc", "eec_mc_stderr", "joint_plain", "joint_plain_stderr", "joint_is",
           "joint_is_stderr", "is_effective_sample_size", "is_low_confidence"});
  for (double u : cfg.u) {
    const Estimate e = estimate_eec(m, u, cfg.grid, cfg.reps, *cfg.seed, cfg.tol);
    const McEstimate p = estimate_joint_excursion(m, u, cfg.grid, cfg.reps, *cfg.seed, std::nullopt, cfg.tol);
    const McEstimate q = estimate_joint_excursion(m, u, cfg.grid, cfg.reps, *cfg.seed, anchors, cfg.tol);
    csv.row({num(u), std::to_string(cfg.grid), std::to_string(cfg.reps), std::to_string(*cfg.seed), num(e.value),
             num(e.error), num(p.value), num(p.error), num(q.value), num(q.error), num(q.effective_sample_size),
             q.low_confidence ? "true" : "false"});
  }
  return kOk;
}

inline int cmd_compare(const RunConfig& cfg, const BivariateModel& m, Csv& csv, std::ostream& err) {
  const Bands bands;
  EecOptions opt;
  opt.theorem = cfg.theorem;
  opt.tol = cfg.tol;
  const CaseClassification c = classify(m, cfg.tol);
  std::optional<AsymptoticTerm> cf;
  if (c.tag != CaseTag::GeneralFallback) cf = closed_form(m, c, cfg.variant);
  const std::vector<Point2> anchors = default_shift(m, 16, cfg.tol);

  std::vector<double> us = cfg.u;
  std::sort(us.begin(), us.end());
  csv.row({"u", "closed_form", "eec_numeric", "mc_estimate", "mc_stderr", "ratio_cf_eec", "ratio_eec_mc"});
  std::vector<std::string> violations;
  double prev_dev = std::numeric_limits<double>::infinity();
  double last_ratio = std::numeric_limits<double>::quiet_NaN();
  for (double u : us) {
    const EecResult r = eec::eec(m, u, opt);
    const McEstimate mc = estimate_joint_excursion(m, u, cfg.grid, cfg.reps, *cfg.seed, anchors, cfg.tol);
    const double cfv = cf ? cf->value(u) : std::numeric_limits<double>::quiet_NaN();
    const double ratio = cfv / r.total.value;
    csv.row({num(u), num(cfv), num(r.total.value), num(mc.value), num(mc.error), num(ratio),
             num(r.total.value / mc.value)});

    const double se = std::hypot(mc.error, r.total.error);
    const double gap = std::abs(r.total.value - mc.value);
    if (gap > std::max(bands.mc_sigmas * se, bands.mc_relative * std::abs(r.total.value)))
      violations.push_back("u=" + num(u) + ": numeric EEC and Monte Carlo differ by " + num(gap));
    if (cf) {
      const double dev = std::abs(ratio - 1.0);
      if (dev > prev_dev)
        violations.push_back("u=" + num(u) + ": |closed_form/eec - 1| increased to " + num(dev));
      prev_dev = dev;
      last_ratio = ratio;
    }
  }
  if (cf && !(last_ratio >= bands.ratio_lo && last_ratio <= bands.ratio_hi))
    violations.push_back("closed_form/eec = " + num(last_ratio) + " at the largest level is outside [" +
                         num(bands.ratio_lo) + ", " + num(bands.ratio_hi) + "]");
  for (const auto& v : violations) err << "band violation: " << v << '\n';
  return violations.empty() ? kOk : kBandViolation;
}

}  // namespace detail

/// Executes one command; CSV goes to `out` unless cfg.out names a file.
inline int run(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    check_config(cfg);
    const BivariateModel m = resolve_model(cfg);
    std::ofstream file;
    if (!cfg.out.empty()) {
      file.open(cfg.out, std::ios::binary);
      if (!file) throw ArgumentError("cannot write '" + cfg.out + "'");
    }
    std::ostream& os = cfg.out.empty() ? out : file;
    Csv csv(os);
    switch (cfg.command) {
      case Command::Validate: return detail::cmd_validate(cfg, m, csv);
      case Command::Classify: return detail::cmd_classify(cfg, m, csv);
      case Command::Eec: return detail::cmd_eec(cfg, m, csv);
      case Command::ClosedForm: return detail::cmd_closed_form(cfg, m, csv);
      case Command::Simulate: return detail::cmd_simulate(cfg, m, csv);
      case Command::Compare: return detail::cmd_compare(cfg, m, csv, err);
    }
    return kArgumentError;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kArgumentError;
  } catch (const AccuracyError& e) {
    err << "numerical error: " << e.what() << " (best value " << num(e.best_value()) << ", achieved error "
        << num(e.achieved_error()) << ")\n";
    return kNumericalError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  }
}

/// Parses argv into a RunConfig. Returns an exit code when parsing ends the
/// run (help or an argument error).
inline std::optional<int> parse(int argc, const char* const* argv, RunConfig& cfg, std::ostream& out = std::cout,
                                std::ostream& err = std::cerr) {
  CLI::App app{"Expected Euler characteristic approximation of joint excursion probabilities"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value file; command-line flags take precedence");

  std::string theorem = "full", variant = "standard";
  std::uint64_t seed = 0;
  std::vector<double> u;
  app.add_option("--model", cfg.model_name, "fixture name");
  app.add_option("--model-file", cfg.model_file, "model description file");
  app.add_option("--u", u, "comma-separated levels")->delimiter(',');
  app.add_option("--grid", cfg.grid, "simulation / validation grid size")->capture_default_str();
  app.add_option("--reps", cfg.reps, "Monte Carlo replicates")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "Monte Carlo seed");
  app.add_option("--tol-quad", cfg.tol.quad_rel, "relative quadrature tolerance")->capture_default_str();
  app.add_option("--out", cfg.out, "output CSV path (default: standard output)");
  app.add_option("--theorem", theorem, "face set: full or restricted")
      ->check(CLI::IsMember({"full", "restricted", "3.1", "3.3-restricted"}))
      ->capture_default_str();
  app.add_option("--variant", variant, "closed-form variant: standard or corrected")
      ->check(CLI::IsMember({"standard", "corrected"}))
      ->capture_default_str();

  const std::vector<std::pair<std::string, Command>> commands = {
      {"validate", Command::Validate},       {"classify", Command::Classify}, {"eec", Command::Eec},
      {"closed-form", Command::ClosedForm}, {"simulate", Command::Simulate}, {"compare", Command::Compare}};
  for (const auto& [name, cmd] : commands) app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kArgumentError;
  }
  for (const auto& [name, cmd] : commands)
    if (app.got_subcommand(name)) cfg.command = cmd;
  cfg.u = u;
  if (seed_opt->count() > 0) cfg.seed = seed;
  cfg.theorem = (theorem == "restricted" || theorem == "3.3-restricted") ? Theorem::Restricted : Theorem::Full;
  cfg.variant = variant == "corrected" ? ClosedFormVariant::Corrected : ClosedFormVariant::Standard;
  return std::nullopt;
}

inline int main(int argc, const char* const* argv) {
  RunConfig cfg;
  if (const auto code = parse(argc, argv, cfg)) return *code;
  return run(cfg);
}

}  // namespace eec::cli
