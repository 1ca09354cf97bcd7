// Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails or exceeds its time limit.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eec/eec.hpp"

using namespace eec;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  std::function<Outcome()> check;
};

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

void note(Outcome& o, bool ok, const std::string& what) {
  o.pass = o.pass && ok;
  o.detail += (o.detail.empty() ? "" : "; ") + what + (ok ? "" : " [out of band]");
}

Eigen::MatrixXd random_spd(std::mt19937_64& eng, int n) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = z(eng);
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

Outcome check_conditioning_oracle() {
  std::mt19937_64 eng(2024);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const int n = 3 + k % 6;
    const Eigen::MatrixXd cov = random_spd(eng, n);
    std::vector<Eigen::Index> obs, un;
    std::bernoulli_distribution pick(0.5);
    for (Eigen::Index i = 0; i < n; ++i) (pick(eng) ? obs : un).push_back(i);
    if (obs.empty()) obs.push_back(un.back()), un.pop_back();
    if (un.empty()) un.push_back(obs.back()), obs.pop_back();
    const ConditionalLaw law = condition(cov, obs);

    const Eigen::MatrixXd suu = cov(un, un), suo = cov(un, obs), soo = cov(obs, obs);
    const Eigen::MatrixXd soo_inv = soo.inverse();
    const Eigen::MatrixXd schur = suu - suo * soo_inv * suo.transpose();
    const Eigen::MatrixXd inv = cov.inverse();
    const Eigen::MatrixXd block = Eigen::MatrixXd(inv(un, un)).inverse();
    const Eigen::MatrixXd mean_map = suo * soo_inv;
    worst = std::max({worst, (law.residual_cov - schur).cwiseAbs().maxCoeff(),
                      (law.residual_cov - block).cwiseAbs().maxCoeff(),
                      (law.mean_map - mean_map).cwiseAbs().maxCoeff()});
  }
  Outcome o;
  note(o, worst < 1e-10, "max abs difference " + fmt(worst) + " over 200 matrices");
  return o;
}

Outcome check_sigma_closed_form() {
  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (const char* name : {"diagonal", "interior-point"}) {
    const BivariateModel m = fixture(name);
    for (int i = 0; i < 100; ++i) {
      const double t = unit(eng), s = unit(eng);
      const Eigen::MatrixXd cov =
          joint_cov(m, {{Process::X, t, 0}, {Process::Y, s, 0}, {Process::X, t, 1}, {Process::Y, s, 1}});
      const ConditionalLaw law = condition(cov, {2, 3});
      worst = std::max(worst, (sigma_conditional(m, t, s) - law.residual_cov).cwiseAbs().maxCoeff());
    }
  }
  Outcome o;
  note(o, worst < 1e-9, "max abs difference " + fmt(worst));
  return o;
}

Outcome check_mills_ratio() {
  Outcome o;
  for (double R : {-0.3, 0.0, 0.5}) {
    Eigen::Matrix2d sigma;
    sigma << 1.0, R, R, 1.0;
    const auto [a, b] = inverse_row_sums(sigma);
    for (const auto& [u, lo, hi] : {std::tuple{6.0, 0.95, 1.05}, std::tuple{10.0, 0.99, 1.01}}) {
      const double ratio = bivariate_tail_exact(sigma, u).value * u * u * a * b;
      note(o, ratio >= lo && ratio <= hi, "R=" + fmt(R) + " u=" + fmt(u) + " ratio " + fmt(ratio));
    }
  }
  return o;
}

Outcome check_orthant_law() {
  Outcome o;
  double worst = 0.0;
  for (double rho : {-0.9, -0.4, 0.0, 0.3, 0.8}) {
    Eigen::MatrixXd c(2, 2);
    c << 1.0, rho, rho, 1.0;
    const double v = mvn_cdf(c, {0.0, 0.0}).value;
    worst = std::max(worst, std::abs(v - (0.25 + std::asin(rho) / (2.0 * std::numbers::pi))));
  }
  note(o, worst < 1e-7, "max abs error " + fmt(worst));
  return o;
}

Outcome check_h_anchor() {
  Outcome o;
  for (const char* name : {"diagonal", "interior-point"}) {
    const BivariateModel m = fixture(name);
    const CaseClassification c = classify(m);
    double worst = 0.0;
    for (const Point2& p : c.maximizers) worst = std::max(worst, std::abs(h_function(m, p.t, p.s) - 1.0 / (1.0 + c.R)));
    note(o, worst < 1e-9, std::string(name) + " " + std::to_string(c.maximizers.size()) + " maximizers, max error " +
                              fmt(worst));
  }
  return o;
}

Outcome check_end_to_end(const char* name) {
  Outcome o;
  const BivariateModel m = fixture(name);
  const AsymptoticTerm cf = closed_form(m);
  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  std::string ratios;
  double last = 0.0;
  for (double u : {3.0, 3.5, 4.0, 4.5}) {
    last = cf.value(u) / eec::eec(m, u).total.value;
    ratios += (ratios.empty() ? "" : " ") + fmt(last);
    monotone = monotone && std::abs(last - 1.0) <= prev;
    prev = std::abs(last - 1.0);
  }
  note(o, last >= 0.85 && last <= 1.15, "closed_form/eec at u=3,3.5,4,4.5: " + ratios);
  note(o, monotone, "|ratio-1| non-increasing");

  const double u = 2.5;
  const double e = eec::eec(m, u).total.value;
  const Estimate mc = estimate_eec(m, u, 512, 20000, 20240101);
  note(o, std::abs(e - mc.value) <= 3.0 * mc.error,
       "eec " + fmt(e) + " vs simulated " + fmt(mc.value) + " +- " + fmt(mc.error) + " at u=2.5");
  return o;
}

Outcome check_corner_probability() {
  Outcome o;
  const BivariateModel m = fixture("corner-nondegenerate");
  const double u = 4.5;
  double corners = 0.0;
  for (double t0 : {0.0, 1.0})
    for (double s0 : {0.0, 1.0}) corners += corner_corner_term(m, t0, s0, u).value;
  const double cf = closed_form(m).value(u);
  const double ratio = corners / cf;
  note(o, ratio >= 0.9 && ratio <= 1.1, "corner sum / closed form " + fmt(ratio));
  return o;
}

Outcome check_joint_excursion() {
  Outcome o;
  for (const char* name : {"diagonal", "interior-point"}) {
    const BivariateModel m = fixture(name);
    const double u = 3.0;
    const double e = eec::eec(m, u).total.value;
    const McEstimate is = estimate_joint_excursion(m, u, 512, 20000, 99, default_shift(m));
    const double band = std::max(3.0 * is.error, 0.1 * e);
    note(o, std::abs(is.value - e) <= band && !is.low_confidence,
         std::string(name) + " eec " + fmt(e) + " vs IS " + fmt(is.value) + " +- " + fmt(is.error));
  }
  return o;
}

Outcome check_symmetry_and_factorization() {
  Outcome o;
  double worst = 0.0;
  for (const char* name : {"diagonal", "interior-point", "edge-point", "corner-semidegenerate"}) {
    const BivariateModel m = fixture(name);
    const double a = eec::eec(m, 3.0).total.value, b = eec::eec(m.transpose(), 3.0).total.value;
    worst = std::max(worst, std::abs(a - b) / std::abs(a));
  }
  note(o, worst <= 1e-12, "transpose relative difference " + fmt(worst));

  const BivariateModel ind = fixture("independent");
  const Kernel se = Kernel::squared_exponential(1.0);
  double fact = 0.0;
  for (double u : {2.0, 3.0, 4.0}) {
    const double product = eec_marginal(se, u) * eec_marginal(se, u);
    fact = std::max(fact, std::abs(eec::eec(ind, u).total.value - product) / product);
  }
  note(o, fact <= 1e-6, "factorization relative error " + fmt(fact));

  int agree = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const McEstimate plain = estimate_joint_excursion(ind, 2.0, 256, 20000, seed);
    const McEstimate is = estimate_joint_excursion(ind, 2.0, 256, 20000, seed, std::vector<Point2>{{0.5, 0.5}});
    agree += std::abs(plain.value - is.value) <= 3.0 * std::hypot(plain.error, is.error);
  }
  note(o, agree == 10, "IS and plain agree within 3 SE for " + std::to_string(agree) + " of 10 seeds");
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "conditioning oracle", 5, check_conditioning_oracle},
      {2, "conditional covariance closed form", 5, check_sigma_closed_form},
      {3, "bivariate Mills ratio", 10, check_mills_ratio},
      {4, "bivariate orthant law", 1, check_orthant_law},
      {5, "h at the maximizers", 1, check_h_anchor},
      {6, "diagonal end-to-end", 300, [] { return check_end_to_end("diagonal"); }},
      {7, "unique interior maximizer end-to-end", 300, [] { return check_end_to_end("interior-point"); }},
      {8, "non-degenerate corner end-to-end", 60, check_corner_probability},
      {9, "joint excursion versus EEC", 600, check_joint_excursion},
      {10, "symmetry and factorization", 300, check_symmetry_and_factorization},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("criterion %2d: %s  %s (%.2f s, limit %.0f s%s) %s\n", c.id, pass ? "PASS" : "FAIL", c.title, secs,
                c.limit_seconds, in_time ? "" : ", exceeded", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
