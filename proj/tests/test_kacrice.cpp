#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "eec/kacrice.hpp"
#include "eec/normal.hpp"

using namespace eec;

namespace {

const Kernel kSe = Kernel::squared_exponential(1.0);

struct McMean {
  double mean;
  double se;
};

// Plain Monte Carlo of E{f(Z)} for Z ~ N(0, cov).
template <class F>
McMean mc_mean(const Eigen::MatrixXd& cov, int n, std::uint64_t seed, F&& f) {
  const Eigen::MatrixXd l = cov.llt().matrixL();
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z;
  double s = 0.0, s2 = 0.0;
  Eigen::VectorXd w(cov.rows());
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = z(eng);
    const double v = f(Eigen::VectorXd(l * w));
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return {m, std::sqrt((s2 / n - m * m) / n)};
}

double independent_edge(double u) {
  return -norm_pdf(u) * std::sqrt(1.0 / (2.0 * std::numbers::pi));
}

}  // namespace

TEST(CornerTerm, IndependentIsQuarterOfSquaredTail) {
  const BivariateModel m = fixture("independent");
  for (double u : {0.5, 2.0, 3.0})
    for (double t0 : {0.0, 1.0})
      for (double s0 : {0.0, 1.0})
        EXPECT_NEAR(corner_corner_term(m, t0, s0, u).value, 0.25 * norm_sf(u) * norm_sf(u), 1e-9) << u;
  EXPECT_NEAR(corner_corner_term(m, 0.0, 1.0, 1.0, false, true).value, 0.5 * norm_sf(1.0) * norm_sf(1.0), 1e-9);
  EXPECT_THROW(corner_corner_term(m, 0.5, 0.0, 1.0), ArgumentError);
}

TEST(CornerTerm, AgreesWithMonteCarlo) {
  const BivariateModel m = fixture("corner-nondegenerate");
  const double u = 0.5;
  const Eigen::MatrixXd cov =
      joint_cov(m, {{Process::X, 1.0, 0}, {Process::Y, 0.0, 0}, {Process::X, 1.0, 1}, {Process::Y, 0.0, 1}});
  // outward derivative signs: +X'(1), -Y'(0)
  const McMean mc = mc_mean(cov, 400000, 5, [&](const Eigen::VectorXd& z) {
    return z(0) >= u && z(1) >= u && z(2) >= 0 && -z(3) >= 0 ? 1.0 : 0.0;
  });
  EXPECT_NEAR(corner_corner_term(m, 1.0, 0.0, u).value, mc.mean, 4.0 * mc.se);
}

TEST(EdgeIntegrand, IndependentClosedForm) {
  const BivariateModel m = fixture("independent");
  for (double u : {1.0, 3.0}) {
    const double expected = independent_edge(u) * 0.5 * norm_sf(u);
    EXPECT_NEAR(edge_point_integrand(m, 0.4, 0.0, u), expected, 1e-10 * std::abs(expected) + 1e-15);
    EXPECT_NEAR(edge_point_integrand(m, 0.4, 1.0, u, false), 2.0 * expected, 1e-10 * std::abs(expected) + 1e-15);
  }
}

TEST(EdgeIntegrand, AgreesWithMonteCarlo) {
  const BivariateModel m = fixture("diagonal");
  const double u = 0.5, t = 0.35, s0 = 1.0;
  Eigen::MatrixXd cov = joint_cov(m, {{Process::X, t, 0},
                                      {Process::Y, s0, 0},
                                      {Process::Y, s0, 1},
                                      {Process::X, t, 2},
                                      {Process::X, t, 1}});
  const ConditionalLaw law = condition(cov, {4});
  const McMean mc = mc_mean(law.residual_cov, 400000, 6, [&](const Eigen::VectorXd& z) {
    return z(0) >= u && z(1) >= u && z(2) >= 0 ? z(3) : 0.0;
  });
  const double density = 1.0 / std::sqrt(2.0 * std::numbers::pi * cov(4, 4));
  EXPECT_NEAR(edge_point_integrand(m, t, s0, u), density * mc.mean, 4.0 * density * mc.se);
}

TEST(InteriorIntegrand, IndependentFactorizes) {
  const BivariateModel m = fixture("independent");
  for (double u : {1.0, 2.5}) {
    const double e = independent_edge(u);
    EXPECT_NEAR(interior_interior_integrand(m, 0.2, 0.7, u), e * e, 1e-10 * e * e);
  }
}

TEST(InteriorIntegrand, AgreesWithMonteCarlo) {
  const BivariateModel m = fixture("diagonal");
  const double u = 0.5, t = 0.3, s = 0.6;
  const Eigen::MatrixXd cov = joint_cov(m, {{Process::X, t, 0},
                                            {Process::Y, s, 0},
                                            {Process::X, t, 2},
                                            {Process::Y, s, 2},
                                            {Process::X, t, 1},
                                            {Process::Y, s, 1}});
  const ConditionalLaw law = condition(cov, {4, 5});
  const McMean mc = mc_mean(law.residual_cov, 400000, 7, [&](const Eigen::VectorXd& z) {
    return z(0) >= u && z(1) >= u ? z(2) * z(3) : 0.0;
  });
  const double density =
      1.0 / (2.0 * std::numbers::pi * std::sqrt(cov(4, 4) * cov(5, 5) - cov(4, 5) * cov(4, 5)));
  EXPECT_NEAR(interior_interior_integrand(m, t, s, u), density * mc.mean, 4.0 * density * mc.se);
}

TEST(Integrands, MomentCrossCheckAgrees) {
  Tolerances tol;
  tol.cross_check_moments = true;
  for (const auto& name : {"diagonal", "edge-point", "interior-point"}) {
    const BivariateModel m = fixture(name);
    for (double u : {1.0, 3.0}) {
      EXPECT_NO_THROW(edge_point_integrand(m, 0.3, 0.0, u, true, tol)) << name;
      EXPECT_NO_THROW(interior_interior_integrand(m, 0.3, 0.8, u, tol)) << name;
    }
  }
}

TEST(Eec, IndependenceFactorizes) {
  const BivariateModel m = fixture("independent");
  for (double u : {2.0, 3.0}) {
    const double expected = eec_marginal(kSe, u) * eec_marginal(kSe, u);
    const EecResult r = eec::eec(m, u);
    EXPECT_NEAR(r.total.value, expected, 1e-6 * expected) << u;
  }
}

TEST(Eec, LowLevelGivesEulerCharacteristicOfTheSquare) {
  EXPECT_NEAR(eec::eec(fixture("independent"), -8.0).total.value, 1.0, 1e-6);
  EXPECT_NEAR(eec::eec(fixture("diagonal"), -8.0).total.value, 1.0, 1e-6);
}

TEST(Eec, TransposeIsBitIdentical) {
  for (const char* name : {"edge-point", "corner-semidegenerate", "diagonal"}) {
    const BivariateModel m = fixture(name);
    const EecResult a = eec::eec(m, 3.0), b = eec::eec(m.transpose(), 3.0);
    EXPECT_EQ(a.total.value, b.total.value) << name;
    for (std::size_t i = 0; i < 9; ++i) {
      EXPECT_EQ(a.terms[i].face_x, b.terms[(i % 3) * 3 + i / 3].face_y);
      EXPECT_EQ(a.terms[i].value.value, b.terms[(i % 3) * 3 + i / 3].value.value);
    }

    EecOptions direct;
    direct.canonical_orientation = false;
    const double d = eec::eec(m.transpose(), 3.0, direct).total.value;
    EXPECT_NEAR(d, a.total.value, 1e-5 * a.total.value) << name;
  }
}

TEST(Eec, SignStructure) {
  const EecResult r = eec::eec(fixture("interior-point"), 3.0);
  ASSERT_EQ(r.terms.size(), 9u);
  for (const auto& t : r.terms) {
    const int k = t.face_x == Face::Interior, l = t.face_y == Face::Interior;
    EXPECT_EQ(t.sign, (k + l) % 2 == 0 ? 1 : -1);
    if (k == 0 && l == 0) EXPECT_GE(t.value.value, 0.0);
    if (k + l == 1) EXPECT_LE(t.value.value, 0.0);
  }
  EXPECT_GT(r.terms[8].value.value, 0.0);
  EXPECT_GT(r.total.value, 0.0);
  EXPECT_FALSE(r.total.low_confidence);
}

TEST(Eec, MixedTermAgreesWithCompositeSimpson) {
  const BivariateModel m = fixture("diagonal");
  const double u = 3.0;
  const FacePairTerm term = face_pair_integral(m, Face::Interior, Face::Left, u);
  const int n = 2000;
  double simpson = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    simpson += w * edge_point_integrand(m, static_cast<double>(i) / n, 0.0, u);
  }
  simpson /= 3.0 * n;
  EXPECT_EQ(term.sign, -1);
  EXPECT_NEAR(term.value.value, simpson, 1e-6 * std::abs(simpson));
}

TEST(Eec, RestrictedTheoremApproachesFull) {
  const BivariateModel m = fixture("corner-nondegenerate");
  EecOptions restricted;
  restricted.theorem = Theorem::Restricted;
  double previous = 0.0;
  for (double u : {4.5, 6.0, 8.0}) {
    const EecResult r = eec::eec(m, u, restricted);
    const double ratio = r.total.value / eec::eec(m, u).total.value;
    EXPECT_GT(ratio, previous) << u;
    EXPECT_LT(ratio, 1.0) << u;
    previous = ratio;
    int included = 0;
    for (const auto& t : r.terms) included += t.included;
    EXPECT_EQ(included, 1);
  }
  EXPECT_GT(previous, 0.97);
}

TEST(Eec, RestrictedFaceSelection) {
  const FaceSelection b = restricted_faces(classify(fixture("interior-point")));
  EXPECT_EQ(b.x_faces, (std::array<bool, 3>{false, false, true}));
  EXPECT_EQ(b.y_faces, (std::array<bool, 3>{false, false, true}));
  const FaceSelection e = restricted_faces(classify(fixture("edge-point")));
  EXPECT_EQ(e.x_faces, (std::array<bool, 3>{false, false, true}));
  EXPECT_EQ(e.y_faces, (std::array<bool, 3>{true, false, false}));
  EXPECT_FALSE(e.constrain_y);
  const FaceSelection d = restricted_faces(classify(fixture("diagonal")));
  EXPECT_EQ(d.x_faces, (std::array<bool, 3>{true, true, true}));
}

TEST(Eec, RejectsNonFiniteLevel) {
  EXPECT_THROW(eec::eec(fixture("diagonal"), std::nan("")), ArgumentError);
}
