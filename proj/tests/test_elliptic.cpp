#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oscar/elliptic.hpp"
#include "test_support.hpp"

namespace oscar {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(CompleteElliptic, ZeroModulus) {
  const auto e = complete_elliptic(0.0);
  EXPECT_DOUBLE_EQ(e.K, kPi / 2);
  EXPECT_DOUBLE_EQ(e.E, kPi / 2);
}

TEST(CompleteElliptic, QuadratureOracle) {
  for (double k : {0.1, 0.5, 0.9, 0.99}) {
    const auto e = complete_elliptic(k);
    EXPECT_NEAR(e.K, test::elliptic_k_quad(k), 1e-13 * e.K) << "k=" << k;
    EXPECT_NEAR(e.E, test::elliptic_e_quad(k), 1e-13 * e.E) << "k=" << k;
  }
}

TEST(CompleteElliptic, NearUnitModulus) {
  const double k = std::sqrt(1.0 - 1e-12);
  const double kp = std::sqrt((1.0 - k) * (1.0 + k));  // exact complement of the stored k
  const auto e = complete_elliptic(k);
  EXPECT_NEAR(e.E, 1.0, 1e-10);
  EXPECT_NEAR(e.K, std::log(4.0 / kp), 1e-9);
}

TEST(CompleteElliptic, LegendreRelation) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
  for (int i = 0; i < 1000; ++i) {
    const double k = u(rng);
    const double kp = std::sqrt((1.0 - k) * (1.0 + k));
    const auto a = complete_elliptic(k);
    const auto b = complete_elliptic(kp);
    EXPECT_NEAR(a.E * b.K + b.E * a.K - a.K * b.K, kPi / 2, 1e-12) << "k=" << k;
  }
}

TEST(CompleteElliptic, DomainChecks) {
  EXPECT_THROW(complete_elliptic(1.0), std::domain_error);
  EXPECT_THROW(complete_elliptic(-0.1), std::domain_error);
  EXPECT_THROW(complete_elliptic(std::nan("")), std::domain_error);
}

TEST(AveragingIntegral, LogGridAgainstQuadrature) {
  for (int i = 0; i < 30; ++i) {
    const double p = std::pow(10.0, -3.0 + 5.0 * i / 29.0);
    const double ref = test::averaging_integral_quad(p);
    EXPECT_NEAR(averaging_integral(p), ref, 1e-10 * ref) << "p=" << p;
  }
}

TEST(AveragingIntegral, Limits) {
  EXPECT_EQ(averaging_integral(0.0), 4.0);
  EXPECT_NEAR(averaging_integral(1e-12), 4.0, 1e-13);
  EXPECT_NEAR(averaging_integral(1e6) * 1e6, kPi, 1e-6);
  EXPECT_EQ(averaging_integral(std::numeric_limits<double>::infinity()), 0.0);
  EXPECT_THROW(averaging_integral(-1.0), std::domain_error);
}

TEST(AveragingIntegral, DecreasingAndBounded) {
  double prev = 4.0;
  for (int i = 0; i <= 400; ++i) {
    const double p = std::pow(10.0, -4.0 + 8.0 * i / 400.0);
    const double v = averaging_integral(p);
    EXPECT_LT(v, prev);
    EXPECT_GT(v, 0.0);
    prev = v;
  }
}

TEST(AveragingIntegral, OddComponentVanishes) {
  for (double p : {0.01, 0.3, 3.0}) {
    auto f = [p](double t) { return std::sin(t) * std::cos(t) / std::sqrt(p * p + std::cos(t) * std::cos(t)); };
    EXPECT_NEAR(test::quad(f, 0.0, 2.0 * kPi), 0.0, 1e-12);
  }
}

TEST(SmallPForm, AccuracyBands) {
  const auto rel = [](double p) { return std::abs(averaging_integral_smallp(p) / averaging_integral(p) - 1.0); };
  EXPECT_LE(rel(0.01), 1e-5);
  EXPECT_LE(rel(0.1), 1e-3);
  const double at_03 = rel(0.3);
  EXPECT_GT(at_03, 1e-3);
  EXPECT_LT(at_03, 2e-2);
  EXPECT_EQ(averaging_integral_smallp(0.0), 4.0);
  EXPECT_THROW(averaging_integral_smallp(1.0), std::domain_error);
  EXPECT_THROW(averaging_integral_smallp(-0.1), std::domain_error);
}

}  // namespace
}  // namespace oscar
