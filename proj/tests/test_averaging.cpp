#include <gtest/gtest.h>

#include <cmath>

#include "oscar/analysis.hpp"
#include "oscar/averaging.hpp"
#include "test_support.hpp"

namespace oscar {
namespace {

constexpr double kPi = std::numbers::pi;

DimensionlessParams no_spin() {
  auto p = test::reference_set();
  p.lambda = 0.0;
  return p;
}

double linear_response(double rho, double q) {
  const double x = 0.125 / (q * q) + rho;
  return 1.0 / ((2.0 + rho) * std::sqrt(0.25 + q * q * x * x));
}

TEST(SlowFlow, StationaryPointWithoutSpin) {
  const auto p = no_spin();
  const auto pt = stationary_amplitude_at(p.bare_peak_detuning(), p);
  auto q = p;
  q.rho = pt.rho;
  // the 2x2 stationary system: both rates vanish at (a, theta) for some theta
  const double theta = std::atan2(-0.5 * pt.a * (2.0 + q.rho), -pt.a * (2.0 + q.rho) * (0.125 / 1e4 + q.rho) * 100.0);
  const auto r = slow_flow_driven({pt.a, theta, 0.0}, q);
  EXPECT_NEAR(r.da, 0.0, 1e-12);
  EXPECT_NEAR(r.dtheta, 0.0, 1e-12);
  EXPECT_EQ(pt.roots, 1);
}

TEST(SlowFlow, LinearClosedForm) {
  const auto p = no_spin();
  for (double rho : {-3e-4, -1e-4, -2.5e-5, 0.0, 5e-5, 2e-4, 1e-3}) {
    const auto pt = stationary_amplitude_at(rho, p);
    EXPECT_NEAR(pt.a, linear_response(rho, p.quality_factor), 1e-10) << "rho=" << rho;
  }
}

TEST(SlowFlow, LinearPeakLocation) {
  const auto p = no_spin();
  std::vector<double> grid;
  for (int i = 0; i <= 200; ++i) grid.push_back(-1e-4 + 1.5e-4 * i / 200.0);
  const auto resp = stationary_response(p, grid);
  EXPECT_NEAR(resp.curve.peak.rho, -0.25 / (p.quality_factor * p.quality_factor), 2e-8);
  EXPECT_NEAR(resp.curve.peak.amplitude, 1.0, 1e-4);
  EXPECT_FALSE(resp.curve.peak.outside_grid);
}

TEST(SlowFlow, SpinTermIsBounded) {
  const auto p = test::reference_set();
  for (double a : {1e-3, 0.01, 0.1, 1.0, 10.0, 1e3}) {
    const double term = std::abs(spin_phase_term(a, p, IntegralForm::exact, Branch::aligned));
    EXPECT_LE(term, 2.0 * p.lambda / (kPi * a) * (1.0 + 1e-15));
  }
  EXPECT_LT(std::abs(spin_phase_term(1e6, p, IntegralForm::exact, Branch::aligned)), 1e-10);
}

TEST(SlowFlow, SpinTermMatchesQuadrature) {
  const auto p = test::reference_set();
  for (double a : {0.05, 0.3, 1.0}) {
    const double ratio = p.epsilon / (a * p.chi);
    const double expected = p.lambda / (2.0 * kPi * a) * test::averaging_integral_quad(ratio);
    EXPECT_NEAR(spin_phase_term(a, p, IntegralForm::exact, Branch::aligned), expected, 1e-12 * expected);
    EXPECT_NEAR(spin_phase_term(a, p, IntegralForm::exact, Branch::inverted), -expected, 1e-12 * expected);
  }
}

TEST(SlowFlow, ReleaseState) {
  const auto p = test::reference_set();
  const auto s = slow_state_from_release(-1.0, p);
  EXPECT_EQ(s.a, 1.0);
  EXPECT_NEAR(std::cos(s.theta + p.theta0), -1.0, 1e-15);
}

TEST(PerturbativeShift, ReferenceValues) {
  const auto p = test::reference_set();
  const auto s = perturbative_shift(p);
  EXPECT_NEAR(s.spin_shift, -5.411e-5, 1e-8);
  EXPECT_NEAR(s.spin_shift, -2.0 * 8.5e-5 / kPi, 1e-18);
  EXPECT_DOUBLE_EQ(s.rho1, -2.5e-5 + s.spin_shift);
  EXPECT_DOUBLE_EQ(perturbative_shift(p, Branch::inverted).spin_shift, -s.spin_shift);
  EXPECT_EQ(perturbative_shift(no_spin()).rho1, perturbative_shift(no_spin()).rho0);
}

TEST(PerturbativeShift, AnalyticCurvePeaksNearPrediction) {
  const auto p = test::reference_set();
  std::vector<double> grid;
  for (int i = 0; i <= 400; ++i) grid.push_back(-3e-4 + 5e-4 * i / 400.0);
  const double unit = 2.0 * p.lambda / kPi;
  for (auto b : {Branch::aligned, Branch::inverted}) {
    const auto lead = stationary_response(p, grid, IntegralForm::leading_order, b);
    EXPECT_NEAR(lead.curve.peak.rho, perturbative_shift(p, b).rho1, 0.01 * unit);
    const auto exact = stationary_response(p, grid, IntegralForm::exact, b);
    EXPECT_NEAR(exact.curve.peak.rho, perturbative_shift(p, b).rho1, 0.15 * unit);
  }
}

TEST(PerturbativeShift, QuadraticExpansionAtPeak) {
  const auto p = test::reference_set();
  const double rho1 = perturbative_shift(p).rho1;
  const double beta_full = stationary_amplitude_at(rho1, p, IntegralForm::leading_order).a - 1.0;
  const double beta_quad = quadratic_amplitude(rho1, p) - 1.0;
  EXPECT_NEAR(beta_quad, beta_full, 0.05 * std::abs(beta_full));
}

TEST(Damped, NoSpinFrequencyIsConstant) {
  const auto p = no_spin();
  const double q = p.quality_factor;
  for (double t : {0.0, 50.0, 200.0, 400.0}) {
    EXPECT_DOUBLE_EQ(damped_frequency(t, 1.0, p), 1.0 - 0.125 / (q * q));
    EXPECT_NEAR(damped_frequency(t, 1.0, p), std::sqrt(1.0 - 0.25 / (q * q)), 1.0 / std::pow(q, 4));
  }
}

TEST(Damped, AlignedFrequencyDecreases) {
  const auto p = test::reference_set();
  double prev = damped_frequency(0.0, 1.0, p);
  for (int i = 1; i <= 40; ++i) {
    const double w = damped_frequency(10.0 * i, 1.0, p);
    EXPECT_LT(w, prev);
    prev = w;
  }
  EXPECT_GT(damped_frequency(100.0, 1.0, p, IntegralForm::exact, Branch::inverted), 1.0 - 0.125e-4);
}

TEST(Damped, TwoQuality) {
  const auto p = test::reference_set();
  const double t = 2.0 * p.quality_factor;
  EXPECT_NEAR(damped_amplitude(t, 1.0, p), std::exp(-1.0), 1e-15);
  const double a = std::exp(-1.0);
  const double expected =
      1.0 - 0.125e-4 - p.lambda / (2.0 * kPi * a) * test::averaging_integral_quad(p.epsilon / (a * p.chi));
  EXPECT_NEAR(damped_frequency(t, 1.0, p), expected, 1e-15);
  EXPECT_NEAR(damped_ratio(t, 1.0, p), 280.0 * std::exp(1.0) / 2500.0, 1e-15);
}

TEST(Damped, SmallPFormAgreesWhileValid) {
  const auto p = test::reference_set();
  for (double t = 0.0; t <= 400.0; t += 5.0) {
    if (damped_ratio(t, 1.0, p) > 0.05) break;
    const double exact = damped_frequency(t, 1.0, p, IntegralForm::exact);
    const double small = damped_frequency(t, 1.0, p, IntegralForm::small_p);
    EXPECT_NEAR(small / exact, 1.0, 1e-4);
  }
}

TEST(SlowFlow, TracksExactEnvelope) {
  auto p = test::reference_set();
  p.rho = perturbative_shift(p).rho1;
  const double tau_end = 10.0 * p.quality_factor;
  IntegratorSettings settings;
  settings.output_spacing = 2.0 * kPi / 64.0;
  const auto traj = integrate(initial_conditions(p, Branch::aligned), p, tau_end, settings);
  const double dt = 0.05;
  const auto slow = integrate_slow_flow(slow_state_from_release(-1.0, p), p, tau_end, dt);
  const auto env = half_cycle_envelope(traj.samples);
  ASSERT_GT(env.times.size(), 300u);
  double worst = 0.0;
  for (std::size_t i = 0; i < env.times.size(); ++i) {
    const auto k = std::min(slow.size() - 2, static_cast<std::size_t>(env.times[i] / dt));
    const double w = (env.times[i] - slow[k].tau) / dt;
    const double a = slow[k].a * (1.0 - w) + slow[k + 1].a * w;
    worst = std::max(worst, std::abs(env.amplitude[i] / a - 1.0));
  }
  EXPECT_LT(worst, 0.02);
}

TEST(SlowFlow, RejectsBadInput) {
  const auto p = test::reference_set();
  EXPECT_THROW(slow_flow_driven({0.0, 0.0, 0.0}, p), std::domain_error);
  EXPECT_THROW(slow_flow_damped({-1.0, 0.0, 0.0}, p), std::domain_error);
  EXPECT_THROW(stationary_response(p, {1e-4, 0.0}), std::invalid_argument);
  EXPECT_THROW(integrate_slow_flow({}, p, 0.0, 0.1), std::invalid_argument);
}

}  // namespace
}  // namespace oscar
