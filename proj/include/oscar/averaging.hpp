#pragma once

// First-order averaged equations for the cantilever amplitude and phase,
// their stationary solutions, and the free ring-down.
//
// Driven:  Z ~ a cos[(1 + rho) tau + theta0 + theta]  (theta is the lag behind the drive)
// Damped:  Z ~ a cos[tau + theta]

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "oscar/curve.hpp"
#include "oscar/dynamics.hpp"
#include "oscar/elliptic.hpp"
#include "oscar/params.hpp"

namespace oscar {

/// How the cycle average of the spin force is evaluated.
enum class IntegralForm {
  exact,          // elliptic-integral closed form
  small_p,        // leading small-p expansion, p < 1 only
  leading_order,  // p^2 terms dropped: I = 4
};

inline const char* to_string(IntegralForm f) {
  switch (f) {
    case IntegralForm::exact: return "exact";
    case IntegralForm::small_p: return "small-p";
    case IntegralForm::leading_order: return "leading-order";
  }
  return "unknown";
}

struct SlowState {
  double a = 1.0;
  double theta = 0.0;
  double tau = 0.0;
};

struct SlowRates {
  double da = 0.0;
  double dtheta = 0.0;
};

inline double cycle_integral(double p, IntegralForm form) {
  switch (form) {
    case IntegralForm::exact: return averaging_integral(p);
    case IntegralForm::small_p: return averaging_integral_smallp(p);
    case IntegralForm::leading_order: return 4.0;
  }
  return averaging_integral(p);
}

/// Spin contribution (lambda / 2 pi a) I(eps / (a chi)) to the phase drift,
/// taken with the sign of the branch (aligned lowers the frequency).
inline double spin_phase_term(double a, const DimensionlessParams& p, IntegralForm form, Branch branch) {
  if (!(a > 0.0)) throw std::domain_error("slow flow: amplitude must be positive");
  if (p.lambda == 0.0) return 0.0;
  const double ratio = p.chi > 0.0 ? p.epsilon / (a * p.chi) : std::numeric_limits<double>::infinity();
  return branch_sign(branch) * p.lambda / (2.0 * std::numbers::pi * a) * cycle_integral(ratio, form);
}

inline SlowRates slow_flow_driven(const SlowState& s, const DimensionlessParams& p,
                                  IntegralForm form = IntegralForm::exact, Branch branch = Branch::aligned) {
  if (!(s.a > 0.0)) throw std::domain_error("slow_flow_driven: amplitude must be positive");
  const double iq = p.inverse_q();
  const double two_rho = 2.0 + p.rho;
  SlowRates r;
  r.da = -0.5 * s.a * iq - iq * std::sin(s.theta) / two_rho;
  r.dtheta = -0.125 * iq * iq - p.rho - spin_phase_term(s.a, p, form, branch) -
             iq * std::cos(s.theta) / (s.a * two_rho);
  return r;
}

inline SlowRates slow_flow_damped(const SlowState& s, const DimensionlessParams& p,
                                  IntegralForm form = IntegralForm::exact, Branch branch = Branch::aligned) {
  if (!(s.a > 0.0)) throw std::domain_error("slow_flow_damped: amplitude must be positive");
  const double iq = p.inverse_q();
  return {-0.5 * s.a * iq, -0.125 * iq * iq - spin_phase_term(s.a, p, form, branch)};
}

/// Slow state matching a cantilever released from rest at Z = z0 (< 0) when
/// the drive is on: a = |z0| and a phase of pi relative to the drive phase.
inline SlowState slow_state_from_release(double z0, const DimensionlessParams& p) {
  if (!(z0 != 0.0)) throw std::invalid_argument("slow_state_from_release: z0 must be nonzero");
  const double absolute = z0 < 0.0 ? std::numbers::pi : 0.0;
  return {std::abs(z0), std::remainder(absolute - p.theta0, 2.0 * std::numbers::pi), 0.0};
}

/// RK4 integration of the driven slow flow; samples every `spacing`.
inline std::vector<SlowState> integrate_slow_flow(SlowState start, const DimensionlessParams& p, double tau_end,
                                                  double spacing, IntegralForm form = IntegralForm::exact,
                                                  Branch branch = Branch::aligned, double max_step = 0.1) {
  if (!(tau_end > start.tau) || !(spacing > 0.0) || !(max_step > 0.0))
    throw std::invalid_argument("integrate_slow_flow: bad time grid");
  auto sub = static_cast<std::size_t>(std::ceil(spacing / max_step - 1e-9));
  if (sub == 0) sub = 1;
  const double h = spacing / static_cast<double>(sub);
  auto rhs = [&](double t, const std::array<double, 2>& y) {
    const auto r = slow_flow_driven({y[0], y[1], t}, p, form, branch);
    return std::array<double, 2>{r.da, r.dtheta};
  };
  const auto n = static_cast<std::size_t>(std::floor((tau_end - start.tau) / spacing + 1e-9));
  std::vector<SlowState> out;
  out.reserve(n + 1);
  out.push_back(start);
  std::array<double, 2> y{start.a, start.theta};
  for (std::size_t i = 1; i <= n; ++i) {
    const double base = start.tau + static_cast<double>(i - 1) * spacing;
    for (std::size_t j = 0; j < sub; ++j) y = rk4_step<2>(y, base + static_cast<double>(j) * h, h, rhs);
    out.push_back({y[0], y[1], start.tau + static_cast<double>(i) * spacing});
  }
  return out;
}

struct StationaryPoint {
  double rho = 0.0;
  double a = std::numeric_limits<double>::quiet_NaN();  // nearest root to 1
  int roots = 0;                                         // number of roots found in [0.01, 2]
};

namespace detail {

// a^2 (2 + rho)^2 [1/4 + Q^2 (1/8Q^2 + rho + s(a))^2] - 1
inline double stationary_residual(double a, double rho, const DimensionlessParams& p, IntegralForm form,
                                   Branch branch) {
  const double q = p.quality_factor;
  const double iq = p.inverse_q();
  const double detune = 0.125 * iq * iq + rho + spin_phase_term(a, p, form, branch);
  const double lhs = a * (2.0 + rho);
  return lhs * lhs * (0.25 + q * q * detune * detune) - 1.0;
}

}  // namespace detail

/// Stationary amplitude of the driven slow flow at one detuning, by a scan of
/// [0.01, 2] for sign changes followed by bracketed root refinement.
inline StationaryPoint stationary_amplitude_at(double rho, const DimensionlessParams& p,
                                               IntegralForm form = IntegralForm::exact,
                                               Branch branch = Branch::aligned) {
  constexpr double lo = 0.01, hi = 2.0;
  constexpr int scan = 800;
  auto f = [&](double a) { return detail::stationary_residual(a, rho, p, form, branch); };
  StationaryPoint pt;
  pt.rho = rho;
  double best_distance = std::numeric_limits<double>::infinity();
  double x0 = lo, f0 = f(lo);
  for (int i = 1; i <= scan; ++i) {
    const double x1 = lo + (hi - lo) * i / scan;
    const double f1 = f(x1);
    if (f0 == 0.0 || f0 * f1 < 0.0) {
      double root = x0;
      if (f0 != 0.0) {
        std::uintmax_t iters = 200;
        const auto br = boost::math::tools::toms748_solve(f, x0, x1, f0, f1,
                                                          boost::math::tools::eps_tolerance<double>(50), iters);
        root = 0.5 * (br.first + br.second);
      }
      ++pt.roots;
      if (std::abs(root - 1.0) < best_distance) {
        best_distance = std::abs(root - 1.0);
        pt.a = root;
      }
    }
    x0 = x1;
    f0 = f1;
  }
  return pt;
}

/// Quadratic approximation around a = 1 of the stationary condition:
/// beta = -rho/2 - 2 Q^2 (1/8Q^2 + rho + 2 lambda / pi)^2, a = 1 + beta.
inline double quadratic_amplitude(double rho, const DimensionlessParams& p, Branch branch = Branch::aligned) {
  const double q = p.quality_factor;
  const double iq = p.inverse_q();
  const double x = 0.125 * iq * iq + rho + branch_sign(branch) * 2.0 * p.lambda / std::numbers::pi;
  return 1.0 - 0.5 * rho - 2.0 * q * q * x * x;
}

struct AnalyticResponse {
  ResonanceCurve curve;      // full stationary condition
  ResonanceCurve quadratic;  // expansion around a = 1
  double beta_max = 0.0;     // max |a - 1| over the grid; small when the expansion is trustworthy
};

inline AnalyticResponse stationary_response(const DimensionlessParams& p, const std::vector<double>& rho_grid,
                                            IntegralForm form = IntegralForm::exact,
                                            Branch branch = Branch::aligned) {
  p.validate();
  if (!std::is_sorted(rho_grid.begin(), rho_grid.end()) ||
      std::adjacent_find(rho_grid.begin(), rho_grid.end()) != rho_grid.end())
    throw std::invalid_argument("stationary_response: rho grid must be strictly increasing");
  AnalyticResponse out;
  out.curve.source = CurveSource::analytic;
  out.quadratic.source = CurveSource::quadratic;
  for (double rho : rho_grid) {
    const auto pt = stationary_amplitude_at(rho, p, form, branch);
    out.curve.rho.push_back(rho);
    out.curve.amplitude.push_back(pt.a);
    out.curve.spread.push_back(std::numeric_limits<double>::quiet_NaN());
    out.curve.flags.push_back(pt.roots == 0 ? "no-root" : (pt.roots > 1 ? "multiple-roots" : ""));
    if (pt.roots > 0) out.beta_max = std::max(out.beta_max, std::abs(pt.a - 1.0));

    out.quadratic.rho.push_back(rho);
    out.quadratic.amplitude.push_back(quadratic_amplitude(rho, p, branch));
    out.quadratic.spread.push_back(std::numeric_limits<double>::quiet_NaN());
    out.quadratic.flags.emplace_back();
  }
  out.curve.peak = locate_peak(out.curve);
  out.quadratic.peak = locate_peak(out.quadratic);
  return out;
}

struct PerturbativeShift {
  double rho1 = 0.0;        // predicted peak detuning
  double rho0 = 0.0;        // bare peak, -1/(4 Q^2)
  double spin_shift = 0.0;  // -2 lambda / pi on the aligned branch
};

inline PerturbativeShift perturbative_shift(const DimensionlessParams& p, Branch branch = Branch::aligned) {
  PerturbativeShift s;
  s.rho0 = p.bare_peak_detuning();
  s.spin_shift = -branch_sign(branch) * 2.0 * p.lambda / std::numbers::pi;
  s.rho1 = s.rho0 + s.spin_shift;
  return s;
}

/// Ring-down amplitude a0 exp(-tau / 2Q).
inline double damped_amplitude(double tau, double a0, const DimensionlessParams& p) {
  return a0 * std::exp(-0.5 * tau * p.inverse_q());
}

/// Instantaneous frequency 1 + dtheta/dtau of the free ring-down at time tau.
inline double damped_frequency(double tau, double a0, const DimensionlessParams& p,
                               IntegralForm form = IntegralForm::exact, Branch branch = Branch::aligned) {
  const double a = damped_amplitude(tau, a0, p);
  return 1.0 + slow_flow_damped({a, 0.0, tau}, p, form, branch).dtheta;
}

/// p = eps / (a chi) along the ring-down.
inline double damped_ratio(double tau, double a0, const DimensionlessParams& p) {
  return p.epsilon / (damped_amplitude(tau, a0, p) * p.chi);
}

}  // namespace oscar
