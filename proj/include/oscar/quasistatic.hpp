#pragma once

// Adiabatic (quasi-static) spin manifold and the cantilever-only equation
// obtained by slaving the moment to it.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "oscar/dynamics.hpp"
#include "oscar/params.hpp"

namespace oscar {

/// Moment along (aligned) or against (inverted) the instantaneous effective
/// field (epsilon, 0, delta - chi Z). Always a unit vector with My = 0.
inline Vec3 quasistatic_moment(double Z, const DimensionlessParams& p, Branch branch) {
  if (!(p.epsilon > 0.0)) throw std::invalid_argument("quasistatic_moment: epsilon must be positive");
  const double bz = p.delta - p.chi * Z;
  const double s = branch_sign(branch) / std::hypot(p.epsilon, bz);
  return {s * p.epsilon, 0.0, s * bz};
}

namespace detail {
inline void require_zero_offset(const DimensionlessParams& p) {
  if (p.delta != 0.0) throw std::invalid_argument("reduced cantilever equation assumes delta = 0");
}
}  // namespace detail

/// Spin force on the cantilever once the moment is slaved to the field,
/// lambda chi Z / sqrt(eps^2 + (chi Z)^2) on the aligned branch. The
/// alpha Z correction to the dipole gradient is dropped.
inline double reduced_magnetic_force(double Z, const DimensionlessParams& p, Branch branch = Branch::aligned) {
  detail::require_zero_offset(p);
  const double cz = p.chi * Z;
  return branch_sign(branch) * p.lambda * cz / std::hypot(p.epsilon, cz);
}

/// Potential-energy correction dU(Z) = -(lambda / chi) sqrt(eps^2 + (chi Z)^2),
/// so that the reduced magnetic force is -d(dU)/dZ and
/// (V^2 + Z^2)/2 + dU(Z) is conserved without drive and damping.
inline double potential_correction(double Z, const DimensionlessParams& p, Branch branch = Branch::aligned) {
  detail::require_zero_offset(p);
  if (!(p.chi > 0.0)) throw std::invalid_argument("potential_correction: chi must be positive");
  return -branch_sign(branch) * p.lambda / p.chi * std::hypot(p.epsilon, p.chi * Z);
}

inline double reduced_acceleration(double Z, double V, double tau, const DimensionlessParams& p,
                                   Branch branch = Branch::aligned) {
  return -Z + reduced_magnetic_force(Z, p, branch) - p.inverse_q() * V + drive_term(tau, p);
}

/// Integrates the reduced equation with RK4 at the same output spacing
/// conventions as the exact integrator. The moment column holds the
/// quasi-static moment for the sampled Z.
inline Trajectory integrate_reduced(double z0, double v0, const DimensionlessParams& p, double tau_end,
                                    Branch branch = Branch::aligned, const IntegratorSettings& settings = {}) {
  p.validate();
  detail::require_zero_offset(p);
  if (!(tau_end > 0.0)) throw std::invalid_argument("integrate_reduced: tau_end must be positive");
  const double hmax = settings.max_step.value_or(2.0 * std::numbers::pi / 400.0);
  auto sub = static_cast<std::size_t>(std::ceil(settings.output_spacing / hmax - 1e-9));
  if (sub == 0) sub = 1;
  const double h = settings.output_spacing / static_cast<double>(sub);
  const auto n = static_cast<std::size_t>(std::floor(tau_end / settings.output_spacing + 1e-9));

  auto rhs = [&](double t, const std::array<double, 2>& y) {
    return std::array<double, 2>{y[1], reduced_acceleration(y[0], y[1], t, p, branch)};
  };
  Trajectory traj;
  traj.params = p;
  traj.metadata = {h, sub, settings.output_spacing, 0.0};
  traj.samples.reserve(n + 1);
  std::array<double, 2> y{z0, v0};
  traj.samples.push_back({0.0, z0, v0, quasistatic_moment(z0, p, branch)});
  for (std::size_t i = 1; i <= n; ++i) {
    const double base = static_cast<double>(i - 1) * settings.output_spacing;
    for (std::size_t j = 0; j < sub; ++j) y = rk4_step<2>(y, base + static_cast<double>(j) * h, h, rhs);
    const double tau = static_cast<double>(i) * settings.output_spacing;
    traj.samples.push_back({tau, y[0], y[1], quasistatic_moment(y[0], p, branch)});
  }
  return traj;
}

struct SemiquantitativeShift {
  double shift = 0.0;        // rho1 - rho0 with Z^2 replaced by its mean 1/2
  double strong_limit = 0.0; // chi >> epsilon limit, -lambda / sqrt(2)
  double rho0 = 0.0;         // bare peak, -1/(4 Q^2)
};

/// Peak shift from the effective linear stiffness 1 - lambda chi / sqrt(eps^2 + chi^2/2).
inline SemiquantitativeShift semiquantitative_shift(const DimensionlessParams& p) {
  if (!(p.lambda < 1.0)) throw std::invalid_argument("semiquantitative_shift: lambda must be < 1");
  SemiquantitativeShift out;
  out.shift = -p.lambda * p.chi / (2.0 * std::sqrt(p.epsilon * p.epsilon + 0.5 * p.chi * p.chi));
  out.strong_limit = -p.lambda / std::numbers::sqrt2;
  out.rho0 = p.bare_peak_detuning();
  return out;
}

}  // namespace oscar
