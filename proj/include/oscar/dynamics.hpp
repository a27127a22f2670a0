#pragma once

// Exact coupled cantilever-spin equations of motion in dimensionless form
// and a norm-preserving split-step integrator for them.
//
//   Z'' + Z + lambda Mz / (1 + alpha Z)^4 + Z'/Q = (1/Q) cos[(1 + rho) tau + theta0]
//   M'  = M x b,   b = (epsilon, 0, delta - chi Z)

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oscar/params.hpp"

namespace oscar {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

/// Which side of the effective field the moment sits on.
enum class Branch { aligned, inverted };

inline double branch_sign(Branch b) { return b == Branch::aligned ? 1.0 : -1.0; }
inline const char* to_string(Branch b) { return b == Branch::aligned ? "aligned" : "inverted"; }

struct SystemState {
  double tau = 0.0;
  double Z = 0.0;
  double V = 0.0;
  Vec3 M{1.0, 0.0, 0.0};

  friend bool operator==(const SystemState&, const SystemState&) = default;
};

struct StateDerivative {
  double dZ = 0.0;
  double dV = 0.0;
  Vec3 dM{};
};

/// Thrown when the tip reaches the sample (1 + alpha Z <= 0).
class ProximityError : public std::runtime_error {
 public:
  ProximityError(double tau, double Z)
      : std::runtime_error("tip reached the sample (1 + alpha Z <= 0) at tau=" + std::to_string(tau) +
                           ", Z=" + std::to_string(Z)),
        tau_(tau), Z_(Z) {}
  double tau() const { return tau_; }
  double Z() const { return Z_; }

 private:
  double tau_, Z_;
};

class StepUnderflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Effective field (epsilon, 0, delta - chi Z) in the rotating frame.
inline Vec3 effective_field(double Z, const DimensionlessParams& p) {
  return {p.epsilon, 0.0, p.delta - p.chi * Z};
}

/// Standard start: cantilever at Z = z0 at rest, moment along (aligned)
/// or against (inverted) the effective field there.
inline SystemState initial_conditions(const DimensionlessParams& p, Branch branch, double z0 = -1.0) {
  if (!(p.epsilon > 0.0) || !(p.chi >= 0.0))
    throw std::invalid_argument("initial_conditions: epsilon must be positive and chi non-negative");
  const Vec3 b = effective_field(z0, p);
  const double s = branch_sign(branch) / norm(b);
  return {0.0, z0, 0.0, s * b};
}

inline double drive_term(double tau, const DimensionlessParams& p) {
  if (!p.drive_on) return 0.0;
  return p.inverse_q() * std::cos((1.0 + p.rho) * tau + p.theta0);
}

/// Cantilever acceleration at (tau, Z, V) for a given Mz.
inline double cantilever_acceleration(double tau, double Z, double V, double Mz,
                                      const DimensionlessParams& p) {
  const double gap = 1.0 + p.alpha * Z;
  if (!(gap > 0.0)) throw ProximityError(tau, Z);
  const double g2 = gap * gap;
  return -Z - p.lambda * Mz / (g2 * g2) - p.inverse_q() * V + drive_term(tau, p);
}

inline StateDerivative derivative(const SystemState& s, const DimensionlessParams& p) {
  StateDerivative d;
  d.dZ = s.V;
  d.dV = cantilever_acceleration(s.tau, s.Z, s.V, s.M.z, p);
  d.dM = cross(s.M, effective_field(s.Z, p));
  return d;
}

/// One classical RK4 step for a fixed-size system y' = f(t, y).
template <std::size_t N, class Rhs>
std::array<double, N> rk4_step(const std::array<double, N>& y, double t, double h, Rhs&& f) {
  auto axpy = [](const std::array<double, N>& base, double s, const std::array<double, N>& k) {
    std::array<double, N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = base[i] + s * k[i];
    return out;
  };
  const auto k1 = f(t, y);
  const auto k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
  const auto k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
  const auto k4 = f(t + h, axpy(y, h, k3));
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

/// Rotates m about axis b by the angle that the precession m' = m x b
/// accumulates over time h (Rodrigues formula).
inline Vec3 precess(Vec3 m, Vec3 b, double h) {
  const double bn = norm(b);
  if (bn == 0.0) return m;
  const Vec3 n = (1.0 / bn) * b;
  const double angle = -bn * h;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const Vec3 nxm = cross(n, m);
  const double nm = dot(n, m);
  return {m.x * c + nxm.x * s + n.x * nm * (1.0 - c),
          m.y * c + nxm.y * s + n.y * nm * (1.0 - c),
          m.z * c + nxm.z * s + n.z * nm * (1.0 - c)};
}

/// Symmetric (Strang) splitting: half a cantilever step with Mz frozen
/// (RK4), an exact spin rotation about the field at the midpoint
/// displacement, then the other cantilever half step. The spin rotation is
/// exactly reversible; stepping with -h undoes a step with +h up to the RK4
/// truncation error.
class SplitStepper {
 public:
  explicit SplitStepper(const DimensionlessParams& p) : p_(p) {}

  void step(SystemState& s, double h) const {
    half_cantilever(s, 0.5 * h);
    s.M = precess(s.M, effective_field(s.Z, p_), h);
    half_cantilever(s, 0.5 * h);
  }

  const DimensionlessParams& params() const { return p_; }

 private:
  void half_cantilever(SystemState& s, double h) const {
    const double mz = s.M.z;
    auto rhs = [&](double t, const std::array<double, 2>& y) {
      return std::array<double, 2>{y[1], cantilever_acceleration(t, y[0], y[1], mz, p_)};
    };
    const auto y = rk4_step<2>({s.Z, s.V}, s.tau, h, rhs);
    s.Z = y[0];
    s.V = y[1];
    s.tau += h;
  }

  DimensionlessParams p_;
};

struct IntegratorSettings {
  std::optional<double> max_step;  // default_step(params) when empty
  double output_spacing = 2.0 * std::numbers::pi / 32.0;
};

/// At least 20 steps per fastest precession period (|b| at |Z| = 1) and 200
/// per cantilever period.
inline double default_step(const DimensionlessParams& p) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double bmax = std::hypot(p.epsilon, std::abs(p.delta) + p.chi);
  return std::min(two_pi / (20.0 * bmax), two_pi / 200.0);
}

struct IntegratorMetadata {
  double step = 0.0;
  std::size_t substeps_per_sample = 0;
  double output_spacing = 0.0;
  double wall_seconds = 0.0;
};

struct Trajectory {
  DimensionlessParams params;
  std::vector<SystemState> samples;
  IntegratorMetadata metadata;
};

/// Integrates from `start` to `tau_end`, calling `observer(const SystemState&)`
/// at `start` and every output_spacing afterwards. The integration step is
/// output_spacing / n with the smallest n keeping it <= max_step.
template <class Observer>
IntegratorMetadata integrate_observed(const SystemState& start, const DimensionlessParams& params,
                                      double tau_end, const IntegratorSettings& settings, Observer&& observer) {
  params.validate();
  if (!(tau_end > start.tau)) throw std::invalid_argument("integrate: tau_end must exceed start.tau");
  if (!(settings.output_spacing > 0.0)) throw std::invalid_argument("integrate: output_spacing must be positive");
  if (!(1.0 + params.alpha * start.Z > 0.0)) throw ProximityError(start.tau, start.Z);
  const double hmax = settings.max_step.value_or(default_step(params));
  if (!(hmax > 0.0)) throw std::invalid_argument("integrate: step must be positive");

  const auto wall0 = std::chrono::steady_clock::now();
  IntegratorMetadata meta;
  meta.output_spacing = settings.output_spacing;
  meta.substeps_per_sample = static_cast<std::size_t>(std::ceil(settings.output_spacing / hmax - 1e-9));
  if (meta.substeps_per_sample == 0) meta.substeps_per_sample = 1;
  meta.step = settings.output_spacing / static_cast<double>(meta.substeps_per_sample);
  const double scale = std::max({std::abs(start.tau), std::abs(tau_end), 1.0});
  if (meta.step <= 4.0 * std::numeric_limits<double>::epsilon() * scale)
    throw StepUnderflowError("integrate: step " + std::to_string(meta.step) + " underflows at tau scale " +
                             std::to_string(scale));

  const SplitStepper stepper(params);
  const auto n_samples =
      static_cast<std::size_t>(std::floor((tau_end - start.tau) / settings.output_spacing + 1e-9));
  SystemState s = start;
  observer(std::as_const(s));
  for (std::size_t i = 1; i <= n_samples; ++i) {
    const double tau_sample = start.tau + static_cast<double>(i) * settings.output_spacing;
    const double tau_base = tau_sample - settings.output_spacing;
    for (std::size_t j = 0; j < meta.substeps_per_sample; ++j) {
      s.tau = tau_base + static_cast<double>(j) * meta.step;
      stepper.step(s, meta.step);
    }
    s.tau = tau_sample;
    observer(std::as_const(s));
  }
  meta.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return meta;
}

inline Trajectory integrate(const SystemState& start, const DimensionlessParams& params, double tau_end,
                            const IntegratorSettings& settings = {}) {
  Trajectory traj;
  traj.params = params;
  traj.samples.reserve(static_cast<std::size_t>((tau_end - start.tau) / settings.output_spacing) + 2);
  traj.metadata = integrate_observed(start, params, tau_end, settings,
                                     [&](const SystemState& s) { traj.samples.push_back(s); });
  return traj;
}

/// Formats a double with 12 significant digits.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Trajectory rows `tau,Z,V,Mx,My,Mz`.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "tau,Z,V,Mx,My,Mz\n";
  for (const auto& s : traj.samples) {
    os << format_number(s.tau) << ',' << format_number(s.Z) << ',' << format_number(s.V) << ','
       << format_number(s.M.x) << ',' << format_number(s.M.y) << ',' << format_number(s.M.z) << '\n';
  }
}

}  // namespace oscar
