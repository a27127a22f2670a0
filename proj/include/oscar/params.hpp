#pragma once

// Physical and dimensionless parameter sets for the OSCAR cantilever-spin
// model, and the conversion between them.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

namespace oscar {

inline constexpr double kBohrMagneton = 9.2740100783e-24;  // J/T
// Electron gyromagnetic ratio. This is the value that reproduces
// epsilon ~ 280 for B1 = 1 mT at omega_c/2pi = 100 kHz.
inline constexpr double kElectronGyromagneticRatio = 1.760859e11;  // rad/(s T)

/// How the cantilever drive is specified: by force amplitude F0 or by the
/// unperturbed resonant amplitude A = F0 Q / k_s.
struct DriveSpec {
  enum class Kind { force, amplitude };
  Kind kind = Kind::amplitude;
  double value = 0.0;

  static DriveSpec force(double f0) { return {Kind::force, f0}; }
  static DriveSpec amplitude(double a) { return {Kind::amplitude, a}; }
};

/// Cantilever, tip magnet, spin and fields in SI units.
///
/// The tip moment is stored as the product mu0 * m_F (T m^3), the only
/// combination in which it appears.
struct PhysicalParams {
  double spring_constant = 0.0;       // k_s [N/m]
  double cantilever_frequency = 0.0;  // omega_c [rad/s]
  double quality_factor = 0.0;        // Q
  double mu0_tip_moment = 0.0;        // mu0 m_F [T m^3]
  double tip_sample_distance = 0.0;   // d [m]
  double spin_moment_bohr = 0.0;      // mu / mu_B
  double gyromagnetic_ratio = kElectronGyromagneticRatio;
  double rf_field = 0.0;      // B1 [T]
  double field_offset = 0.0;  // Delta B [T]
  DriveSpec drive{};
  std::optional<double> base_field;  // B0 [T]; only used for the rf carrier

  /// mu0 m_F from a magnet volume and its mu0 M (T) magnetization.
  static double tip_moment_from_volume(double volume, double mu0_magnetization) {
    return volume * mu0_magnetization;
  }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string(name) + " must be positive and finite");
    };
    positive(spring_constant, "spring_constant");
    positive(cantilever_frequency, "cantilever_frequency");
    positive(quality_factor, "quality_factor");
    positive(tip_sample_distance, "tip_sample_distance");
    positive(rf_field, "rf_field");
    positive(drive.value, drive.kind == DriveSpec::Kind::force ? "force_F0" : "amplitude_A");
    if (!(mu0_tip_moment >= 0.0)) throw std::invalid_argument("mu0_mF must be non-negative");
    if (!(spin_moment_bohr >= 0.0)) throw std::invalid_argument("mu_bohr must be non-negative");
    if (!(gyromagnetic_ratio > 0.0)) throw std::invalid_argument("gamma must be positive");
    if (amplitude() >= tip_sample_distance)
      throw std::invalid_argument("amplitude A must be smaller than the tip-sample distance d");
  }

  double effective_mass() const {
    return spring_constant / (cantilever_frequency * cantilever_frequency);
  }
  double spin_moment() const { return spin_moment_bohr * kBohrMagneton; }

  /// Unperturbed resonant amplitude A = f0 Q / omega_c^2 = F0 Q / k_s.
  double amplitude() const {
    return drive.kind == DriveSpec::Kind::amplitude
               ? drive.value
               : drive.value * quality_factor / spring_constant;
  }
  double drive_force() const {
    return drive.kind == DriveSpec::Kind::force
               ? drive.value
               : drive.value * spring_constant / quality_factor;
  }

  /// Coupling constant q = 3 mu0 m_F / (2 pi m*).
  double coupling_q() const {
    return 3.0 * mu0_tip_moment / (2.0 * std::numbers::pi * effective_mass());
  }

  /// Point-dipole field of the tip at the spin for cantilever displacement z.
  double dipole_field(double z = 0.0) const {
    const double r = tip_sample_distance + z;
    return mu0_tip_moment / (2.0 * std::numbers::pi * r * r * r);
  }

  /// rf carrier omega_0 = gamma (B0 + B_d(0)); needs B0.
  std::optional<double> carrier_frequency() const {
    if (!base_field) return std::nullopt;
    return gyromagnetic_ratio * (*base_field + dipole_field(0.0));
  }
};

/// Control parameters of the dimensionless equations of motion.
struct DimensionlessParams {
  double lambda = 0.0;   // spin back-action on the cantilever
  double chi = 0.0;      // field-gradient modulation of the spin
  double epsilon = 0.0;  // rf field / omega_c
  double delta = 0.0;    // static offset field / omega_c
  double quality_factor = 100.0;
  double alpha = 0.0;    // A / d
  double rho = 0.0;      // drive detuning nu/omega_c - 1
  double theta0 = 1.5 * std::numbers::pi;
  bool drive_on = true;

  /// 1/Q; zero for an undamped cantilever (Q = +inf).
  double inverse_q() const { return 1.0 / quality_factor; }

  // chi = 0 is accepted (static effective field); epsilon >> 1 is not enforced.
  void validate() const {
    if (!(quality_factor > 0.0)) throw std::invalid_argument("Q must be positive");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw std::invalid_argument("epsilon must be positive");
    if (!(chi >= 0.0) || !std::isfinite(chi)) throw std::invalid_argument("chi must be non-negative");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw std::invalid_argument("lambda must be non-negative");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
    if (!std::isfinite(delta) || !std::isfinite(rho) || !std::isfinite(theta0))
      throw std::invalid_argument("delta, rho and theta0 must be finite");
  }

  /// Resonance of the bare damped cantilever, -1/(4 Q^2).
  double bare_peak_detuning() const { return -0.25 * inverse_q() * inverse_q(); }
};

/// Dimensionless control set for a laboratory configuration. The detuning,
/// drive phase and drive switch keep their defaults.
inline DimensionlessParams to_dimensionless(const PhysicalParams& p) {
  p.validate();
  const double pi = std::numbers::pi;
  const double amp = p.amplitude();
  const double d4 = std::pow(p.tip_sample_distance, 4);

  DimensionlessParams out;
  out.lambda = 3.0 * p.mu0_tip_moment * p.spin_moment() / (2.0 * pi * d4 * p.spring_constant * amp);
  out.chi = 3.0 * p.gyromagnetic_ratio * p.mu0_tip_moment * amp / (2.0 * pi * p.cantilever_frequency * d4);
  out.epsilon = p.gyromagnetic_ratio * p.rf_field / p.cantilever_frequency;
  out.delta = p.gyromagnetic_ratio * p.field_offset / p.cantilever_frequency;
  out.quality_factor = p.quality_factor;
  out.alpha = amp / p.tip_sample_distance;
  return out;
}

struct LinearOscarShift {
  double effective_frequency = 0.0;  // omega_c + delta omega_c [rad/s]
  double frequency_shift = 0.0;      // delta omega_c [rad/s]
  double effective_quality = 0.0;    // Q*
  bool small_offset = true;          // |Delta B| << B1 (validity of the linear regime)
};

/// Effective cantilever frequency and quality factor when the spin makes small
/// oscillations about the transverse plane.
inline LinearOscarShift linear_oscar_shift(const PhysicalParams& p) {
  if (!(p.tip_sample_distance > 0.0)) throw std::invalid_argument("tip_sample_distance must be positive");
  if (!(p.rf_field > 0.0)) throw std::invalid_argument("rf_field must be positive");
  const double pi = std::numbers::pi;
  const double d = p.tip_sample_distance;
  const double wc = p.cantilever_frequency;
  const double prefactor =
      3.0 * p.mu0_tip_moment * p.spin_moment() / (pi * p.effective_mass() * wc * p.rf_field * std::pow(d, 5));
  const double bracket = p.field_offset + 3.0 * p.mu0_tip_moment / (8.0 * pi * d * d * d);

  LinearOscarShift out;
  out.frequency_shift = -prefactor * bracket;
  out.effective_frequency = wc + out.frequency_shift;
  out.effective_quality = p.quality_factor * (1.0 + out.frequency_shift / wc);
  out.small_offset = std::abs(p.field_offset) < 0.1 * p.rf_field;
  return out;
}

/// Field offset at which the linear-regime shift changes sign.
inline double linear_shift_threshold(const PhysicalParams& p) {
  const double d = p.tip_sample_distance;
  return -3.0 * p.mu0_tip_moment / (8.0 * std::numbers::pi * d * d * d);
}

}  // namespace oscar
