#pragma once

// Measurements on exact trajectories: stationary amplitude, resonance
// sweeps, zero-crossing frequency tracks and adiabatic-following diagnostics.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "oscar/curve.hpp"
#include "oscar/dynamics.hpp"
#include "oscar/params.hpp"
#include "oscar/quasistatic.hpp"

namespace oscar {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AmplitudeEstimate {
  double amplitude = 0.0;
  double spread = 0.0;        // (max - min) / mean of the half-cycle amplitudes
  double rms_amplitude = 0.0; // sqrt(2) * RMS over whole cycles, cross-check
  std::size_t cycles = 0;
  bool degenerate = false;    // no oscillation in the window
};

class NonStationaryError : public AnalysisError {
 public:
  explicit NonStationaryError(const AmplitudeEstimate& e)
      : AnalysisError("trajectory is not stationary: cycle spread " + std::to_string(e.spread)), estimate_(e) {}
  const AmplitudeEstimate& estimate() const { return estimate_; }

 private:
  AmplitudeEstimate estimate_;
};

namespace detail {

// Cubic Hermite interpolant of Z on one sample interval, in u = (t - t0)/dt.
struct HermiteSegment {
  double t0, dt, c0, c1, c2, c3;

  HermiteSegment(const SystemState& a, const SystemState& b) : t0(a.tau), dt(b.tau - a.tau) {
    c0 = a.Z;
    c1 = dt * a.V;
    c2 = 3.0 * (b.Z - a.Z) - 2.0 * dt * a.V - dt * b.V;
    c3 = 2.0 * (a.Z - b.Z) + dt * a.V + dt * b.V;
  }
  double value(double u) const { return c0 + u * (c1 + u * (c2 + u * c3)); }
  double slope(double u) const { return c1 + u * (2.0 * c2 + u * 3.0 * c3); }
};

// Root of g on [0, 1] given g(0) and g(1) of opposite sign (or zero).
template <class G>
double bisect_unit(G&& g) {
  double lo = 0.0, hi = 1.0;
  const double glo = g(lo);
  if (glo == 0.0) return lo;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    if ((gm < 0.0) == (glo < 0.0)) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

struct Extremum {
  double tau = 0.0;
  double value = 0.0;
  bool maximum = true;
};

/// Extrema of Z located where V changes sign, refined on the cubic Hermite
/// interpolant built from (Z, V) at the bracketing samples.
inline std::vector<Extremum> find_extrema(const std::vector<SystemState>& s, std::size_t first = 0) {
  std::vector<Extremum> out;
  for (std::size_t i = first; i + 1 < s.size(); ++i) {
    const double v0 = s[i].V, v1 = s[i + 1].V;
    const bool max = v0 > 0.0 && v1 <= 0.0;
    const bool min = v0 < 0.0 && v1 >= 0.0;
    if (!max && !min) continue;
    const detail::HermiteSegment seg(s[i], s[i + 1]);
    const double u = detail::bisect_unit([&](double x) { return seg.slope(x); });
    out.push_back({seg.t0 + u * seg.dt, seg.value(u), max});
  }
  return out;
}

/// Upward zero crossings of Z, refined on the cubic Hermite interpolant.
inline std::vector<double> upward_crossings(const std::vector<SystemState>& s) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (!(s[i].Z < 0.0 && s[i + 1].Z >= 0.0)) continue;
    const detail::HermiteSegment seg(s[i], s[i + 1]);
    const double u = detail::bisect_unit([&](double x) { return seg.value(x); });
    out.push_back(seg.t0 + u * seg.dt);
  }
  return out;
}

struct Envelope {
  std::vector<double> times;      // midpoints of consecutive extrema
  std::vector<double> amplitude;  // half the swing between them
};

inline Envelope half_cycle_envelope(const std::vector<SystemState>& s) {
  const auto ext = find_extrema(s);
  Envelope env;
  for (std::size_t i = 0; i + 1 < ext.size(); ++i) {
    env.times.push_back(0.5 * (ext[i].tau + ext[i + 1].tau));
    env.amplitude.push_back(0.5 * std::abs(ext[i].value - ext[i + 1].value));
  }
  return env;
}

/// Stationary oscillation amplitude after discarding tau < settle_multiplier * Q.
/// The amplitude is the mean of (Z_max - Z_min) / 2 over consecutive extrema.
inline AmplitudeEstimate stationary_amplitude(const Trajectory& traj, double settle_multiplier = 8.0) {
  const auto& s = traj.samples;
  if (s.size() < 3) throw AnalysisError("stationary_amplitude: trajectory too short");
  const double q = traj.params.quality_factor;
  const double settle = std::isfinite(q) ? settle_multiplier * q : 0.0;
  const double needed = std::isfinite(q) ? (settle_multiplier + 2.0) * q : 0.0;
  const double spacing = s[1].tau - s[0].tau;  // a run may stop up to one sample short of its end time
  if (s.back().tau - s.front().tau + spacing < needed * (1.0 - 1e-9))
    throw AnalysisError("stationary_amplitude: trajectory too short for the settling window");

  const double t_start = s.front().tau + settle;
  const auto first = static_cast<std::size_t>(
      std::lower_bound(s.begin(), s.end(), t_start, [](const SystemState& a, double t) { return a.tau < t; }) -
      s.begin());

  AmplitudeEstimate est;
  double zmax = 0.0;
  for (std::size_t i = first; i < s.size(); ++i) zmax = std::max(zmax, std::abs(s[i].Z));
  if (zmax <= std::numeric_limits<double>::min()) {
    est.degenerate = true;
    return est;
  }

  const auto ext = find_extrema(s, first);
  if (ext.size() < 21) throw AnalysisError("stationary_amplitude: fewer than 10 cycles in the window");

  double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i + 1 < ext.size(); ++i) {
    const double half = 0.5 * std::abs(ext[i].value - ext[i + 1].value);
    sum += half;
    lo = std::min(lo, half);
    hi = std::max(hi, half);
  }
  const auto pairs = static_cast<double>(ext.size() - 1);
  est.amplitude = sum / pairs;
  est.spread = (hi - lo) / est.amplitude;
  est.cycles = (ext.size() - 1) / 2;

  // RMS over whole cycles: between the first and last maximum
  const auto first_max = std::find_if(ext.begin(), ext.end(), [](const Extremum& e) { return e.maximum; });
  const auto last_max = std::find_if(ext.rbegin(), ext.rend(), [](const Extremum& e) { return e.maximum; });
  if (first_max != ext.end() && first_max->tau < last_max->tau) {
    double m = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (std::size_t i = first; i < s.size(); ++i) {
      if (s[i].tau < first_max->tau || s[i].tau >= last_max->tau) continue;
      m += s[i].Z;
      m2 += s[i].Z * s[i].Z;
      ++n;
    }
    if (n > 0) {
      m /= static_cast<double>(n);
      est.rms_amplitude = std::sqrt(2.0 * std::max(0.0, m2 / static_cast<double>(n) - m * m));
    }
  }
  if (est.spread > 0.01) throw NonStationaryError(est);
  return est;
}

struct SweepSettings {
  IntegratorSettings integrator{std::nullopt, 2.0 * std::numbers::pi / 128.0};
  double settle_multiplier = 8.0;
  double duration_multiplier = 10.0;  // each point runs to tau = duration_multiplier * Q
  bool refine = false;                // golden-section refinement on fresh simulations
  double refine_tolerance = 1e-7;
  unsigned threads = 0;               // 0: hardware concurrency
};

/// Stationary amplitude of the exact model at one detuning, started from the
/// standard release conditions on the given branch.
inline AmplitudeEstimate simulate_amplitude(DimensionlessParams p, double rho, Branch branch,
                                            const SweepSettings& settings) {
  p.rho = rho;
  p.drive_on = true;
  const auto traj =
      integrate(initial_conditions(p, branch), p, settings.duration_multiplier * p.quality_factor, settings.integrator);
  return stationary_amplitude(traj, settings.settle_multiplier);
}

namespace detail {

// Runs job(i) for i in [0, n) on up to `threads` workers. Results are
// written by index, so the outcome does not depend on scheduling.
template <class Job>
void parallel_for(std::size_t n, unsigned threads, Job&& job) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) job(i);
    });
}

}  // namespace detail

/// Golden-section search for the amplitude maximum in [lo, hi].
inline CurvePeak refine_peak(const DimensionlessParams& p, double lo, double hi, Branch branch,
                             const SweepSettings& settings) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  auto amp = [&](double rho) { return simulate_amplitude(p, rho, branch, settings).amplitude; };
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = amp(x1), f2 = amp(x2);
  while (hi - lo > settings.refine_tolerance) {
    if (f1 < f2) {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = amp(x2);
    } else {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = amp(x1);
    }
  }
  CurvePeak peak;
  peak.rho = f1 > f2 ? x1 : x2;
  peak.amplitude = std::max(f1, f2);
  return peak;
}

/// Resonance curve of the exact model: one integration per grid point from
/// the release conditions, stationary amplitude per point, peak from a
/// parabola through the best three points (optionally golden-section refined).
inline ResonanceCurve sweep_resonance(const DimensionlessParams& params, double rho_min, double rho_max,
                                      std::size_t n_points, Branch branch, const SweepSettings& settings = {}) {
  params.validate();
  if (n_points < 5) throw std::invalid_argument("sweep_resonance: need at least 5 points");
  if (!(rho_max > rho_min)) throw std::invalid_argument("sweep_resonance: rho_max must exceed rho_min");
  if (!std::isfinite(params.quality_factor)) throw std::invalid_argument("sweep_resonance: Q must be finite");

  ResonanceCurve c;
  c.source = CurveSource::exact_simulation;
  c.rho.resize(n_points);
  c.amplitude.assign(n_points, std::numeric_limits<double>::quiet_NaN());
  c.spread.assign(n_points, std::numeric_limits<double>::quiet_NaN());
  c.flags.assign(n_points, "");
  for (std::size_t i = 0; i < n_points; ++i)
    c.rho[i] = rho_min + (rho_max - rho_min) * static_cast<double>(i) / static_cast<double>(n_points - 1);

  detail::parallel_for(n_points, settings.threads, [&](std::size_t i) {
    try {
      const auto est = simulate_amplitude(params, c.rho[i], branch, settings);
      c.amplitude[i] = est.amplitude;
      c.spread[i] = est.spread;
      if (est.degenerate) c.flags[i] = "degenerate";
    } catch (const NonStationaryError& e) {
      c.spread[i] = e.estimate().spread;
      c.flags[i] = "non-stationary";
    } catch (const ProximityError&) {
      c.flags[i] = "proximity";
    } catch (const std::exception&) {
      c.flags[i] = "failed";
    }
  });

  c.peak = locate_peak(c);
  if (settings.refine && !c.peak.outside_grid) {
    const double h = (rho_max - rho_min) / static_cast<double>(n_points - 1);
    c.peak = refine_peak(params, c.peak.rho - h, c.peak.rho + h, branch, settings);
  }
  return c;
}

struct FrequencyTrack {
  std::vector<double> times;      // midpoints between consecutive upward crossings
  std::vector<double> omega_inst; // 2 pi / period
  std::vector<double> amplitude;  // (max - min) / 2 within the cycle
};

inline FrequencyTrack instantaneous_frequency(const Trajectory& traj) {
  const auto crossings = upward_crossings(traj.samples);
  if (crossings.size() < 3) throw AnalysisError("instantaneous_frequency: fewer than 3 upward zero crossings");
  const auto ext = find_extrema(traj.samples);
  FrequencyTrack track;
  std::size_t e = 0;
  for (std::size_t i = 0; i + 1 < crossings.size(); ++i) {
    const double t0 = crossings[i], t1 = crossings[i + 1];
    track.times.push_back(0.5 * (t0 + t1));
    track.omega_inst.push_back(2.0 * std::numbers::pi / (t1 - t0));
    double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
    while (e < ext.size() && ext[e].tau < t0) ++e;
    for (std::size_t j = e; j < ext.size() && ext[j].tau < t1; ++j) {
      hi = std::max(hi, ext[j].value);
      lo = std::min(lo, ext[j].value);
    }
    track.amplitude.push_back(std::isfinite(hi) && std::isfinite(lo) ? 0.5 * (hi - lo)
                                                                      : std::numeric_limits<double>::quiet_NaN());
  }
  return track;
}

struct AdiabaticitySample {
  double tau = 0.0;
  double alignment = 0.0;  // M . b_hat, sign-corrected for the branch
  double mz = 0.0;
  double mz_quasistatic = 0.0;
};

struct AdiabaticityReport {
  double min_alignment = 1.0;
  double rms_deviation = 0.0;  // RMS of Mz - Mz(quasi-static)
};

inline std::vector<AdiabaticitySample> adiabaticity_trace(const Trajectory& traj, const DimensionlessParams& p,
                                                          Branch branch = Branch::aligned) {
  std::vector<AdiabaticitySample> out;
  out.reserve(traj.samples.size());
  const double sign = branch_sign(branch);
  for (const auto& s : traj.samples) {
    const Vec3 b = effective_field(s.Z, p);
    out.push_back({s.tau, sign * dot(s.M, b) / norm(b), s.M.z, quasistatic_moment(s.Z, p, branch).z});
  }
  return out;
}

inline AdiabaticityReport adiabaticity_report(const Trajectory& traj, const DimensionlessParams& p,
                                              Branch branch = Branch::aligned) {
  AdiabaticityReport r;
  const auto trace = adiabaticity_trace(traj, p, branch);
  if (trace.empty()) return r;
  double sq = 0.0;
  for (const auto& t : trace) {
    r.min_alignment = std::min(r.min_alignment, t.alignment);
    sq += (t.mz - t.mz_quasistatic) * (t.mz - t.mz_quasistatic);
  }
  r.rms_deviation = std::sqrt(sq / static_cast<double>(trace.size()));
  return r;
}

}  // namespace oscar
