#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace oscar {

enum class CurveSource { exact_simulation, analytic, quadratic };

inline const char* to_string(CurveSource s) {
  switch (s) {
    case CurveSource::exact_simulation: return "exact-simulation";
    case CurveSource::analytic: return "analytic";
    case CurveSource::quadratic: return "quadratic";
  }
  return "unknown";
}

struct CurvePeak {
  double rho = std::numeric_limits<double>::quiet_NaN();
  double amplitude = std::numeric_limits<double>::quiet_NaN();
  bool outside_grid = false;  // maximum sits on a grid edge or next to a gap
};

/// Stationary amplitude a(rho) on a detuning grid. Points that failed keep a
/// NaN amplitude and a non-empty flag.
struct ResonanceCurve {
  std::vector<double> rho;
  std::vector<double> amplitude;
  std::vector<double> spread;      // stationarity diagnostic; NaN when not measured
  std::vector<std::string> flags;  // empty string = ok
  CurvePeak peak;
  CurveSource source = CurveSource::exact_simulation;

  std::size_t size() const { return rho.size(); }
  bool valid(std::size_t i) const { return std::isfinite(amplitude[i]) && amplitude[i] > 0.0; }
};

/// Vertex of the parabola through three points.
inline CurvePeak parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double d01 = (y1 - y0) / (x1 - x0);
  const double d12 = (y2 - y1) / (x2 - x1);
  const double curvature = (d12 - d01) / (x2 - x0);  // y = c (x - xv)^2 + yv with c = curvature
  CurvePeak p;
  if (curvature >= 0.0) {
    p.rho = x1;
    p.amplitude = y1;
    return p;
  }
  // slope at x1 of the interpolant is d01 + curvature (x1 - x0)
  const double slope1 = d01 + curvature * (x1 - x0);
  p.rho = x1 - slope1 / (2.0 * curvature);
  p.amplitude = y1 - slope1 * slope1 / (4.0 * curvature);
  return p;
}

/// Parabolic fit through the largest valid grid point and its two neighbours.
inline CurvePeak locate_peak(const ResonanceCurve& c) {
  std::size_t best = c.size();
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c.valid(i) && (best == c.size() || c.amplitude[i] > c.amplitude[best])) best = i;
  CurvePeak p;
  if (best == c.size()) {
    p.outside_grid = true;
    return p;
  }
  if (best == 0 || best + 1 >= c.size() || !c.valid(best - 1) || !c.valid(best + 1)) {
    p.rho = c.rho[best];
    p.amplitude = c.amplitude[best];
    p.outside_grid = true;
    return p;
  }
  return parabola_vertex(c.rho[best - 1], c.amplitude[best - 1], c.rho[best], c.amplitude[best],
                         c.rho[best + 1], c.amplitude[best + 1]);
}

}  // namespace oscar
