#pragma once

// Complete elliptic integrals by the arithmetic-geometric mean, and the
// cycle average of the spin force expressed through them.

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oscar {

struct EllipticPair {
  double k = 0.0;
  double K = 0.0;  // first kind
  double E = 0.0;  // second kind
};

namespace detail {

struct AgmResult {
  double K = 0.0;
  double E = 0.0;
  // K * (k^2/2 - sum_{n>=1} 2^(n-1) c_n^2) = E - k'^2 K, without cancellation
  double e_minus_kp2_k = 0.0;
};

// AGM of (1, k') carrying c_n = (a_{n-1} - b_{n-1}) / 2 in the
// cancellation-free form c_{n+1} = c_n^2 / (4 a_{n+1}). Both k and k' are
// passed so callers can supply whichever they know exactly.
inline AgmResult agm_elliptic(double k, double kp) {
  double a = 1.0;
  double b = kp;
  double c = k;  // c_0
  double tail = 0.0;  // sum_{n>=1} 2^(n-1) c_n^2
  double weight = 0.5;  // 2^(n-1)
  for (int n = 0; n < 64; ++n) {
    const double a_next = 0.5 * (a + b);
    const double b_next = std::sqrt(a * b);
    c = c * c / (4.0 * a_next);
    weight *= 2.0;
    tail += weight * c * c;
    a = a_next;
    b = b_next;
    if (c * c * weight < 1e-17 * (0.5 * k * k + tail) || c == 0.0) break;
  }
  AgmResult r;
  r.K = std::numbers::pi / (2.0 * a);
  r.E = r.K * (1.0 - 0.5 * k * k - tail);
  r.e_minus_kp2_k = r.K * (0.5 * k * k - tail);
  return r;
}

}  // namespace detail

/// K(k) and E(k) for modulus 0 <= k < 1.
inline EllipticPair complete_elliptic(double k) {
  if (!(k >= 0.0 && k < 1.0)) throw std::domain_error("complete_elliptic: modulus must lie in [0, 1)");
  const double kp = std::sqrt((1.0 - k) * (1.0 + k));
  const auto r = detail::agm_elliptic(k, kp);
  return {k, r.K, r.E};
}

/// I(p) = integral over a full period of cos^2(psi) / sqrt(p^2 + cos^2(psi)),
/// evaluated as 4 [E(k)/k - p^2 k K(k)] with k = 1/sqrt(1 + p^2).
/// I(0) = 4 and I(p) ~ pi/p for large p.
inline double averaging_integral(double p) {
  if (p == 0.0) return 4.0;
  if (!(p > 0.0)) throw std::domain_error("averaging_integral: p must be positive");
  if (std::isinf(p)) return 0.0;
  const double r = std::hypot(1.0, p);
  const double k = 1.0 / r;
  const double kp = p / r;
  // E/k - p^2 k K = (E - k'^2 K) / k
  return 4.0 * detail::agm_elliptic(k, kp).e_minus_kp2_k / k;
}

/// Leading small-p expansion 4 [1 - (p^2/4)(2 ln(4/p) - 1)] of averaging_integral.
inline double averaging_integral_smallp(double p) {
  if (p == 0.0) return 4.0;
  if (!(p > 0.0)) throw std::domain_error("averaging_integral_smallp: p must be positive");
  if (!(p < 1.0)) throw std::domain_error("averaging_integral_smallp: expansion is only valid for p < 1");
  return 4.0 * (1.0 - 0.25 * p * p * (2.0 * std::log(4.0 / p) - 1.0));
}

}  // namespace oscar
