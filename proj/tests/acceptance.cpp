// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oscar/analysis.hpp"
#include "oscar/averaging.hpp"
#include "oscar/cli.hpp"
#include "test_support.hpp"

namespace {

using namespace oscar;
constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

SweepSettings sweep_settings(double settle, double duration) {
  SweepSettings s;
  s.settle_multiplier = settle;
  s.duration_multiplier = duration;
  return s;
}

Outcome shifted_peak(Branch branch) {
  const auto p = test::reference_set();
  const auto curve = sweep_resonance(p, -3e-4, 2e-4, 41, branch, sweep_settings(8.0, 10.0));
  const double predicted = perturbative_shift(p, branch).rho1;
  const double unit = 2.0 * p.lambda / kPi;
  const double dev = std::abs(curve.peak.rho - predicted);
  for (const auto& f : curve.flags)
    if (!f.empty()) return {false, "grid point flagged '" + f + "'"};
  return {!curve.peak.outside_grid && dev <= 0.15 * unit,
          "peak " + num(curve.peak.rho) + ", predicted " + num(predicted) + ", |dev| = " + num(dev / unit) +
              " x 2lambda/pi (limit 0.15)"};
}

Outcome headline_estimate() {
  const std::string cfg = std::string(OSCAR_CONFIG_DIR) + "/lab.cfg";
  const char* argv[] = {"oscar", "estimate", "--config", cfg.c_str()};
  std::ostringstream out, err;
  if (cli::run(4, argv, out, err) != 0) return {false, "estimate failed: " + err.str()};
  std::istringstream lines(out.str());
  for (std::string line; std::getline(lines, line);) {
    const std::string key = "semiquantitative_shift_hz = ";
    if (line.rfind(key, 0) != 0) continue;
    const double hz = std::stod(line.substr(key.size()));
    return {std::abs(hz / -6.0 - 1.0) <= 0.05, "shift " + num(hz) + " Hz per Bohr magneton (target -6 +- 5%)"};
  }
  return {false, "estimate output lacks the semi-quantitative shift"};
}

Outcome unperturbed_baseline() {
  auto p = test::reference_set();
  p.lambda = 0.0;
  const auto curve = sweep_resonance(p, -3e-4, 2e-4, 41, Branch::aligned, sweep_settings(16.0, 18.0));
  double a_max = 0.0;
  for (double a : curve.amplitude) a_max = std::max(a_max, a);
  const double err = std::abs(curve.peak.rho - p.bare_peak_detuning());
  return {err <= 1e-6 && std::abs(a_max - 1.0) <= 1e-3 && !curve.peak.outside_grid,
          "peak " + num(curve.peak.rho) + " (error " + num(err) + ", limit 1e-6), a_max " + num(a_max)};
}

Outcome appendix_integral() {
  double worst = 0.0;
  for (int i = 0; i < 30; ++i) {
    const double p = std::pow(10.0, -3.0 + 5.0 * i / 29.0);
    const double ref = test::averaging_integral_quad(p);
    worst = std::max(worst, std::abs(averaging_integral(p) / ref - 1.0));
  }
  const auto rel = [](double p) { return std::abs(averaging_integral_smallp(p) / averaging_integral(p) - 1.0); };
  const double e1 = rel(0.01), e2 = rel(0.1);
  return {worst <= 1e-10 && e1 <= 1e-5 && e2 <= 1e-3,
          "max rel vs quadrature " + num(worst) + "; small-p error " + num(e1) + " at 0.01, " + num(e2) + " at 0.1"};
}

Outcome quasistatic_fidelity() {
  auto p = test::reference_set();
  const auto strong = adiabaticity_report(integrate(initial_conditions(p, Branch::aligned), p, 200.0), p);
  p.epsilon = 28.0;
  const auto weak = adiabaticity_report(integrate(initial_conditions(p, Branch::aligned), p, 200.0), p);
  const bool pass = strong.min_alignment >= 0.99 && strong.rms_deviation <= 0.02 && weak.min_alignment < 0.99 &&
                    weak.rms_deviation >= 5.0 * strong.rms_deviation;
  return {pass, "eps=280: min alignment " + num(strong.min_alignment) + ", rms " + num(strong.rms_deviation) +
                    "; eps=28: min alignment " + num(weak.min_alignment) + ", rms " + num(weak.rms_deviation)};
}

Outcome damped_drift() {
  bool pass = true;
  std::string detail;
  for (double q : {50.0, 100.0, 200.0}) {
    auto p = test::reference_set();
    p.quality_factor = q;
    p.drive_on = false;
    const auto track = instantaneous_frequency(integrate(initial_conditions(p, Branch::aligned), p, 4.0 * q));
    double dev = 0.0;
    for (std::size_t i = 0; i < track.times.size(); ++i) {
      if (damped_ratio(track.times[i], 1.0, p) > 0.3) break;
      dev = std::max(dev, std::abs(track.omega_inst[i] / damped_frequency(track.times[i], 1.0, p) - 1.0));
    }
    auto c = p;
    c.lambda = 0.0;
    const auto control = instantaneous_frequency(integrate(initial_conditions(c, Branch::aligned), c, 4.0 * q));
    const double target = std::sqrt(1.0 - 0.25 / (q * q));
    double cdev = 0.0;
    for (double w : control.omega_inst) cdev = std::max(cdev, std::abs(w - target));
    pass = pass && dev <= 1e-4 && cdev <= 1e-5;
    detail += "Q=" + num(q) + ": " + num(dev) + " (control " + num(cdev) + ") ";
  }
  return {pass, detail + "limits 1e-4 / 1e-5"};
}

Outcome conservation() {
  const auto p = test::reference_set();
  double norm_drift = 0.0;
  integrate_observed(initial_conditions(p, Branch::aligned), p, 1e4, {},
                     [&](const SystemState& s) { norm_drift = std::max(norm_drift, std::abs(norm(s.M) - 1.0)); });

  auto free = p;
  free.lambda = 0.0;
  free.quality_factor = std::numeric_limits<double>::infinity();
  double energy_drift = 0.0;
  integrate_observed(initial_conditions(free, Branch::aligned), free, 1e3, {}, [&](const SystemState& s) {
    energy_drift = std::max(energy_drift, std::abs(s.Z * s.Z + s.V * s.V - 1.0));
  });

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
  double legendre = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double k = u(rng);
    const auto a = complete_elliptic(k);
    const auto b = complete_elliptic(std::sqrt((1.0 - k) * (1.0 + k)));
    legendre = std::max(legendre, std::abs(a.E * b.K + b.E * a.K - a.K * b.K - kPi / 2));
  }
  return {norm_drift <= 1e-9 && energy_drift <= 1e-8 && legendre <= 1e-12,
          "|M| drift " + num(norm_drift) + ", energy drift " + num(energy_drift) + ", Legendre residual " +
              num(legendre)};
}

Outcome averaged_vs_exact() {
  auto p = test::reference_set();
  double worst = 0.0;
  std::string detail;
  for (double rho : {perturbative_shift(p).rho1, -3e-4, 2e-4}) {
    p.rho = rho;
    const double tau_end = 10.0 * p.quality_factor;
    IntegratorSettings settings;
    settings.output_spacing = 2.0 * kPi / 64.0;
    const auto env = half_cycle_envelope(integrate(initial_conditions(p, Branch::aligned), p, tau_end, settings).samples);
    const double dt = 0.05;
    const auto slow = integrate_slow_flow(slow_state_from_release(-1.0, p), p, tau_end, dt);
    double dev = 0.0;
    for (std::size_t i = 0; i < env.times.size(); ++i) {
      const auto k = std::min(slow.size() - 2, static_cast<std::size_t>(env.times[i] / dt));
      const double w = (env.times[i] - slow[k].tau) / dt;
      dev = std::max(dev, std::abs(env.amplitude[i] / (slow[k].a * (1.0 - w) + slow[k + 1].a * w) - 1.0));
    }
    worst = std::max(worst, dev);
    detail += "rho=" + num(rho) + ": " + num(dev) + " ";
  }
  return {worst <= 0.02, detail + "(limit 0.02)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"frequency shift, aligned branch", [] { return shifted_peak(Branch::aligned); }},
      {"headline shift estimate", headline_estimate},
      {"sign reversal, inverted branch", [] { return shifted_peak(Branch::inverted); }},
      {"unperturbed baseline", unperturbed_baseline},
      {"averaging integral", appendix_integral},
      {"quasi-static fidelity and breakdown", quasistatic_fidelity},
      {"damped frequency drift", damped_drift},
      {"conservation suite", conservation},
      {"averaged vs exact envelope", averaged_vs_exact},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
