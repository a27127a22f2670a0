#pragma once

// Command-line driver: trace, sweep, damped and estimate commands.
//
// Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oscar/analysis.hpp"
#include "oscar/averaging.hpp"
#include "oscar/config.hpp"
#include "oscar/dynamics.hpp"
#include "oscar/params.hpp"
#include "oscar/quasistatic.hpp"

namespace oscar {

inline constexpr const char* kVersion = "1.0.0";

namespace cli {

enum ExitCode : int { kOk = 0, kNumerical = 1, kUsage = 2 };

struct CommonOptions {
  std::string config_path;
  std::string out_prefix;
  std::vector<std::string> overrides;
  std::optional<double> step;
  double settle = 8.0;
};

struct TraceOptions {
  double tau_end = 200.0;
  std::string branch = "aligned";
  std::optional<double> spacing;
};

struct SweepOptions {
  double rho_min = -3e-4;
  double rho_max = 2e-4;
  std::size_t points = 41;
  std::string branch = "aligned";
  double duration = 10.0;
  std::optional<double> spacing;
  bool refine = false;
  unsigned threads = 0;
};

struct DampedOptions {
  std::optional<double> tau_end;  // default 4 Q per quality factor
  std::vector<double> q_list;     // default: the configured Q
  double a0 = 1.0;
  double p_max = 0.3;
  std::string branch = "aligned";
  std::optional<double> spacing;
};

/// File buffered in memory and written atomically (temp file + rename),
/// starting with a `#` provenance header.
class OutputFile {
 public:
  OutputFile(std::string path, const std::string& command, std::uint64_t config_hash) : path_(std::move(path)) {
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
    body_ << "# oscar " << kVersion << "\n# command: " << command << "\n# config-hash: fnv1a64:" << hash << '\n';
  }

  std::ostream& stream() { return body_; }
  const std::string& path() const { return path_; }

  void commit() {
    const std::string tmp = path_ + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw std::runtime_error("cannot write '" + tmp + "'");
      f << body_.str();
      if (!f) throw std::runtime_error("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path_);
  }

 private:
  std::string path_;
  std::ostringstream body_;
};

inline std::string fmt(double v) { return format_number(v); }

inline Branch parse_branch(const std::string& s) {
  if (s == "aligned") return Branch::aligned;
  if (s == "inverted") return Branch::inverted;
  throw ConfigError("branch must be 'aligned' or 'inverted', got '" + s + "'");
}

inline Config load_with_overrides(const CommonOptions& common) {
  Config cfg = load_config(common.config_path);
  for (const auto& o : common.overrides) cfg.set(o);
  return cfg;
}

inline std::string output_path(const CommonOptions& common, const std::string& name) {
  const std::string prefix = common.out_prefix.empty() ? std::string("oscar") : common.out_prefix;
  return prefix + "_" + name + ".csv";
}

inline int run_trace(const CommonOptions& common, const TraceOptions& opt, std::ostream& out, std::ostream& err) {
  const Config cfg = load_with_overrides(common);
  const auto p = cfg.dimensionless();
  const Branch branch = parse_branch(opt.branch);
  const auto hash = fnv1a64(cfg.canonical);

  IntegratorSettings settings;
  settings.max_step = common.step;
  if (opt.spacing) settings.output_spacing = *opt.spacing;

  Trajectory traj;
  traj.params = p;
  std::string failure;
  try {
    traj.metadata = integrate_observed(initial_conditions(p, branch), p, opt.tau_end, settings,
                                       [&](const SystemState& s) { traj.samples.push_back(s); });
  } catch (const ProximityError& e) {
    failure = e.what();
  } catch (const StepUnderflowError& e) {
    failure = e.what();
  }

  OutputFile traj_file(output_path(common, "trajectory"), "trace", hash);
  write_trajectory_csv(traj_file.stream(), traj);
  OutputFile adia_file(output_path(common, "adiabaticity"), "trace", hash);
  adia_file.stream() << "tau,alignment,Mz_exact,Mz_quasistatic\n";
  for (const auto& a : adiabaticity_trace(traj, p, branch))
    adia_file.stream() << fmt(a.tau) << ',' << fmt(a.alignment) << ',' << fmt(a.mz) << ',' << fmt(a.mz_quasistatic)
                       << '\n';
  if (!failure.empty()) {
    traj_file.stream() << "# error: partial output: " << failure << '\n';
    adia_file.stream() << "# error: partial output: " << failure << '\n';
  }
  traj_file.commit();
  adia_file.commit();

  if (!failure.empty()) {
    err << "trace: integration failed: " << failure << '\n';
    return kNumerical;
  }
  const auto rep = adiabaticity_report(traj, p, branch);
  out << "samples = " << traj.samples.size() << '\n'
      << "min_alignment = " << fmt(rep.min_alignment) << '\n'
      << "rms_Mz_deviation = " << fmt(rep.rms_deviation) << '\n';
  return kOk;
}

inline int run_sweep(const CommonOptions& common, const SweepOptions& opt, std::ostream& out, std::ostream& err) {
  const Config cfg = load_with_overrides(common);
  const auto p = cfg.dimensionless();
  const auto hash = fnv1a64(cfg.canonical);
  std::vector<Branch> branches;
  if (opt.branch == "both") branches = {Branch::aligned, Branch::inverted};
  else branches = {parse_branch(opt.branch)};
  if (opt.points < 5) throw ConfigError("--points must be at least 5");
  if (!(opt.rho_max > opt.rho_min)) throw ConfigError("--rho-max must exceed --rho-min");

  SweepSettings settings;
  settings.integrator.max_step = common.step;
  if (opt.spacing) settings.integrator.output_spacing = *opt.spacing;
  settings.settle_multiplier = common.settle;
  settings.duration_multiplier = opt.duration;
  settings.refine = opt.refine;
  settings.threads = opt.threads;
  if (!(settings.duration_multiplier >= settings.settle_multiplier + 2.0))
    throw ConfigError("--duration must be at least --settle + 2");

  OutputFile summary(output_path(common, "summary"), "sweep", hash);
  summary.stream() << "branch,quantity,value\n";
  bool ok = true;
  for (const Branch b : branches) {
    const std::string name = to_string(b);
    const auto curve = sweep_resonance(p, opt.rho_min, opt.rho_max, opt.points, b, settings);
    const auto analytic = stationary_response(p, curve.rho, IntegralForm::exact, b);

    OutputFile sweep_file(output_path(common, "sweep_" + name), "sweep", hash);
    sweep_file.stream() << "rho,amplitude,stationarity_spread\n";
    for (std::size_t i = 0; i < curve.size(); ++i) {
      sweep_file.stream() << fmt(curve.rho[i]) << ',';
      if (curve.valid(i)) sweep_file.stream() << fmt(curve.amplitude[i]);
      sweep_file.stream() << ',';
      if (std::isfinite(curve.spread[i])) sweep_file.stream() << fmt(curve.spread[i]);
      sweep_file.stream() << '\n';
      if (!curve.flags[i].empty())
        sweep_file.stream() << "# gap at rho=" << fmt(curve.rho[i]) << ": " << curve.flags[i] << '\n';
    }
    sweep_file.commit();

    OutputFile an_file(output_path(common, "analytic_" + name), "sweep", hash);
    an_file.stream() << "rho,a_analytic,a_quadratic_approx,flags\n";
    for (std::size_t i = 0; i < analytic.curve.size(); ++i) {
      an_file.stream() << fmt(analytic.curve.rho[i]) << ',';
      if (analytic.curve.valid(i)) an_file.stream() << fmt(analytic.curve.amplitude[i]);
      an_file.stream() << ',' << fmt(analytic.quadratic.amplitude[i]) << ',' << analytic.curve.flags[i] << '\n';
    }
    an_file.commit();

    const auto pert = perturbative_shift(p, b);
    const auto semi = semiquantitative_shift(p);
    const double rho_semi = semi.rho0 + branch_sign(b) * semi.shift;
    const double rho_exact = curve.peak.rho;
    auto row = [&](const char* q, double v) { summary.stream() << name << ',' << q << ',' << fmt(v) << '\n'; };
    row("rho1_exact_simulation", rho_exact);
    row("rho1_perturbative", pert.rho1);
    row("rho1_semiquantitative", rho_semi);
    row("rho1_analytic_curve", analytic.curve.peak.rho);
    row("exact_minus_perturbative", rho_exact - pert.rho1);
    row("exact_minus_semiquantitative", rho_exact - rho_semi);
    row("perturbative_minus_semiquantitative", pert.rho1 - rho_semi);
    row("a_max_exact_simulation", curve.peak.amplitude);
    row("peak_outside_grid", curve.peak.outside_grid ? 1.0 : 0.0);
    row("analytic_beta_max", analytic.beta_max);

    out << name << ": rho1(exact)=" << fmt(rho_exact) << " rho1(perturbative)=" << fmt(pert.rho1)
        << " rho1(semiquantitative)=" << fmt(rho_semi) << '\n';
    if (!std::isfinite(rho_exact)) {
      err << "sweep: no peak could be located for the " << name << " branch\n";
      ok = false;
    } else if (curve.peak.outside_grid) {
      err << "sweep: warning: " << name << " peak is outside the grid\n";
    }
  }
  summary.commit();
  return ok ? kOk : kNumerical;
}

inline int run_damped(const CommonOptions& common, const DampedOptions& opt, std::ostream& out, std::ostream& err) {
  const Config cfg = load_with_overrides(common);
  auto base = cfg.dimensionless();
  base.drive_on = false;
  const Branch branch = parse_branch(opt.branch);
  const auto hash = fnv1a64(cfg.canonical);
  if (!(opt.a0 > 0.0)) throw ConfigError("--a0 must be positive");
  std::vector<double> qs = opt.q_list.empty() ? std::vector<double>{base.quality_factor} : opt.q_list;

  IntegratorSettings settings;
  settings.max_step = common.step;
  if (opt.spacing) settings.output_spacing = *opt.spacing;

  OutputFile summary(output_path(common, "damped_summary"), "damped", hash);
  summary.stream() << "Q,points,max_rel_dev_exact_form,max_rel_dev_exact_form_window,max_rel_dev_small_p_window,"
                      "small_p_status\n";
  for (const double q : qs) {
    auto p = base;
    p.quality_factor = q;
    p.validate();
    if (!std::isfinite(q)) throw ConfigError("damped: Q must be finite");
    const double tau_end = opt.tau_end.value_or(4.0 * q);
    const auto traj = integrate(initial_conditions(p, branch, -opt.a0), p, tau_end, settings);
    const auto track = instantaneous_frequency(traj);
    const std::string tag = "damped_Q" + fmt(q);

    OutputFile exact_file(output_path(common, tag + "_exact"), "damped", hash);
    exact_file.stream() << "tau_mid,omega_inst,amplitude\n";
    for (std::size_t i = 0; i < track.times.size(); ++i)
      exact_file.stream() << fmt(track.times[i]) << ',' << fmt(track.omega_inst[i]) << ',' << fmt(track.amplitude[i])
                          << '\n';
    exact_file.commit();

    OutputFile an_exact(output_path(common, tag + "_analytic_exact"), "damped", hash);
    OutputFile an_small(output_path(common, tag + "_analytic_smallp"), "damped", hash);
    an_exact.stream() << "tau,a,omega_inst\n";
    an_small.stream() << "tau,a,omega_inst\n";
    double dev_all = 0.0, dev_window = 0.0, dev_small = 0.0;
    std::string small_status = "ok";
    for (std::size_t i = 0; i < track.times.size(); ++i) {
      const double t = track.times[i];
      const double a = damped_amplitude(t, opt.a0, p);
      const double ratio = p.lambda > 0.0 ? damped_ratio(t, opt.a0, p) : 0.0;
      const double w_exact = damped_frequency(t, opt.a0, p, IntegralForm::exact, branch);
      an_exact.stream() << fmt(t) << ',' << fmt(a) << ',' << fmt(w_exact) << '\n';
      const double d = std::abs(track.omega_inst[i] / w_exact - 1.0);
      dev_all = std::max(dev_all, d);
      if (ratio <= opt.p_max) dev_window = std::max(dev_window, d);
      if (small_status == "ok") {
        if (p.lambda > 0.0 && !(ratio < 1.0)) {
          small_status = "refused-from-tau=" + fmt(t);
          an_small.stream() << "# small-p expansion refused from tau=" << fmt(t) << " (p=" << fmt(ratio) << " >= 1)\n";
        } else {
          const double w_small = damped_frequency(t, opt.a0, p, IntegralForm::small_p, branch);
          an_small.stream() << fmt(t) << ',' << fmt(a) << ',' << fmt(w_small) << '\n';
          if (ratio <= opt.p_max) dev_small = std::max(dev_small, std::abs(track.omega_inst[i] / w_small - 1.0));
        }
      }
    }
    an_exact.commit();
    an_small.commit();
    summary.stream() << fmt(q) << ',' << track.times.size() << ',' << fmt(dev_all) << ',' << fmt(dev_window) << ','
                     << fmt(dev_small) << ',' << small_status << '\n';
    out << "Q=" << fmt(q) << ": " << track.times.size() << " cycles, max relative deviation " << fmt(dev_all)
        << " (exact-I), small-p " << small_status << '\n';
  }
  summary.commit();
  (void)err;
  return kOk;
}

inline int run_estimate(const CommonOptions& common, std::ostream& out, std::ostream& err) {
  const Config cfg = load_with_overrides(common);
  if (cfg.kind != ConfigKind::physical) {
    err << "estimate: the Hz conversion needs omega_c; a [physical] configuration is required\n";
    return kUsage;
  }
  const auto phys = cfg.physical();
  const auto p = cfg.dimensionless();
  const auto lin = linear_oscar_shift(phys);
  const auto semi = semiquantitative_shift(p);
  const auto pert = perturbative_shift(p);
  const double fc = phys.cantilever_frequency / (2.0 * std::numbers::pi);

  struct Row {
    const char* name;
    double value;
    const char* unit;
  };
  const std::vector<Row> rows{
      {"lambda", p.lambda, ""},
      {"chi", p.chi, ""},
      {"epsilon", p.epsilon, ""},
      {"delta", p.delta, ""},
      {"alpha", p.alpha, ""},
      {"Q", p.quality_factor, ""},
      {"amplitude_A", phys.amplitude(), "m"},
      {"effective_mass", phys.effective_mass(), "kg"},
      {"dipole_field_Bd0", phys.dipole_field(0.0), "T"},
      {"linear_frequency_shift", lin.frequency_shift, "rad/s"},
      {"linear_frequency_shift_hz", lin.frequency_shift / (2.0 * std::numbers::pi), "Hz"},
      {"linear_effective_Q", lin.effective_quality, ""},
      {"rho0", semi.rho0, ""},
      {"semiquantitative_shift", semi.shift, ""},
      {"semiquantitative_shift_strong_limit", semi.strong_limit, ""},
      {"semiquantitative_shift_hz", semi.shift * fc, "Hz"},
      {"perturbative_shift", pert.spin_shift, ""},
      {"perturbative_shift_hz", pert.spin_shift * fc, "Hz"},
      {"perturbative_rho1", pert.rho1, ""},
  };
  for (const auto& r : rows) out << r.name << " = " << fmt(r.value) << (r.unit[0] ? " " : "") << r.unit << '\n';
  if (const auto w0 = phys.carrier_frequency()) out << "rf_carrier_omega0 = " << fmt(*w0) << " rad/s\n";
  if (!lin.small_offset) out << "note: |delta_B| is not small compared with B1; the linear-regime shift is outside its validity range\n";

  if (!common.out_prefix.empty()) {
    OutputFile f(output_path(common, "estimate"), "estimate", fnv1a64(cfg.canonical));
    f.stream() << "quantity,value,unit\n";
    for (const auto& r : rows) f.stream() << r.name << ',' << fmt(r.value) << ',' << r.unit << '\n';
    f.commit();
  }
  return kOk;
}

/// Parses arguments and dispatches; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"OSCAR MRFM cantilever-spin simulator"};
  app.set_version_flag("--version", std::string("oscar ") + kVersion);
  app.require_subcommand(1);

  CommonOptions common;
  TraceOptions trace;
  SweepOptions sweep;
  DampedOptions damped;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "configuration file")->required();
    sub->add_option("--out", common.out_prefix, "output path prefix");
    sub->add_option("--set", common.overrides, "override KEY=VALUE (repeatable)");
    sub->add_option("--step", common.step, "maximum integration step");
    sub->add_option("--settle", common.settle, "settling time in units of Q");
  };

  auto* trace_cmd = app.add_subcommand("trace", "integrate one trajectory and report adiabatic following");
  add_common(trace_cmd);
  trace_cmd->add_option("--tau-end", trace.tau_end, "end time");
  trace_cmd->add_option("--branch", trace.branch, "aligned|inverted");
  trace_cmd->add_option("--spacing", trace.spacing, "output spacing");

  auto* sweep_cmd = app.add_subcommand("sweep", "resonance curve from exact simulations");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--rho-min", sweep.rho_min, "lowest detuning");
  sweep_cmd->add_option("--rho-max", sweep.rho_max, "highest detuning");
  sweep_cmd->add_option("--points", sweep.points, "number of grid points");
  sweep_cmd->add_option("--branch", sweep.branch, "aligned|inverted|both");
  sweep_cmd->add_option("--duration", sweep.duration, "run length in units of Q");
  sweep_cmd->add_option("--spacing", sweep.spacing, "output spacing");
  sweep_cmd->add_flag("--refine", sweep.refine, "golden-section peak refinement");
  sweep_cmd->add_option("--threads", sweep.threads, "worker threads (0 = all cores)");

  auto* damped_cmd = app.add_subcommand("damped", "free ring-down frequency track vs averaged prediction");
  add_common(damped_cmd);
  damped_cmd->add_option("--tau-end", damped.tau_end, "end time (default 4 Q)");
  damped_cmd->add_option("--q-list", damped.q_list, "quality factors, comma separated")->delimiter(',');
  damped_cmd->add_option("--a0", damped.a0, "initial amplitude");
  damped_cmd->add_option("--p-max", damped.p_max, "largest p used in the summary window");
  damped_cmd->add_option("--branch", damped.branch, "aligned|inverted");
  damped_cmd->add_option("--spacing", damped.spacing, "output spacing");

  auto* estimate_cmd = app.add_subcommand("estimate", "parameter conversion and frequency-shift estimates");
  add_common(estimate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto selected = app.get_subcommands();
    out << (selected.empty() ? app.help() : selected.front()->help());
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << "oscar " << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*trace_cmd) return run_trace(common, trace, out, err);
    if (*sweep_cmd) return run_sweep(common, sweep, out, err);
    if (*damped_cmd) return run_damped(common, damped, out, err);
    if (*estimate_cmd) return run_estimate(common, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "invalid parameters: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}

}  // namespace cli
}  // namespace oscar
