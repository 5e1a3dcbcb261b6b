#include <chi2/curve_io.hpp>
#include <chi2/errors.hpp>
#include <chi2/parallel.hpp>
#include <chi2/run.hpp>
#include <chi2/units.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#ifndef CHI2_VERSION
#define CHI2_VERSION "0.0.0"
#endif

namespace chi2 {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view version() { return CHI2_VERSION; }

namespace {

void dump_to(const json& j, std::string& s, int indent, int level) {
  const bool pretty = indent >= 0;
  auto newline = [&](int lv) {
    if (!pretty) return;
    s += '\n';
    s.append(static_cast<std::size_t>(indent * lv), ' ');
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        s += "{}";
        return;
      }
      s += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) s += ',';
        first = false;
        newline(level + 1);
        s += json(k).dump();
        s += pretty ? ": " : ":";
        dump_to(v, s, indent, level + 1);
      }
      newline(level);
      s += '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        s += "[]";
        return;
      }
      s += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) s += ',';
        newline(level + 1);
        dump_to(j[i], s, indent, level + 1);
      }
      newline(level);
      s += ']';
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      s += std::isfinite(v) ? format_double(v) : "null";  // JSON has no NaN/inf
      return;
    }
    default:
      s += j.dump();
  }
}

struct Writer {
  const RunConfig& config;
  RunOutput& result;

  fs::path path(const std::string& suffix) const { return config.output.directory / (config.output.prefix + suffix); }

  std::string header() const {
    return "chi2transport " + std::string(version()) + "\nconfig " + dump_json(config.resolved, -1);
  }

  std::ofstream open(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + p.string());
    f.imbue(std::locale::classic());
    result.files.push_back(p);
    return f;
  }

  // Comment header, column names, then rows of full-precision numbers.
  void table(const std::string& suffix, const std::vector<std::string>& columns,
             const std::vector<std::vector<double>>& rows, const std::vector<std::string>& notes = {}) {
    auto f = open(path(suffix));
    std::istringstream h(header());
    for (std::string line; std::getline(h, line);) f << "# " << line << '\n';
    for (const auto& n : notes) f << "# " << n << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) f << (i ? "," : "") << columns[i];
    f << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << format_double(row[i]);
      f << '\n';
    }
  }

  void report(json body) {
    body["version"] = std::string(version());
    body["config"] = config.resolved;
    auto f = open(path(".json"));
    f << dump_json(body) << '\n';
  }

  void resolved_config() {
    auto f = open(path(".config.json"));
    f << dump_json(config.resolved) << '\n';
  }
};

double to_hz(double w) { return units::rad_to_hz(w); }

std::vector<double> grid_values(const std::optional<GridSpec>& g) { return g->values(); }

// ---- spectrum ---------------------------------------------------------------

void run_spectrum(const RunConfig& c, Writer& w) {
  const auto omegas = grid_values(c.output.frequency_grid);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> cols;
  switch (c.task.model) {
    case ModelKind::cavity: {
      cols = {"detuning_hz", "t_re", "t_im", "t2"};
      const ModeParams a = c.device.cavity().mode_a();
      for (double w0 : omegas) {
        const auto t = single_photon_transmission(a, w0);
        rows.push_back({to_hz(w0), t.real(), t.imag(), std::norm(t)});
      }
      break;
    }
    case ModelKind::fit_model: {
      cols = {"delta_hz", "t_re", "t_im", "t2"};
      const auto m = c.device.local_model();
      for (double w0 : omegas) {
        const auto t = m.transmission(w0);
        rows.push_back({to_hz(w0), t.real(), t.imag(), std::norm(t)});
      }
      break;
    }
    case ModelKind::two_mode: {
      cols = {"detuning_hz", "r_re", "r_im", "r2"};
      const auto fc = c.device.circuit();
      for (double w0 : omegas) {
        const auto r = reflection_two_mode(fc, w0);
        rows.push_back({to_hz(w0), r.real(), r.imag(), std::norm(r)});
      }
      break;
    }
    case ModelKind::hybridized: {
      cols = {"detuning_hz", "r_re", "r_im", "r2", "r_single_re", "r_single_im", "r_single2", "t_bar2"};
      const auto fc = c.device.circuit();
      for (double w0 : omegas) {
        const auto r = reflection_two_mode(fc, w0);
        const auto h = hybridized_reflection(fc, w0, c.task.mode);
        const auto tb = circuit_transmission(fc, w0, c.task.mode).t_bar;
        rows.push_back({to_hz(w0), r.real(), r.imag(), std::norm(r), h.real(), h.imag(), std::norm(h), std::norm(tb)});
      }
      break;
    }
  }
  w.table(".csv", cols, rows);
  w.result.summary.push_back(std::to_string(rows.size()) + " spectrum points");
}

// ---- g2 ---------------------------------------------------------------------

// Signal g2 and |t|^2 for the configured model at the drive frequency.
struct SignalModel {
  std::complex<double> t;
  std::function<double(double)> g2;
};

SignalModel signal_model(const RunConfig& c, const DeviceSpec& dev, KernelOrder order) {
  const double w0 = c.drive.detuning;
  if (c.task.model == ModelKind::fit_model) {
    const auto m = dev.local_model();
    const double kbi = dev.mode_b.kappa_i, kbe = dev.mode_b.kappa_e, g = dev.g;
    return {m.transmission(w0), [=](double tau) { return fit_model_g2(m, kbi, kbe, g, w0, tau, order); }};
  }
  const auto cav = dev.cavity();
  const auto t = single_photon_transmission(cav.mode_a(), w0);
  return {t, [=](double tau) { return g2_analytic(t, bound_state_amplitude(cav, w0, tau, order)); }};
}

void run_g2(const RunConfig& c, Writer& w) {
  const auto taus = grid_values(c.output.tau_grid);
  const auto s = signal_model(c, c.device, c.task.order);
  const double t2 = std::norm(s.t);
  CorrelationCurve curve;
  for (double tau : taus) {
    double g = s.g2(tau);
    if (c.task.noise) {
      NoiseMixParams n = *c.task.noise;
      n.u *= std::sqrt(t2);
      g = g2_mixed(g, t2, n, tau);
    }
    curve.tau.push_back(tau);
    curve.g2.push_back(g);
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < taus.size(); ++i) rows.push_back({curve.tau[i], curve.g2[i]});
  w.table(".csv", {"tau_s", "g2"}, rows, {"t2 " + format_double(t2)});
  w.result.summary.push_back("|t|^2 = " + format_double(t2));
}

// ---- sweep ------------------------------------------------------------------

void run_sweep(const RunConfig& c, Writer& w, unsigned threads) {
  const auto taus = grid_values(c.output.tau_grid);
  const auto& axes = c.task.axes;
  const auto v0 = axes[0].grid.values();
  const std::vector<double> v1 = axes.size() > 1 ? axes[1].grid.values() : std::vector<double>{0.0};
  const std::size_t n = v0.size() * v1.size();

  auto apply = [](DeviceSpec& d, double& delta, SweepParameter p, double v) {
    switch (p) {
      case SweepParameter::delta: delta = v; break;
      case SweepParameter::delta_cavity: d.fit_model->delta_cavity = v; break;
      case SweepParameter::t2_min: d.fit_model->t2_min = v; break;
    }
  };
  const auto curves = parallel_map<std::vector<double>>(n, threads, [&](std::size_t k) {
    DeviceSpec d = c.device;
    RunConfig local = c;
    double delta = c.drive.detuning;
    apply(d, delta, axes[0].parameter, v0[k / v1.size()]);
    if (axes.size() > 1) apply(d, delta, axes[1].parameter, v1[k % v1.size()]);
    local.drive.detuning = delta;
    const auto s = signal_model(local, d, c.task.order);
    std::vector<double> g(taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i) g[i] = s.g2(taus[i]);
    return g;
  });

  auto label = [](SweepParameter p) -> std::string {
    return p == SweepParameter::delta ? "delta_hz" : p == SweepParameter::delta_cavity ? "delta_cavity_hz" : "t2_min";
  };
  auto shown = [](SweepParameter p, double v) { return p == SweepParameter::t2_min ? v : to_hz(v); };

  std::vector<std::string> cols{label(axes[0].parameter)};
  if (axes.size() > 1) cols.push_back(label(axes[1].parameter));
  const std::size_t lead = cols.size();
  for (double tau : taus) cols.push_back("g2@" + format_double(tau));

  std::vector<std::vector<double>> matrix, summary;
  int antibunched = 0, bunched = 0;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> row{shown(axes[0].parameter, v0[k / v1.size()])};
    if (axes.size() > 1) row.push_back(shown(axes[1].parameter, v1[k % v1.size()]));
    std::vector<double> srow = row;
    row.insert(row.end(), curves[k].begin(), curves[k].end());
    matrix.push_back(std::move(row));

    // tau = 0 value (first grid point at the smallest |tau|) against the rest.
    std::size_t i0 = 0;
    for (std::size_t i = 1; i < taus.size(); ++i) {
      if (std::abs(taus[i]) < std::abs(taus[i0])) i0 = i;
    }
    const double g0 = curves[k][i0];
    double gmax = -std::numeric_limits<double>::infinity(), tmax = 0.0;
    for (std::size_t i = 0; i < taus.size(); ++i) {
      if (i != i0 && curves[k][i] > gmax) {
        gmax = curves[k][i];
        tmax = taus[i];
      }
    }
    const bool ab = gmax > g0;
    antibunched += ab;
    bunched += g0 > 1.0;
    srow.insert(srow.end(), {taus[i0], g0, tmax, gmax, ab ? 1.0 : 0.0});
    summary.push_back(std::move(srow));
  }
  w.table(".csv", cols, matrix, {"rows: swept parameters, columns: g2 at each delay tau (s)"});
  std::vector<std::string> scols(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(lead));
  scols.insert(scols.end(), {"tau0_s", "g2_tau0", "tau_max_s", "g2_max", "antibunched"});
  w.table(".summary.csv", scols, summary);
  w.result.summary.push_back(std::to_string(n) + " sweep points, " + std::to_string(antibunched) +
                             " antibunched, " + std::to_string(bunched) + " with g2(0) > 1");
}

// ---- shg ----------------------------------------------------------------------

void run_shg(const RunConfig& c, Writer& w) {
  const auto cav = c.device.cavity();
  const DriveSpec drive{c.drive.power, c.device.carrier() + c.drive.detuning, c.device.mode_a.detuning - c.drive.detuning,
                        c.device.mode_b.detuning - 2 * c.drive.detuning};
  const double eta = shg_efficiency(cav, drive);
  const auto n = photon_numbers(cav, drive, c.task.t2.value_or(0.0));
  const auto bound = weak_drive_bound(cav);
  json r;
  r["efficiency_per_W"] = eta;
  r["efficiency_percent_per_W"] = 100 * eta;
  r["sh_power_W"] = eta * drive.power_in * drive.power_in;
  r["n_c"] = n.n_c;
  r["n_c_sh"] = n.n_c_sh;
  if (c.task.t2) r["n_out"] = n.n_out;
  r["weak_drive"] = {{"n_c_max", bound.bounded ? json(bound.n_c_max) : json(nullptr)},
                     {"satisfied", weak_drive_satisfied(cav, n.n_c)}};
  r["max_output_amplitude"] = max_output_amplitude(cav);
  w.report(r);
  w.result.summary.push_back("SHG efficiency " + format_double(eta) + " /W, n_c " + format_double(n.n_c) +
                             ", n_c_sh " + format_double(n.n_c_sh));
}

// ---- fit ----------------------------------------------------------------------

void run_fit(const RunConfig& c, Writer& w, unsigned threads) {
  FitProblem p;
  p.g = c.device.g;
  p.kappa_bi = c.device.mode_b.kappa_i;
  p.kappa_be = c.device.mode_b.kappa_e;
  p.order = c.task.order;
  p.fit_r = c.task.fit_r;
  p.kappa_ai_guess = c.device.mode_a.kappa_i;
  if (c.device.fit_model) p.r_bg = c.device.fit_model->r_bg;
  const double kappa_a_est = c.device.mode_a.kappa_i + c.device.mode_a.kappa_e;
  for (const auto& spec : c.task.datasets) {
    FitDataset d;
    try {
      d.curve = read_curve_file(spec.curve);
    } catch (const NumericalError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(spec.curve.string() + ": " + e.what());
    }
    if (c.task.tau_ref) d.curve = normalize_curve(d.curve, *c.task.tau_ref);
    if (c.task.fit_noise_tail) d.noise = fit_noise_tail(d.curve, kappa_a_est);
    d.t2_level = spec.t2_level;
    d.t2_sigma = spec.t2_sigma;
    d.delta_guess = spec.delta_guess;
    if (c.device.fit_model) d.delta_cavity_guess = c.device.fit_model->delta_cavity;
    p.datasets.push_back(std::move(d));
  }
  FitOptions o;
  o.seed = c.task.seed;
  o.starts = c.task.starts;
  o.threads = threads;
  o.coordinates = c.task.coordinates;
  const FitResult r = fit_g2_global(p, o);

  json rep;
  rep["kappa_ai_rad_s"] = r.kappa_ai;
  rep["sigma_kappa_ai_rad_s"] = r.sigma_kappa_ai;
  rep["r_bg"] = r.r_bg;
  rep["sigma_r_bg"] = r.sigma_r_bg;
  rep["chi2"] = r.chi2;
  rep["dof"] = r.dof;
  rep["chi2_per_dof"] = r.chi2_per_dof;
  rep["curvature_positive"] = r.curvature_positive;
  rep["weighted"] = r.weighted;
  rep["best_start"] = r.best_start;
  rep["starts_converged"] = r.starts_converged;
  rep["stop"] = std::string(to_string(r.stop));
  rep["datasets"] = json::array();
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < r.datasets.size(); ++i) {
    const auto& df = r.datasets[i];
    const auto& d = p.datasets[i];
    rep["datasets"].push_back({{"curve", c.task.datasets[i].curve.string()},
                               {"delta_rad_s", df.delta},
                               {"sigma_delta_rad_s", df.sigma_delta},
                               {"delta_cavity_rad_s", df.delta_cavity},
                               {"sigma_delta_cavity_rad_s", df.sigma_delta_cavity},
                               {"kappa_ae_rad_s", df.kappa_ae},
                               {"sigma_kappa_ae_rad_s", df.sigma_kappa_ae},
                               {"t2_model", df.t2_model},
                               {"chi2", df.chi2},
                               {"noise", {{"u_over_t", d.noise.u_over_t},
                                          {"omega_m_rad_s", d.noise.omega_m},
                                          {"gamma_m_rad_s", d.noise.gamma_m},
                                          {"degenerate", d.noise.degenerate}}}});
    for (std::size_t k = 0; k < d.curve.size(); ++k) {
      const double model = fit_model_curve_point(p, d, r.kappa_ai, r.r_bg, df.delta, df.delta_cavity, df.kappa_ae,
                                                 d.curve.tau[k]);
      rows.push_back({static_cast<double>(i), d.curve.tau[k], d.curve.g2[k],
                      d.curve.has_sigma() ? d.curve.sigma[k] : std::numeric_limits<double>::quiet_NaN(), model});
    }
  }
  w.report(rep);
  w.table(".csv", {"dataset", "tau_s", "g2_data", "sigma", "g2_model"}, rows);
  w.result.summary.push_back("kappa_ai/2pi = " + format_double(to_hz(r.kappa_ai)) + " Hz, chi2/dof = " +
                             format_double(r.chi2_per_dof));
}

// ---- oracle -------------------------------------------------------------------

void run_oracle(const RunConfig& c, Writer& w) {
  const auto cav = c.device.cavity();
  const double w0 = c.drive.detuning;
  const ModeParams& a = cav.mode_a();
  std::complex<double> eps;
  if (c.task.mean_photons) {
    // Linear-response amplitude for the requested mean photon number.
    const double d = w0 - a.omega();
    eps = std::sqrt(*c.task.mean_photons * (d * d + 0.25 * a.kappa() * a.kappa()) / a.kappa_e());
  } else {
    // Split standing-wave convention: P = 2 hbar omega |eps|^2.
    eps = std::sqrt(c.drive.power / (2 * units::hbar * (c.device.carrier() + w0)));
  }
  FockConfig fc = fock_config_for(cav, w0, eps);
  fc.n_a_max = c.task.n_a_max;
  fc.n_b_max = c.task.n_b_max;
  fc.frame = c.task.frame;
  const FockOracle oracle(cav, fc);
  const auto taus = grid_values(c.output.tau_grid);
  const auto g = oracle.g2_output(taus);
  const auto t = single_photon_transmission(a, w0);

  std::vector<std::vector<double>> rows;
  double worst = 0.0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const double ref = g2_analytic(t, bound_state_amplitude(cav, w0, taus[i], c.task.order));
    const double err = std::abs(g.curve.g2[i] - ref) / ref;
    worst = std::max(worst, err);
    rows.push_back({taus[i], g.curve.g2[i], ref, err});
  }
  const auto& ss = oracle.steady_state();
  const bool pass = worst <= c.task.tolerance;
  json rep;
  rep["max_relative_error"] = worst;
  rep["tolerance"] = c.task.tolerance;
  rep["pass"] = pass;
  rep["n_a"] = ss.n_a;
  rep["n_b"] = ss.n_b;
  rep["n_a_max_used"] = ss.config.n_a_max;
  rep["n_b_max_used"] = ss.config.n_b_max;
  rep["steady_state_residual"] = ss.residual;
  rep["top_population"] = ss.top_population;
  rep["weak_drive_valid"] = ss.weak_drive_valid;
  rep["imag_residue"] = g.imag_residue;
  rep["trace_error"] = g.trace_error;
  w.report(rep);
  w.table(".csv", {"tau_s", "g2_oracle", "g2_analytic", "relative_error"}, rows);
  w.result.summary.push_back(std::string(pass ? "PASS" : "FAIL") + ": max relative error " + format_double(worst) +
                             " (tolerance " + format_double(c.task.tolerance) + ")");
}

// ---- classify -----------------------------------------------------------------

json witness_json(const Witness& wt) {
  return {{"found", wt.found},       {"tau_s", wt.tau},           {"violation", wt.violation},
          {"margin", wt.margin},     {"best_tau_s", wt.best_tau}, {"best_margin", wt.best_margin}};
}

void run_classify(const RunConfig& c, Writer& w) {
  CorrelationCurve curve;
  try {
    curve = read_curve_file(c.task.curve);
  } catch (const NumericalError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(c.task.curve.string() + ": " + e.what());
  }
  if (c.task.tau_ref) curve = normalize_curve(curve, *c.task.tau_ref);
  const auto r = classify_nonclassical(curve);
  json rep;
  rep["points"] = curve.size();
  rep["g2_zero"] = r.g2_zero;
  rep["antibunching"] = witness_json(r.antibunching);
  rep["rice_carmichael"] = witness_json(r.rice_carmichael);
  w.report(rep);
  w.result.summary.push_back("g2(0) = " + format_double(r.g2_zero) +
                             (r.antibunching.found ? ", antibunched" : ", no antibunching witness") +
                             (r.rice_carmichael.found ? ", Rice-Carmichael violated" : ""));
}

}  // namespace

std::string dump_json(const json& doc, int indent) {
  std::string s;
  dump_to(doc, s, indent, 0);
  return s;
}

RunOutput run(const RunConfig& config, unsigned threads) {
  RunOutput out;
  std::error_code ec;
  fs::create_directories(config.output.directory, ec);
  if (ec) throw ConfigError("cannot create output directory " + config.output.directory.string() + ": " + ec.message());
  Writer w{config, out};
  threads = std::max(1u, threads);
  switch (config.task.kind) {
    case TaskKind::spectrum: run_spectrum(config, w); break;
    case TaskKind::g2: run_g2(config, w); break;
    case TaskKind::sweep: run_sweep(config, w, threads); break;
    case TaskKind::shg: run_shg(config, w); break;
    case TaskKind::fit: run_fit(config, w, threads); break;
    case TaskKind::oracle: run_oracle(config, w); break;
    case TaskKind::classify: run_classify(config, w); break;
  }
  w.resolved_config();
  return out;
}

int run_main(const fs::path& config_path, const RunOptions& options, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = load_config(config_path);
    if (options.seed) config = with_seed(config, *options.seed);
    if (options.out_dir) config = with_output_directory(config, *options.out_dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_config_error;
  }
  std::vector<Diagnostic> diags;
  try {
    diags = validate(config);
  } catch (const std::exception& e) {
    diags.push_back({Severity::error, "config", e.what()});
  }
  bool failed = false;
  for (const auto& d : diags) {
    const bool is_error = d.severity == Severity::error;
    failed = failed || is_error;
    (options.validate_only ? out : err) << (is_error ? "error" : "warning") << " [" << d.code << "]: " << d.message
                                        << '\n';
  }
  if (options.validate_only) {
    if (!failed) out << "ok: " << to_string(config.task.kind) << " config is valid (" << diags.size() << " warnings)\n";
    return failed ? exit_config_error : exit_ok;
  }
  if (failed) return exit_config_error;
  try {
    const auto r = run(config, options.threads);
    for (const auto& s : r.summary) out << s << '\n';
    for (const auto& f : r.files) out << "wrote " << f.string() << '\n';
    return exit_ok;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return exit_numerical_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_config_error;
  }
}

}  // namespace chi2
