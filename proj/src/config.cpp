#include <chi2/config.hpp>
#include <chi2/errors.hpp>
#include <chi2/units.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace chi2 {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<double> GridSpec::values() const {
  std::vector<double> v(static_cast<std::size_t>(points));
  if (points == 1) {
    v[0] = start;
    return v;
  }
  for (int i = 0; i < points; ++i) {
    const double f = static_cast<double>(i) / (points - 1);
    v[i] = log_spacing ? std::exp(std::log(start) + f * (std::log(stop) - std::log(start)))
                       : start + f * (stop - start);
  }
  v.front() = start;
  v.back() = stop;
  return v;
}

double DeviceSpec::carrier() const { return units::omega_from_wavelength(wavelength); }

NonlinearCavity DeviceSpec::cavity() const {
  return {ModeParams(mode_a.detuning, mode_a.kappa_i, mode_a.kappa_e),
          ModeParams(mode_b.detuning, mode_b.kappa_i, mode_b.kappa_e), g};
}

FeedbackCircuit DeviceSpec::circuit() const {
  if (!feedback) throw ConfigError("device.feedback is required for this task");
  const auto& f = *feedback;
  return {ModeParams(mode_a.detuning, mode_a.kappa_i, mode_a.kappa_e), f.V, f.r, f.t, f.phi, f.coupler};
}

LocalMinimumModel DeviceSpec::local_model() const {
  if (!fit_model) throw ConfigError("device.fit_model is required for this task");
  const auto& m = *fit_model;
  const double kae = external_rate_for_minimum_fixed_intrinsic(m.r_bg, mode_a.kappa_i, m.t2_min, m.branch);
  return {m.r_bg, kae, mode_a.kappa_i + kae, 0.0, m.delta_cavity};
}

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::spectrum: return "spectrum";
    case TaskKind::g2: return "g2";
    case TaskKind::sweep: return "sweep";
    case TaskKind::shg: return "shg";
    case TaskKind::fit: return "fit";
    case TaskKind::oracle: return "oracle";
    case TaskKind::classify: return "classify";
  }
  return "unknown";
}

namespace {

enum class Dim { time, frequency, rate, power, length, angle, ratio };

const char* dim_name(Dim d) {
  switch (d) {
    case Dim::time: return "time";
    case Dim::frequency: return "frequency";
    case Dim::rate: return "rate";
    case Dim::power: return "power";
    case Dim::length: return "length";
    case Dim::angle: return "angle";
    case Dim::ratio: return "dimensionless";
  }
  return "";
}

// Factor to SI for everything except "Q".
std::optional<double> unit_factor(Dim d, const std::string& u) {
  static const std::map<std::string, double> time{{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9},
                                                  {"ps", 1e-12}, {"fs", 1e-15}};
  static const std::map<std::string, double> freq{{"rad/s", 1.0},
                                                  {"Hz", units::two_pi},
                                                  {"kHz", units::two_pi * 1e3},
                                                  {"MHz", units::two_pi * 1e6},
                                                  {"GHz", units::two_pi * 1e9},
                                                  {"THz", units::two_pi * 1e12}};
  static const std::map<std::string, double> power{{"W", 1.0}, {"mW", 1e-3}, {"uW", 1e-6}, {"nW", 1e-9},
                                                   {"pW", 1e-12}};
  static const std::map<std::string, double> length{{"m", 1.0}, {"um", 1e-6}, {"nm", 1e-9}};
  static const std::map<std::string, double> angle{{"rad", 1.0}, {"deg", std::numbers::pi / 180}};
  const std::map<std::string, double>* table = nullptr;
  switch (d) {
    case Dim::time: table = &time; break;
    case Dim::frequency:
    case Dim::rate: table = &freq; break;
    case Dim::power: table = &power; break;
    case Dim::length: table = &length; break;
    case Dim::angle: table = &angle; break;
    case Dim::ratio:
      if (u == "1") return 1.0;
      return std::nullopt;
  }
  const auto it = table->find(u);
  if (it == table->end()) return std::nullopt;
  return it->second;
}

// One JSON object being read. Every read copies the value (or the default)
// into `out`, so the output document is the fully resolved input.
class Obj {
 public:
  Obj(const json& in, json& out, std::string path) : in_(in), out_(out), path_(std::move(path)) {
    if (!in_.is_object()) fail("expected an object");
    out_ = json::object();
  }

  [[noreturn]] void fail(const std::string& msg, std::string_view key = {}) const {
    std::string where = path_;
    if (!key.empty()) where += where.empty() ? std::string(key) : "." + std::string(key);
    throw ConfigError((where.empty() ? std::string("config") : where) + ": " + msg);
  }

  bool has(const std::string& key) const { return in_.contains(key); }

  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  Obj object(const std::string& key) {
    if (!has(key)) fail("missing required block", key);
    used_.insert(key);
    return Obj(in_.at(key), out_[key], child_path(key));
  }

  std::optional<Obj> optional_object(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return object(key);
  }

  // SI value of {"value": x, "unit": u}. `carrier` is used by the unit "Q".
  double quantity(const std::string& key, Dim dim, double carrier = 0.0) {
    if (!has(key)) fail(std::string("missing required ") + dim_name(dim), key);
    return read_quantity(key, dim, carrier);
  }

  double quantity_or(const std::string& key, Dim dim, double fallback, const char* unit) {
    if (!has(key)) {
      used_.insert(key);
      out_[key] = json{{"value", fallback}, {"unit", unit}};
      return fallback * *unit_factor(dim, unit);
    }
    return read_quantity(key, dim, 0.0);
  }

  std::optional<double> optional_quantity(const std::string& key, Dim dim) {
    if (!has(key)) return std::nullopt;
    return read_quantity(key, dim, 0.0);
  }

  std::string text(const std::string& key, std::initializer_list<const char*> allowed, const char* fallback) {
    std::string v;
    if (has(key)) {
      const json& j = in_.at(key);
      if (!j.is_string()) fail("expected a string", key);
      v = j.get<std::string>();
    } else if (fallback) {
      v = fallback;
    } else {
      fail("missing required string", key);
    }
    bool ok = allowed.size() == 0;
    for (const char* a : allowed) ok = ok || v == a;
    if (!ok) {
      std::string list;
      for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
      fail("'" + v + "' is not one of {" + list + "}", key);
    }
    used_.insert(key);
    out_[key] = v;
    return v;
  }

  long long integer(const std::string& key, long long fallback, long long lo, long long hi) {
    long long v = fallback;
    if (has(key)) {
      const json& j = in_.at(key);
      if (!j.is_number_integer()) fail("expected an integer", key);
      v = j.get<long long>();
    }
    if (v < lo || v > hi) fail("value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                                   std::to_string(hi) + "]",
                               key);
    used_.insert(key);
    out_[key] = v;
    return v;
  }

  std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) {
    std::uint64_t v = fallback;
    if (has(key)) {
      const json& j = in_.at(key);
      if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
        fail("expected a non-negative integer", key);
      }
      v = j.get<std::uint64_t>();
    }
    used_.insert(key);
    out_[key] = v;
    return v;
  }

  double number(const std::string& key) {
    if (!has(key)) fail("missing required number", key);
    const json& j = in_.at(key);
    if (!j.is_number() || !std::isfinite(j.get<double>())) fail("expected a finite number", key);
    used_.insert(key);
    out_[key] = j;
    return j.get<double>();
  }

  bool boolean(const std::string& key, bool fallback) {
    bool v = fallback;
    if (has(key)) {
      if (!in_.at(key).is_boolean()) fail("expected true or false", key);
      v = in_.at(key).get<bool>();
    }
    used_.insert(key);
    out_[key] = v;
    return v;
  }

  fs::path file(const std::string& key, const fs::path& base) {
    const std::string s = text(key, {}, nullptr);
    fs::path p(s);
    if (p.is_relative()) p = base / p;
    p = p.lexically_normal();
    out_[key] = p.string();
    return p;
  }

  const json& array(const std::string& key) {
    if (!has(key)) fail("missing required list", key);
    const json& j = in_.at(key);
    if (!j.is_array() || j.empty()) fail("expected a non-empty list", key);
    used_.insert(key);
    out_[key] = json::array();
    return j;
  }

  json& out(const std::string& key) { return out_[key]; }
  const json& raw(const std::string& key) const { return in_.at(key); }

  // Rejects keys nobody asked for.
  void finish() const {
    for (const auto& [k, v] : in_.items()) {
      if (!used_.count(k)) fail("unknown key", k);
    }
  }

 private:
  double read_quantity(const std::string& key, Dim dim, double carrier) {
    const json& q = in_.at(key);
    const std::string p = child_path(key);
    if (!q.is_object()) fail("expected {\"value\": number, \"unit\": string}", key);
    for (const auto& [k, v] : q.items()) {
      if (k != "value" && k != "unit") throw ConfigError(p + ": unknown key " + k);
    }
    if (!q.contains("value") || !q.at("value").is_number()) throw ConfigError(p + ": missing numeric value");
    if (!q.contains("unit") || !q.at("unit").is_string()) {
      throw ConfigError(p + ": every quantity needs an explicit unit");
    }
    const double v = q.at("value").get<double>();
    const std::string u = q.at("unit").get<std::string>();
    if (!std::isfinite(v)) throw ConfigError(p + ": value must be finite");
    used_.insert(key);
    out_[key] = json{{"value", q.at("value")}, {"unit", u}};
    if (dim == Dim::rate && u == "Q") {
      if (!(v > 0)) throw ConfigError(p + ": quality factor must be positive");
      if (!(carrier > 0)) throw ConfigError(p + ": unit Q needs an optical carrier");
      return units::rate_from_q(carrier, v);
    }
    const auto f = unit_factor(dim, u);
    if (!f) throw ConfigError(p + ": unit '" + u + "' is not a " + dim_name(dim) + " unit");
    return v * *f;
  }

  const json& in_;
  json& out_;
  std::string path_;
  std::set<std::string> used_;
};


GridSpec read_grid(Obj o, Dim dim) {
  GridSpec g;
  const std::string unit = o.text("unit", {}, nullptr);
  const auto f = unit_factor(dim, unit);
  if (!f) o.fail("unit '" + unit + "' is not a " + dim_name(dim) + " unit", "unit");
  g.start = o.number("start") * *f;
  g.stop = o.number("stop") * *f;
  g.points = static_cast<int>(o.integer("points", 0, 1, 1000000));
  g.log_spacing = o.text("spacing", {"linear", "log"}, "linear") == "log";
  if (g.points > 1 && !(g.stop > g.start)) o.fail("stop must exceed start");
  if (g.log_spacing && !(g.start > 0)) o.fail("log spacing needs a positive start");
  o.finish();
  return g;
}

// kappa_e may be left out when the fit model supplies it (`derived_kappa_e`).
ModeSpec read_mode(Obj o, double carrier, bool derived_kappa_e = false) {
  ModeSpec m;
  m.detuning = o.quantity_or("detuning", Dim::frequency, 0.0, "MHz");
  m.kappa_i = o.quantity("kappa_i", Dim::rate, carrier);
  if (!derived_kappa_e || o.has("kappa_e")) m.kappa_e = o.quantity("kappa_e", Dim::rate, carrier);
  o.finish();
  try {
    ModeParams(m.detuning, m.kappa_i, m.kappa_e);
  } catch (const std::invalid_argument& e) {
    o.fail(e.what());
  }
  return m;
}

double ratio_in(Obj& o, const std::string& key, double fallback, double lo, double hi) {
  const double v = o.quantity_or(key, Dim::ratio, fallback, "1");
  if (v < lo || v > hi) o.fail("must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]", key);
  return v;
}

DeviceSpec read_device(Obj o) {
  DeviceSpec d;
  d.wavelength = o.quantity("wavelength", Dim::length);
  if (!(d.wavelength > 0)) o.fail("must be positive", "wavelength");
  const double w0 = d.carrier();
  const bool has_fit_model = o.has("fit_model");
  const bool derived_kappa_e =
      has_fit_model && o.has("mode_a") && o.raw("mode_a").is_object() && !o.raw("mode_a").contains("kappa_e");
  d.mode_a = read_mode(o.object("mode_a"), w0, has_fit_model);
  d.mode_b = read_mode(o.object("mode_b"), 2 * w0);
  d.g = o.quantity("g", Dim::frequency);
  if (d.g < 0) o.fail("must be >= 0", "g");
  if (auto fb = o.optional_object("feedback")) {
    FeedbackSpec f;
    f.V = fb->quantity("V", Dim::frequency);
    if (f.V < 0) fb->fail("must be >= 0", "V");
    if (!fb->has("r")) fb->fail("missing required dimensionless", "r");
    f.r = ratio_in(*fb, "r", 0.0, 0.0, 1.0);
    f.t = ratio_in(*fb, "t", std::sqrt(1 - f.r * f.r), 0.0, 1.0);
    f.phi = fb->quantity_or("phi", Dim::angle, 0.0, "rad");
    if (auto c = fb->optional_object("coupler")) {
      f.coupler.q = ratio_in(*c, "q", 0.0, 0.0, 1.0);
      f.coupler.eta = ratio_in(*c, "eta", 1.0, 0.0, 1.0);
      f.coupler.beta = c->quantity_or("beta", Dim::angle, 0.0, "rad");
      c->finish();
    }
    fb->finish();
    d.feedback = f;
  }
  if (auto fm = o.optional_object("fit_model")) {
    FitModelSpec m;
    m.r_bg = fm->quantity_or("r_bg", Dim::ratio, 1.0, "1");
    m.delta_cavity = fm->quantity("delta_cavity", Dim::frequency);
    m.t2_min = fm->quantity("t2_min", Dim::ratio);
    if (m.t2_min < 0 || m.t2_min > 1) fm->fail("must lie in [0, 1]", "t2_min");
    m.branch = fm->text("branch", {"under", "over"}, "under") == "over" ? CouplingBranch::over
                                                                          : CouplingBranch::under;
    fm->finish();
    d.fit_model = m;
  }
  o.finish();
  if (d.fit_model) {
    try {
      const auto m = d.local_model();
      if (derived_kappa_e) d.mode_a.kappa_e = m.kappa_ae();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("device.fit_model: ") + e.what());
    }
  }
  return d;
}

KernelOrder read_order(Obj& o, const char* fallback) {
  return o.text("order", {"leading", "exact"}, fallback) == "exact" ? KernelOrder::exact : KernelOrder::leading;
}

SweepParameter sweep_parameter(const std::string& s) {
  if (s == "delta_cavity") return SweepParameter::delta_cavity;
  if (s == "t2_min") return SweepParameter::t2_min;
  return SweepParameter::delta;
}

TaskSpec read_task(Obj o, const fs::path& base) {
  TaskSpec t;
  const std::string type = o.text("type", {"spectrum", "g2", "sweep", "shg", "fit", "oracle", "classify"}, nullptr);
  if (type == "spectrum") {
    t.kind = TaskKind::spectrum;
    const auto m = o.text("model", {"cavity", "fit_model", "two_mode", "hybridized"}, "cavity");
    t.model = m == "cavity"      ? ModelKind::cavity
              : m == "fit_model" ? ModelKind::fit_model
              : m == "two_mode"  ? ModelKind::two_mode
                                 : ModelKind::hybridized;
    t.mode = o.text("mode", {"odd", "even"}, "odd") == "even" ? ModeChoice::even : ModeChoice::odd;
  } else if (type == "g2") {
    t.kind = TaskKind::g2;
    t.model = o.text("model", {"cavity", "fit_model"}, "cavity") == "fit_model" ? ModelKind::fit_model
                                                                                 : ModelKind::cavity;
    t.order = read_order(o, "leading");
    if (auto n = o.optional_object("noise")) {
      NoiseMixParams p;
      p.u = n->quantity("u_over_t", Dim::ratio);
      p.omega_m = n->quantity_or("omega_m", Dim::frequency, 250.0, "MHz");
      p.gamma_m = n->quantity_or("gamma_m", Dim::frequency, 2.0, "MHz");
      n->finish();
      try {
        p.validate();
      } catch (const std::invalid_argument& e) {
        n->fail(e.what());
      }
      t.noise = p;
    }
  } else if (type == "sweep") {
    t.kind = TaskKind::sweep;
    t.model = ModelKind::fit_model;
    t.order = read_order(o, "leading");
    const json& axes = o.array("axes");
    if (axes.size() > 2) o.fail("at most two axes", "axes");
    for (std::size_t i = 0; i < axes.size(); ++i) {
      json out;
      Obj a(axes[i], out, o.child_path("axes") + "[" + std::to_string(i) + "]");
      SweepAxis ax;
      const auto name = a.text("parameter", {"delta", "delta_cavity", "t2_min"}, nullptr);
      ax.parameter = sweep_parameter(name);
      // The grid keys sit next to "parameter"; read them through a copy without it.
      json grid_in = axes[i];
      grid_in.erase("parameter");
      json grid_out;
      ax.grid = read_grid(Obj(grid_in, grid_out, a.child_path("grid")),
                          ax.parameter == SweepParameter::t2_min ? Dim::ratio : Dim::frequency);
      for (const auto& [k, v] : grid_out.items()) out[k] = v;
      if (ax.parameter == SweepParameter::t2_min && (ax.grid.start < 0 || ax.grid.stop > 1)) {
        a.fail("t2_min values must lie in [0, 1]");
      }
      for (const auto& prev : t.axes) {
        if (prev.parameter == ax.parameter) a.fail("parameter swept twice");
      }
      t.axes.push_back(ax);
      o.out("axes").push_back(std::move(out));
    }
  } else if (type == "shg") {
    t.kind = TaskKind::shg;
    if (o.has("t2")) t.t2 = ratio_in(o, "t2", 0.0, 0.0, 1.0);
  } else if (type == "fit") {
    t.kind = TaskKind::fit;
    t.order = read_order(o, "leading");
    const json& ds = o.array("datasets");
    for (std::size_t i = 0; i < ds.size(); ++i) {
      json out;
      Obj d(ds[i], out, o.child_path("datasets") + "[" + std::to_string(i) + "]");
      FitDatasetSpec s;
      s.curve = d.file("curve", base);
      if (d.has("t2_level")) {
        s.t2_level = ratio_in(d, "t2_level", 0.0, 0.0, 1.0);
        s.t2_sigma = d.quantity("t2_sigma", Dim::ratio);
        if (!(s.t2_sigma > 0)) d.fail("must be positive", "t2_sigma");
      }
      s.delta_guess = d.optional_quantity("delta_guess", Dim::frequency);
      d.finish();
      t.datasets.push_back(s);
      o.out("datasets").push_back(std::move(out));
    }
    t.fit_noise_tail = o.boolean("noise_tail", true);
    t.tau_ref = o.optional_quantity("tau_ref", Dim::time);
    t.coordinates = o.text("coordinates", {"log_rates", "linear"}, "log_rates") == "linear"
                        ? FitCoordinates::linear
                        : FitCoordinates::log_rates;
    t.fit_r = o.boolean("fit_r", false);
    t.starts = static_cast<int>(o.integer("starts", 8, 1, 10000));
    t.seed = o.unsigned64("seed", 1);
  } else if (type == "oracle") {
    t.kind = TaskKind::oracle;
    t.order = read_order(o, "exact");
    t.n_a_max = static_cast<int>(o.integer("n_a_max", 6, 2, max_n_a));
    t.n_b_max = static_cast<int>(o.integer("n_b_max", 3, 1, max_n_b));
    t.frame = o.text("frame", {"displaced", "lab"}, "displaced") == "lab" ? OracleFrame::lab : OracleFrame::displaced;
    if (o.has("mean_photons")) {
      t.mean_photons = o.quantity("mean_photons", Dim::ratio);
      if (!(*t.mean_photons >= 0)) o.fail("must be >= 0", "mean_photons");
    }
    t.tolerance = o.quantity_or("tolerance", Dim::ratio, 0.05, "1");
    if (!(t.tolerance > 0)) o.fail("must be positive", "tolerance");
  } else {
    t.kind = TaskKind::classify;
    t.curve = o.file("curve", base);
    t.tau_ref = o.optional_quantity("tau_ref", Dim::time);
  }
  o.finish();
  return t;
}

OutputSpec read_output(Obj o, TaskKind kind) {
  OutputSpec s;
  s.directory = o.text("directory", {}, ".");
  s.prefix = o.text("prefix", {}, std::string(to_string(kind)).c_str());
  if (s.prefix.empty() || s.prefix.find('/') != std::string::npos) o.fail("must be a plain file name", "prefix");
  if (auto g = o.optional_object("tau_grid")) s.tau_grid = read_grid(std::move(*g), Dim::time);
  if (auto g = o.optional_object("frequency_grid")) s.frequency_grid = read_grid(std::move(*g), Dim::frequency);
  o.finish();
  return s;
}

void require_grids(const RunConfig& c) {
  const auto k = c.task.kind;
  const bool needs_tau = k == TaskKind::g2 || k == TaskKind::sweep || k == TaskKind::oracle;
  if (needs_tau && !c.output.tau_grid) throw ConfigError("output.tau_grid: required for task " + std::string(to_string(k)));
  if (k == TaskKind::spectrum && !c.output.frequency_grid) throw ConfigError("output.frequency_grid: required for task spectrum");
  if (k == TaskKind::oracle && c.output.tau_grid->start < 0) throw ConfigError("output.tau_grid: oracle delays must be >= 0");
  const bool needs_fit_model = k == TaskKind::sweep || ((k == TaskKind::g2 || k == TaskKind::spectrum) &&
                                                        c.task.model == ModelKind::fit_model);
  if (needs_fit_model && !c.device.fit_model) throw ConfigError("device.fit_model: required for this task");
  const bool needs_feedback = k == TaskKind::spectrum &&
                              (c.task.model == ModelKind::two_mode || c.task.model == ModelKind::hybridized);
  if (needs_feedback && !c.device.feedback) throw ConfigError("device.feedback: required for this task");
}

}  // namespace

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
  RunConfig c;
  Obj root(doc, c.resolved, "");
  c.device = read_device(root.object("device"));
  {
    static const json empty = json::object();
    Obj d = root.has("drive") ? root.object("drive") : Obj(empty, c.resolved["drive"], "drive");
    c.drive.power = d.quantity_or("power", Dim::power, 0.0, "W");
    if (c.drive.power < 0) d.fail("must be >= 0", "power");
    c.drive.detuning = d.quantity_or("detuning", Dim::frequency, 0.0, "MHz");
    d.finish();
  }
  c.task = read_task(root.object("task"), base_dir);
  {
    static const json empty = json::object();
    Obj o = root.has("output") ? root.object("output") : Obj(empty, c.resolved["output"], "output");
    c.output = read_output(std::move(o), c.task.kind);
  }
  root.finish();
  require_grids(c);
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

RunConfig with_seed(const RunConfig& config, std::uint64_t seed) {
  if (config.task.kind != TaskKind::fit) return config;
  json doc = config.resolved;
  doc["task"]["seed"] = seed;
  return parse_config(doc);
}

RunConfig with_output_directory(const RunConfig& config, const fs::path& dir) {
  json doc = config.resolved;
  doc["output"]["directory"] = dir.string();
  return parse_config(doc);
}

std::vector<Diagnostic> validate(const RunConfig& c) {
  std::vector<Diagnostic> out;
  const NonlinearCavity cav = c.device.cavity();
  if (!cav.weak_coupling()) {
    out.push_back({Severity::warning, "strong-coupling",
                   "g is not below both linewidths; the leading-order kernel is outside its regime"});
  }
  if (c.drive.power > 0) {
    const double wp = c.device.carrier() + c.drive.detuning;
    const DriveSpec drive{c.drive.power, wp, c.device.mode_a.detuning - c.drive.detuning,
                          c.device.mode_b.detuning - 2 * c.drive.detuning};
    const double n_c = photon_numbers(cav, drive).n_c;
    const auto bound = weak_drive_bound(cav);
    if (bound.bounded && n_c > bound.n_c_max) {
      std::ostringstream m;
      m << "mean cavity photon number " << n_c << " exceeds the weak-drive bound kappa_b/(2g) = " << bound.n_c_max;
      out.push_back({Severity::warning, "weak-drive", m.str()});
    }
  }
  if (c.device.feedback && c.task.kind == TaskKind::spectrum && c.task.model == ModelKind::hybridized &&
      !c.device.circuit().large_splitting()) {
    out.push_back({Severity::warning, "large-splitting",
                   "V < 10 kappa: the hybridized single-mode description is outside its regime"});
  }
  if (c.task.kind == TaskKind::oracle && c.task.mean_photons && *c.task.mean_photons > 0.01 * c.task.n_a_max) {
    out.push_back({Severity::warning, "weak-drive",
                   "oracle mean photon number above 1% of the truncation; the analytic comparison needs weak drive"});
  }
  return out;
}

std::vector<Diagnostic> validate(const json& doc, const fs::path& base_dir) {
  try {
    return validate(parse_config(doc, base_dir));
  } catch (const std::exception& e) {
    return {{Severity::error, "config", e.what()}};
  }
}

}  // namespace chi2
