#include <doctest.h>

#include <chi2/config.hpp>
#include <chi2/curve_io.hpp>
#include <chi2/errors.hpp>
#include <chi2/run.hpp>
#include <chi2/units.hpp>

#include "support/synthetic.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace chi2;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path config_dir = CHI2_CONFIG_DIR;

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump(2);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("chi2sim_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int chi2sim(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + CHI2SIM_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Numeric rows of a CSV written by the runner (comment lines and the column row skipped).
std::vector<std::vector<double>> csv_rows(const fs::path& p, std::vector<std::string>* columns = nullptr) {
  std::ifstream in(p);
  std::vector<std::vector<double>> rows;
  bool header_seen = false;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (!header_seen) {
      header_seen = true;
      if (columns) *columns = cells;
      continue;
    }
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(std::stod(c));
    rows.push_back(std::move(r));
  }
  return rows;
}

json coherent_g2_doc() {
  json doc = read_json(config_dir / "oracle_regression.json");
  doc["device"]["g"] = {{"value", 0.0}, {"unit", "MHz"}};
  doc["task"] = {{"type", "g2"}, {"order", "exact"}};
  doc["output"]["prefix"] = "coherent";
  return doc;
}

bool has_code(const std::vector<Diagnostic>& d, const std::string& code) {
  for (const auto& x : d) {
    if (x.code == code) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("quantities carry units") {
  const auto c = load_config(config_dir / "device_shg.json");
  const double w0 = units::omega_from_wavelength(1539.914e-9);
  CHECK(c.device.carrier() == doctest::Approx(w0).scale(0).epsilon(1e-15));
  CHECK(c.device.mode_a.kappa_i == doctest::Approx(w0 / 2.5e5).scale(0).epsilon(1e-15));
  CHECK(c.device.mode_b.kappa_i == doctest::Approx(2 * w0 / 5.1e4).scale(0).epsilon(1e-15));
  CHECK(c.device.g == doctest::Approx(units::hz_to_rad(6.5e6)).scale(0).epsilon(1e-15));
  CHECK(c.drive.power == doctest::Approx(56.3e-9).scale(0).epsilon(1e-15));
  CHECK(c.output.prefix == "device_shg");

  const auto s = load_config(config_dir / "sweep_delta_cavity.json");
  REQUIRE(s.device.fit_model);
  // Omitted kappa_e is taken from the fit model's t2_min.
  CHECK(s.device.mode_a.kappa_e == doctest::Approx(s.device.local_model().kappa_ae()).scale(0));
  CHECK(s.task.axes.size() == 1);
  CHECK(s.output.tau_grid->values().size() == 401);
  CHECK(s.output.tau_grid->values().front() == -2e-9);
  CHECK(s.output.tau_grid->values().back() == 2e-9);
}

TEST_CASE("schema is strict") {
  const json good = read_json(config_dir / "device_shg.json");
  CHECK_NOTHROW(parse_config(good));

  auto rejects = [&](const std::function<void(json&)>& edit, const std::string& where) {
    json doc = good;
    edit(doc);
    try {
      parse_config(doc);
      FAIL("accepted: " << where);
    } catch (const ConfigError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(where) != std::string::npos, e.what());
    }
  };
  rejects([](json& d) { d["extra"] = 1; }, "extra");
  rejects([](json& d) { d["device"]["mode_a"]["kapa_i"] = d["device"]["mode_a"]["kappa_i"]; }, "device.mode_a.kapa_i");
  rejects([](json& d) { d["device"]["g"] = 6.5; }, "device.g");
  rejects([](json& d) { d["device"]["g"].erase("unit"); }, "device.g");
  rejects([](json& d) { d["device"]["g"]["unit"] = "Mhz"; }, "device.g");
  rejects([](json& d) { d["device"]["g"]["unit"] = "ns"; }, "device.g");
  rejects([](json& d) { d["device"]["g"]["scale"] = 1; }, "device.g");
  rejects([](json& d) { d["device"].erase("wavelength"); }, "device.wavelength");
  rejects([](json& d) { d["task"]["type"] = "plot"; }, "task.type");
  rejects([](json& d) { d["task"]["model"] = "cavity"; }, "task.model");  // not a key of the shg task
  rejects([](json& d) { d["drive"]["power"]["value"] = -1; }, "drive.power");
  rejects([](json& d) { d["task"] = {{"type", "g2"}}; }, "output.tau_grid");
  rejects([](json& d) { d["output"]["tau_grid"] = {{"start", 0}, {"stop", 1}, {"points", 3}}; }, "output.tau_grid.unit");
}

TEST_CASE("validation diagnostics") {
  // Device parameter fixture: no warnings.
  const auto fixture = validate(read_json(config_dir / "device_shg.json"));
  CHECK(fixture.empty());
  for (const char* name : {"oracle_regression.json", "g2_device.json", "sweep_delta_cavity.json", "spectrum_feedback.json"}) {
    CHECK_MESSAGE(validate(read_json(config_dir / name)).empty(), name);
  }

  json strong = read_json(config_dir / "device_shg.json");
  strong["drive"]["power"] = {{"value", 20.0}, {"unit", "uW"}};
  const auto w = validate(strong);
  CHECK(has_code(w, "weak-drive"));
  CHECK(w.front().severity == Severity::warning);

  json small_v = read_json(config_dir / "spectrum_feedback.json");
  small_v["device"]["feedback"]["V"] = {{"value", 2.0}, {"unit", "GHz"}};
  CHECK(has_code(validate(small_v), "large-splitting"));

  json broken = read_json(config_dir / "device_shg.json");
  broken["device"]["bogus"] = true;
  const auto e = validate(broken);
  REQUIRE(e.size() == 1);
  CHECK(e[0].severity == Severity::error);
}

TEST_CASE("g2 task with g = 0 emits exactly one") {
  const fs::path dir = scratch("coherent");
  json doc = coherent_g2_doc();
  doc["output"]["directory"] = dir.string();
  const auto r = run(parse_config(doc));
  CHECK(r.files.size() == 2);
  const auto rows = csv_rows(dir / "coherent.csv");
  CHECK(rows.size() == 51);
  for (const auto& row : rows) CHECK(row[1] == 1.0);
}

TEST_CASE("output headers and number format") {
  CHECK(dump_json(json(0.1), -1) == "0.10000000000000001");
  CHECK(dump_json(json{{"a", 1}, {"b", std::nan("")}}, -1) == R"({"a":1,"b":null})");

  const fs::path dir = scratch("headers");
  json doc = coherent_g2_doc();
  doc["output"]["directory"] = dir.string();
  run(parse_config(doc));
  std::ifstream in(dir / "coherent.csv");
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  CHECK(l1 == "# chi2transport " + std::string(version()));
  REQUIRE(l2.rfind("# config ", 0) == 0);
  // The embedded configuration is the resolved one and parses back.
  const json embedded = json::parse(l2.substr(9));
  CHECK(embedded["task"]["order"] == "exact");
  CHECK(embedded["drive"]["power"]["unit"] == "W");
  CHECK_NOTHROW(parse_config(embedded));
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  const fs::path log = dir / "log.txt";

  CHECK(chi2sim("--config \"" + (config_dir / "device_shg.json").string() + "\" --validate-only", log) == 0);
  CHECK(slurp(log).find("ok: shg") != std::string::npos);
  CHECK(chi2sim("--config \"" + (config_dir / "device_shg.json").string() + "\" --out \"" + dir.string() + "\"", log) == 0);
  CHECK(fs::exists(dir / "device_shg.json"));
  CHECK(fs::exists(dir / "device_shg.config.json"));

  json bad = read_json(config_dir / "device_shg.json");
  bad["task"]["colour"] = "red";
  write_json(dir / "bad.json", bad);
  CHECK(chi2sim("--config \"" + (dir / "bad.json").string() + "\"", log) == 2);
  CHECK(slurp(log).find("task.colour") != std::string::npos);
  CHECK(chi2sim("--config \"" + (dir / "bad.json").string() + "\" --validate-only", log) == 2);

  write_json(dir / "broken.json", json::parse("[1, 2]"));
  CHECK(chi2sim("--config \"" + (dir / "broken.json").string() + "\"", log) == 2);
  CHECK(chi2sim("--config \"" + (dir / "missing.json").string() + "\"", log) == 2);
  CHECK(chi2sim("--config \"" + (config_dir / "device_shg.json").string() + "\" --threads 0", log) == 2);

  // Numerical failure: a curve whose delay grid does not reach tau = 0.
  {
    CorrelationCurve c;
    for (int i = 0; i < 20; ++i) {
      c.tau.push_back(1e-9 + i * 1e-10);
      c.g2.push_back(1.0);
    }
    std::ofstream f(dir / "offset.csv");
    write_curve(f, c);
  }
  json cls = read_json(config_dir / "device_shg.json");
  cls["task"] = {{"type", "classify"}, {"curve", "offset.csv"}};
  cls["output"]["prefix"] = "classify";
  write_json(dir / "cls_config.json", cls);
  CHECK(chi2sim("--config \"" + (dir / "cls_config.json").string() + "\" --out \"" + dir.string() + "\"", log) == 3);
  CHECK(slurp(log).find("ReferenceOutsideGrid") != std::string::npos);

  // A readable curve through zero classifies fine.
  {
    CorrelationCurve c;
    for (int i = -20; i <= 20; ++i) {
      c.tau.push_back(i * 1e-10);
      c.g2.push_back(1.0 - 0.5 * std::exp(-std::abs(i) / 3.0));
    }
    std::ofstream f(dir / "dip.csv");
    write_curve(f, c);
  }
  cls["task"]["curve"] = "dip.csv";
  write_json(dir / "cls_config.json", cls);
  CHECK(chi2sim("--config \"" + (dir / "cls_config.json").string() + "\" --out \"" + dir.string() + "\"", log) == 0);
  const json report = read_json(dir / "classify.json");
  CHECK(report["antibunching"]["found"] == true);
  CHECK(report["g2_zero"].get<double>() == doctest::Approx(0.5).scale(0));
}

TEST_CASE("resolved config reproduces outputs bit for bit") {
  const fs::path dir = scratch("roundtrip");
  const fs::path log = dir / "log.txt";
  const fs::path out = dir / "out";
  REQUIRE(chi2sim("--config \"" + (config_dir / "g2_device.json").string() + "\" --out \"" + out.string() + "\"", log) == 0);
  const std::string first = slurp(out / "g2_device.csv");
  const std::string resolved = slurp(out / "g2_device.config.json");
  fs::copy_file(out / "g2_device.config.json", dir / "again.json");
  fs::remove_all(out);
  REQUIRE(chi2sim("--config \"" + (dir / "again.json").string() + "\"", log) == 0);
  CHECK(slurp(out / "g2_device.csv") == first);
  CHECK(slurp(out / "g2_device.config.json") == resolved);

  // The curve itself: fit-model g2 mixed with noise, finite and positive.
  const auto rows = csv_rows(out / "g2_device.csv");
  CHECK(rows.size() == 601);
  for (const auto& r : rows) CHECK((std::isfinite(r[1]) && r[1] > 0));
}

TEST_CASE("sweep over detuning and t2_min") {
  const auto cfg = load_config(config_dir / "sweep_delta_cavity.json");
  const fs::path dir = scratch("sweep");
  RunConfig c = with_output_directory(cfg, dir);
  run(c, 2);
  std::vector<std::string> cols;
  const auto m = csv_rows(dir / "sweep_delta_cavity.csv", &cols);
  CHECK(m.size() == 121);
  CHECK(cols.size() == 402);
  CHECK(cols[0] == "delta_cavity_hz");
  const auto s = csv_rows(dir / "sweep_delta_cavity.summary.csv", &cols);
  REQUIRE(s.size() == 121);
  // Along Delta the rows alternate between antibunched and bunched regions.
  int changes = 0, bunched = 0, antibunched = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    bunched += s[i][2] > 1;
    antibunched += s[i][5] == 1.0;
    if (i > 0 && s[i][5] != s[i - 1][5]) ++changes;
  }
  MESSAGE("bunched " << bunched << ", antibunched " << antibunched << ", changes " << changes);
  CHECK(bunched > 0);
  CHECK(antibunched > 0);
  CHECK(changes >= 2);

  // Two axes; the result does not depend on the worker count.
  json doc = cfg.resolved;
  doc["task"]["axes"] = json::array({{{"parameter", "delta"}, {"start", -3}, {"stop", 3}, {"points", 7}, {"unit", "MHz"}},
                                     {{"parameter", "t2_min"}, {"start", 1e-7}, {"stop", 1e-5}, {"points", 5},
                                      {"unit", "1"}, {"spacing", "log"}}});
  doc["output"]["tau_grid"]["points"] = 41;
  doc["output"]["directory"] = (dir / "one").string();
  run(parse_config(doc), 1);
  doc["output"]["directory"] = (dir / "three").string();
  run(parse_config(doc), 3);
  CHECK(slurp(dir / "one" / "sweep_delta_cavity.csv").size() > 0);
  CHECK(csv_rows(dir / "three" / "sweep_delta_cavity.csv").size() == 35);
  CHECK(csv_rows(dir / "one" / "sweep_delta_cavity.csv") == csv_rows(dir / "three" / "sweep_delta_cavity.csv"));
}

TEST_CASE("oracle task at the stored regression point") {
  const fs::path dir = scratch("oracle");
  const auto r = run(with_output_directory(load_config(config_dir / "oracle_regression.json"), dir));
  CHECK(r.summary.at(0).rfind("PASS", 0) == 0);
  const json rep = read_json(dir / "oracle_regression.json");
  CHECK(rep["pass"] == true);
  CHECK(rep["max_relative_error"].get<double>() <= 0.05);
  CHECK(rep["n_a"].get<double>() == doctest::Approx(1e-3).scale(0).epsilon(0.05));
  CHECK(rep["weak_drive_valid"] == true);
  const auto rows = csv_rows(dir / "oracle_regression.csv");
  CHECK(rows.size() == 51);
  CHECK(rows[0][2] < 0.4);  // antibunched point, not trivially near one

  // A tolerance below the truncation error fails the comparison and says so.
  json doc = read_json(config_dir / "oracle_regression.json");
  doc["task"]["tolerance"] = {{"value", 1e-6}, {"unit", "1"}};
  doc["output"]["directory"] = dir.string();
  doc["output"]["prefix"] = "strong";
  const auto strong = run(parse_config(doc));
  CHECK(read_json(dir / "strong.json")["pass"] == false);
  CHECK(strong.summary.at(0).rfind("FAIL", 0) == 0);
}

TEST_CASE("shg report matches the library") {
  const fs::path dir = scratch("shg");
  const auto c = with_output_directory(load_config(config_dir / "device_shg.json"), dir);
  run(c);
  const json rep = read_json(dir / "device_shg.json");
  const auto cav = c.device.cavity();
  const DriveSpec drive{56.3e-9, c.device.carrier(), 0.0, 0.0};
  CHECK(rep["efficiency_per_W"].get<double>() == doctest::Approx(shg_efficiency(cav, drive)).scale(0).epsilon(1e-15));
  CHECK(rep["n_out"].get<double>() == doctest::Approx(photon_numbers(cav, drive, 2.9e-6).n_out).scale(0).epsilon(1e-15));
  CHECK(rep["weak_drive"]["satisfied"] == true);
  CHECK(rep["version"] == std::string(version()));
  CHECK(rep["config"] == c.resolved);
}

TEST_CASE("spectrum of the feedback circuit") {
  const fs::path dir = scratch("spectrum");
  run(with_output_directory(load_config(config_dir / "spectrum_feedback.json"), dir));
  std::vector<std::string> cols;
  const auto rows = csv_rows(dir / "spectrum_feedback.csv", &cols);
  CHECK(rows.size() == 1201);
  CHECK(cols.size() == 8);
  double lo = 1e9;
  for (const auto& r : rows) {
    CHECK(r[3] <= 1 + 1e-12);  // passive device
    lo = std::min(lo, r[3]);
  }
  CHECK(lo < 0.5);  // a resonance sits inside the window
}

TEST_CASE("fit task recovers synthetic parameters") {
  auto truth = chi2::testing::device_truth();
  truth.noise.u_over_t = 0.0;
  truth.delta.resize(2);
  truth.t2.resize(2);
  truth.kappa_ae.resize(2);
  const FitProblem p = chi2::testing::synthetic_problem(truth, 0.0, 4);
  const fs::path dir = scratch("fit");
  json datasets = json::array();
  for (std::size_t i = 0; i < p.datasets.size(); ++i) {
    const std::string name = "curve" + std::to_string(i) + ".csv";
    std::ofstream f(dir / name);
    write_curve(f, p.datasets[i].curve);
    datasets.push_back({{"curve", name},
                        {"t2_level", {{"value", *p.datasets[i].t2_level}, {"unit", "1"}}},
                        {"t2_sigma", {{"value", p.datasets[i].t2_sigma}, {"unit", "1"}}}});
  }
  json doc = read_json(config_dir / "g2_device.json");
  doc["device"]["mode_a"]["kappa_i"] = {{"value", 1.2}, {"unit", "GHz"}};
  doc["device"].erase("fit_model");
  doc["device"]["mode_a"]["kappa_e"] = {{"value", 0.6}, {"unit", "GHz"}};
  doc["task"] = {{"type", "fit"}, {"datasets", datasets}, {"noise_tail", false}, {"starts", 4}, {"seed", 5}};
  doc["output"] = {{"prefix", "fit"}};
  write_json(dir / "fit_config.json", doc);

  const fs::path log = dir / "log.txt";
  REQUIRE(chi2sim("--config \"" + (dir / "fit_config.json").string() + "\" --out \"" + dir.string() +
                      "\" --threads 2 --seed 7",
                  log) == 0);
  const json rep = read_json(dir / "fit.json");
  CHECK(rep["config"]["task"]["seed"] == 7);
  CHECK(rep["kappa_ai_rad_s"].get<double>() == doctest::Approx(truth.kappa_ai).scale(0).epsilon(1e-6));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(rep["datasets"][i]["delta_rad_s"].get<double>() == doctest::Approx(truth.delta[i]).scale(0).epsilon(1e-5));
  }
  const auto rows = csv_rows(dir / "fit.csv");
  CHECK(rows.size() == 2 * 201);
  for (const auto& r : rows) CHECK(r[4] == doctest::Approx(r[2]).scale(0).epsilon(1e-8));
}
