#pragma once

#include <chi2/core_model.hpp>
#include <chi2/feedback_circuit.hpp>
#include <chi2/fitting.hpp>
#include <chi2/fock_oracle.hpp>
#include <chi2/scattering.hpp>
#include <chi2/shg.hpp>

#include <json.hpp>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chi2 {

// Run configuration. Every physical quantity is written as
// {"value": x, "unit": "..."}; frequencies in Hz-style units are cyclic and
// converted with 2 pi, "rad/s" is taken as is. Rates may also use the unit
// "Q", read as omega / Q at the mode's optical carrier.
//
// Frequencies of modes and drive are offsets in the frame rotating at the
// carrier omega_0 = 2 pi c / wavelength (mode b and the SH drive at 2 omega_0).

struct GridSpec {
  double start = 0.0;  // SI (s or rad/s) after unit conversion
  double stop = 0.0;
  int points = 0;
  bool log_spacing = false;
  std::vector<double> values() const;
};

struct ModeSpec {
  double detuning = 0.0;  // rad/s, relative to the mode's carrier
  double kappa_i = 0.0;
  double kappa_e = 0.0;
};

struct FeedbackSpec {
  double V = 0.0;
  double r = 0.0;
  double t = 0.0;
  double phi = 0.0;
  FiberCoupler coupler{};
};

// Split-resonance fit model around a transmission minimum at zero offset.
// kappa_ai comes from mode a; kappa_ae is solved from t2_min.
struct FitModelSpec {
  std::complex<double> r_bg = 1.0;
  double delta_cavity = 0.0;  // Delta = omega_a - omega_min
  double t2_min = 0.0;
  CouplingBranch branch = CouplingBranch::under;
};

struct DeviceSpec {
  double wavelength = 0.0;  // m
  ModeSpec mode_a, mode_b;
  double g = 0.0;
  std::optional<FeedbackSpec> feedback;
  std::optional<FitModelSpec> fit_model;

  double carrier() const;  // omega_0, rad/s
  NonlinearCavity cavity() const;
  FeedbackCircuit circuit() const;      // requires feedback
  LocalMinimumModel local_model() const;  // requires fit_model
};

struct DriveSettings {
  double power = 0.0;     // W
  double detuning = 0.0;  // rad/s; omega - omega_0, or delta = omega - omega_min for the fit model
};

enum class TaskKind { spectrum, g2, sweep, shg, fit, oracle, classify };
enum class ModelKind { cavity, fit_model, two_mode, hybridized };
enum class SweepParameter { delta, delta_cavity, t2_min };

std::string_view to_string(TaskKind kind);

struct SweepAxis {
  SweepParameter parameter = SweepParameter::delta;
  GridSpec grid;
};

struct FitDatasetSpec {
  std::filesystem::path curve;  // absolute after loading
  std::optional<double> t2_level;
  double t2_sigma = 0.0;
  std::optional<double> delta_guess;
};

struct TaskSpec {
  TaskKind kind = TaskKind::g2;
  ModelKind model = ModelKind::cavity;
  ModeChoice mode = ModeChoice::odd;
  KernelOrder order = KernelOrder::leading;

  // g2: optional mechanical noise mixing (u given relative to |t|)
  std::optional<NoiseMixParams> noise;  // u holds u/|t|
  std::vector<SweepAxis> axes;          // sweep
  std::optional<double> t2;             // shg: |t|^2 for the output photon number

  // fit
  std::vector<FitDatasetSpec> datasets;
  bool fit_noise_tail = true;
  std::optional<double> tau_ref;  // fit, classify: normalize curves at this delay
  FitCoordinates coordinates = FitCoordinates::log_rates;
  bool fit_r = false;
  int starts = 8;
  std::uint64_t seed = 1;

  // oracle
  int n_a_max = 6;
  int n_b_max = 3;
  OracleFrame frame = OracleFrame::displaced;
  std::optional<double> mean_photons;  // overrides the drive power
  double tolerance = 0.05;

  // classify
  std::filesystem::path curve;
};

struct OutputSpec {
  std::filesystem::path directory = ".";
  std::string prefix;  // defaults to the task name
  std::optional<GridSpec> tau_grid;
  std::optional<GridSpec> frequency_grid;
};

struct RunConfig {
  DeviceSpec device;
  DriveSettings drive;
  TaskSpec task;
  OutputSpec output;
  // Input with every default filled in and relative paths made absolute;
  // running it again reproduces the same outputs.
  nlohmann::json resolved;
};

/// Parses and checks the schema. Throws ConfigError naming the offending key.
/// Relative file paths are taken relative to `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// Re-reads the resolved document after a command-line override (seed, output directory).
RunConfig with_seed(const RunConfig& config, std::uint64_t seed);
RunConfig with_output_directory(const RunConfig& config, const std::filesystem::path& dir);

enum class Severity { warning, error };

struct Diagnostic {
  Severity severity;
  std::string code;
  std::string message;
};

/// Physics checks on a parsed configuration.
std::vector<Diagnostic> validate(const RunConfig& config);
/// Schema and physics checks on a raw document; never throws.
std::vector<Diagnostic> validate(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");

}  // namespace chi2
