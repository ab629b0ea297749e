#pragma once

// Named, config-driven experiments that tie the modules together and leave
// CSV and JSON artifacts in a run directory.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qdos/grid_wave.hpp"
#include "qdos/qwalk.hpp"

namespace qdos::experiments {

inline constexpr int kSchemaVersion = 1;

/// Environment variable that replaces the default output root "runs".
inline constexpr const char* kOutputRootVariable = "QDOS_OUTPUT_ROOT";

enum class ExperimentKind {
  QeStationarity,
  QeRelaxation,
  ZeroNoiseBohm,
  NodalCrossing,
  ConditionalDensity,
  TypicalityHistograms,
  MaxentSuite
};

ExperimentKind parse_experiment_kind(std::string_view name);
std::string to_string(ExperimentKind kind);
std::vector<std::string> experiment_names();

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  ExperimentKind experiment = ExperimentKind::QeStationarity;
  std::string name;
  double length = 1.0;
  long points = 512;
  Units units;
  StateSpec state;
  PotentialSpec potential;
  qwalk::TransitionKernel kernel;
  long walkers = 1000;
  std::uint64_t seed = 0;
  double T = 1.0;
  double dt = 1e-4;
  std::vector<double> sample_times;  // empty: start and end
  int bins = 64;
  std::string output_dir;
  /// Experiment-specific settings, see the README for each experiment.
  nlohmann::json parameters = nlohmann::json::object();
  /// The document the config was read from.
  nlohmann::json source = nlohmann::json::object();
};

struct Finding {
  std::string field;
  std::string message;
};

/// Every problem that would stop the document from running. Empty iff
/// parse_config succeeds and the experiment can start.
std::vector<Finding> validate(const nlohmann::json& document);

/// Throws InvalidArgument naming the first finding.
ExperimentConfig parse_config(const nlohmann::json& document);
nlohmann::json load_document(const std::filesystem::path& path);

struct Criterion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunReport {
  std::string experiment;
  std::string name;
  std::vector<Criterion> criteria;
  std::map<std::string, double> metrics;
  std::vector<std::string> artifacts;  // relative to the run directory
  std::string version;
  nlohmann::json config;
  std::optional<std::string> failure;  // error that stopped the run

  bool passed() const;
  nlohmann::json to_json() const;
  static RunReport from_json(const nlohmann::json& j);
};

std::string software_version();

/// Output root: the environment override if set, otherwise "runs".
std::filesystem::path output_root();
std::filesystem::path run_directory(const ExperimentConfig& config);

/// Runs the experiment, writes its CSVs and report.json into
/// run_directory(config) and returns the report. Module errors are caught
/// and recorded in the report, which is written in every case.
RunReport run(const ExperimentConfig& config);

/// Reads report.json from a run directory.
RunReport read_report(const std::filesystem::path& run_dir);

/// Shortest round-trip decimal form, independent of the C++ locale.
std::string format_number(double value);

}  // namespace qdos::experiments
