// qdos: run, validate and inspect config-driven experiments.
//
// Exit status: 0 when every criterion passes, 1 when a criterion fails or
// the run stops on a module error, 2 when the config or run directory is
// invalid.

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "qdos/errors.hpp"
#include "qdos/experiments.hpp"

namespace ex = qdos::experiments;

namespace {

constexpr int kPass = 0;
constexpr int kCriterionFailure = 1;
constexpr int kInvalid = 2;

void print_report(const ex::RunReport& report, std::ostream& out) {
  out << report.name << " (" << report.experiment << ", qdos " << report.version << ")\n";
  for (const auto& c : report.criteria)
    out << "  [" << (c.passed ? "PASS" : "FAIL") << "] " << c.name << ": " << c.detail << '\n';
  for (const auto& [name, value] : report.metrics) out << "  " << name << " = " << ex::format_number(value) << '\n';
  if (report.failure) out << "  run stopped: " << *report.failure << '\n';
  out << (report.passed() ? "PASS" : "FAIL") << '\n';
}

// Loads and validates; prints findings and returns false when the config
// cannot run.
bool load(const std::string& path, nlohmann::json& doc) {
  try {
    doc = ex::load_document(path);
  } catch (const qdos::Error& e) {
    std::cerr << e.what() << '\n';
    return false;
  }
  const auto findings = ex::validate(doc);
  for (const auto& f : findings) std::cerr << path << ": " << (f.field.empty() ? "" : f.field + ": ") << f.message << '\n';
  return findings.empty();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum density-of-states experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ex::software_version());

  std::string config_path, run_dir;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  auto* validate = app.add_subcommand("validate", "Check a config file without running it");
  validate->add_option("config", config_path, "Experiment config (JSON)")->required();
  auto* report = app.add_subcommand("report", "Summarize the report of a finished run");
  report->add_option("run-dir", run_dir, "Run directory holding report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kInvalid;
  }

  if (*validate) {
    nlohmann::json doc;
    if (!load(config_path, doc)) return kInvalid;
    std::cout << config_path << ": ok\n";
    return kPass;
  }

  if (*run) {
    nlohmann::json doc;
    if (!load(config_path, doc)) return kInvalid;
    const ex::ExperimentConfig config = ex::parse_config(doc);
    const ex::RunReport result = ex::run(config);
    print_report(result, std::cout);
    std::cout << "report: " << (ex::run_directory(config) / "report.json").string() << '\n';
    return result.passed() ? kPass : kCriterionFailure;
  }

  try {
    const ex::RunReport result = ex::read_report(run_dir);
    print_report(result, std::cout);
    return result.passed() ? kPass : kCriterionFailure;
  } catch (const qdos::Error& e) {
    std::cerr << e.what() << '\n';
    return kInvalid;
  }
}
