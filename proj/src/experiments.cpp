#include "qdos/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "qdos/bohm.hpp"
#include "qdos/entropy_stats.hpp"
#include "qdos/errors.hpp"
#include "qdos/nelson.hpp"
#include "qdos/qmap.hpp"

#ifndef QDOS_VERSION
#define QDOS_VERSION "0.0.0"
#endif

namespace qdos::experiments {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct NamedKind {
  ExperimentKind kind;
  const char* name;
};

constexpr NamedKind kExperiments[] = {
    {ExperimentKind::QeStationarity, "qe-stationarity"},
    {ExperimentKind::QeRelaxation, "qe-relaxation"},
    {ExperimentKind::ZeroNoiseBohm, "zero-noise-bohm"},
    {ExperimentKind::NodalCrossing, "nodal-crossing"},
    {ExperimentKind::ConditionalDensity, "conditional-density"},
    {ExperimentKind::TypicalityHistograms, "typicality-histograms"},
    {ExperimentKind::MaxentSuite, "maxent-suite"},
};

const std::set<std::string> kTopLevelKeys = {"schema_version", "experiment", "name",   "grid",
                                             "units",          "state",      "potential", "kernel",
                                             "walkers",        "seed",       "times",  "histogram_bins",
                                             "output_dir",     "parameters"};

// ---------------------------------------------------------------------------
// Config reading. Each reader records findings instead of throwing so that
// validate() can report every problem at once.

class Reader {
 public:
  explicit Reader(std::vector<Finding>& findings) : findings_(findings) {}

  void fail(std::string field, std::string message) { findings_.push_back({std::move(field), std::move(message)}); }

  template <class T>
  T get(const json& obj, const char* key, T fallback, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      fail(path, "wrong type");
      return fallback;
    }
  }

  double number(const json& obj, const char* key, double fallback, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) {
      fail(path, "must be a number");
      return fallback;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "must be finite");
    return d;
  }

  long integer(const json& obj, const char* key, long fallback, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      fail(path, "must be an integer");
      return fallback;
    }
    return v.get<long>();
  }

  std::vector<double> numbers(const json& obj, const char* key, const std::string& path) {
    std::vector<double> out;
    if (!obj.is_object() || !obj.contains(key)) return out;
    const json& v = obj.at(key);
    if (!v.is_array()) {
      fail(path, "must be an array of numbers");
      return out;
    }
    for (const json& e : v) {
      if (!e.is_number()) {
        fail(path, "must be an array of numbers");
        return {};
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

 private:
  std::vector<Finding>& findings_;
};

bool is_multiple(double T, double dt) {
  const double r = T / dt;
  return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

std::vector<Mode> read_modes(Reader& r, const json& state) {
  std::vector<Mode> modes;
  if (!state.contains("modes")) return modes;
  const json& list = state.at("modes");
  if (!list.is_array()) {
    r.fail("state.modes", "must be an array");
    return modes;
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "state.modes[" + std::to_string(i) + "]";
    const json& m = list[i];
    if (!m.is_object() || !m.contains("n")) {
      r.fail(path, "needs an integer index n");
      continue;
    }
    modes.push_back({static_cast<int>(r.integer(m, "n", 0, path + ".n")),
                     {r.number(m, "re", 0.0, path + ".re"), r.number(m, "im", 0.0, path + ".im")}});
  }
  return modes;
}

ExperimentConfig read_config(const json& doc, std::vector<Finding>& findings) {
  Reader r(findings);
  ExperimentConfig c;
  if (!doc.is_object()) {
    r.fail("", "config must be a JSON object");
    return c;
  }
  c.source = doc;
  for (const auto& [key, value] : doc.items())
    if (!kTopLevelKeys.contains(key)) r.fail(key, "unknown field");

  if (!doc.contains("schema_version")) {
    r.fail("schema_version", "schema_version required");
  } else {
    c.schema_version = static_cast<int>(r.integer(doc, "schema_version", 0, "schema_version"));
    if (c.schema_version != kSchemaVersion)
      r.fail("schema_version", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  }

  bool have_kind = false;
  if (!doc.contains("experiment")) {
    r.fail("experiment", "experiment required");
  } else {
    const std::string name = r.get<std::string>(doc, "experiment", "", "experiment");
    try {
      c.experiment = parse_experiment_kind(name);
      have_kind = true;
    } catch (const InvalidArgument& e) {
      r.fail("experiment", e.what());
    }
  }
  c.name = r.get<std::string>(doc, "name", have_kind ? to_string(c.experiment) : "experiment", "name");

  if (!doc.contains("seed")) {
    r.fail("seed", "seed required");
  } else if (!doc.at("seed").is_number_integer() || doc.at("seed").get<long long>() < 0) {
    r.fail("seed", "seed must be a non-negative integer");
  } else {
    c.seed = doc.at("seed").get<std::uint64_t>();
  }

  const json grid = doc.value("grid", json::object());
  c.length = r.number(grid, "length", 1.0, "grid.length");
  c.points = r.integer(grid, "points", 512, "grid.points");
  const bool grid_ok = c.length > 0.0 && c.points >= 4 && (c.points & (c.points - 1)) == 0;
  if (!(c.length > 0.0)) r.fail("grid.length", "must be positive");
  if (!(c.points >= 4 && (c.points & (c.points - 1)) == 0)) r.fail("grid.points", "must be a power of two >= 4");

  const json units = doc.value("units", json::object());
  c.units.hbar = r.number(units, "hbar", 1.0, "units.hbar");
  c.units.mass = r.number(units, "mass", 1.0, "units.mass");
  const bool units_ok = c.units.hbar > 0.0 && c.units.mass > 0.0;
  if (!units_ok) r.fail("units", "hbar and mass must be positive");

  const json state = doc.value("state", json::object());
  bool state_ok = true;
  try {
    c.state.kind = parse_state_kind(r.get<std::string>(state, "kind", "uniform", "state.kind"));
  } catch (const InvalidArgument& e) {
    r.fail("state.kind", e.what());
    state_ok = false;
  }
  c.state.mode = static_cast<int>(r.integer(state, "mode", 1, "state.mode"));
  c.state.modes = read_modes(r, state);
  c.state.center = r.number(state, "center", 0.5, "state.center");
  c.state.width = r.number(state, "width", 0.05, "state.width");
  c.state.momentum_mode = static_cast<int>(r.integer(state, "momentum_mode", 0, "state.momentum_mode"));
  c.state.contrast = r.number(state, "contrast", 0.5, "state.contrast");

  const json potential = doc.value("potential", json::object());
  bool potential_ok = true;
  try {
    c.potential.kind = parse_potential_kind(r.get<std::string>(potential, "kind", "zero", "potential.kind"));
  } catch (const InvalidArgument& e) {
    r.fail("potential.kind", e.what());
    potential_ok = false;
  }
  c.potential.strength = r.number(potential, "strength", 0.0, "potential.strength");
  c.potential.mode = static_cast<int>(r.integer(potential, "mode", 1, "potential.mode"));

  if (grid_ok && units_ok && state_ok) {
    try {
      const Wavefunction psi = make_state(c.state, Grid1D(c.length, c.points), c.units);
      if (potential_ok) {
        try {
          make_potential(c.potential, psi);
        } catch (const Error& e) {
          r.fail("potential", e.what());
        }
      }
    } catch (const Error& e) {
      r.fail("state", e.what());
    }
  }

  const json kernel = doc.value("kernel", json::object());
  const bool kernel_given = doc.contains("kernel") && kernel.contains("kind");
  if (have_kind && c.experiment == ExperimentKind::ZeroNoiseBohm && !kernel_given)
    c.kernel.kind = qwalk::KernelKind::Zero;
  try {
    if (kernel_given) c.kernel.kind = qwalk::parse_kernel_kind(r.get<std::string>(kernel, "kind", "", "kernel.kind"));
  } catch (const InvalidArgument& e) {
    r.fail("kernel.kind", e.what());
  }
  c.kernel.alpha = r.number(kernel, "alpha", 0.5, "kernel.alpha");
  c.kernel.power = r.number(kernel, "power", 1.0, "kernel.power");
  c.kernel.speed = r.number(kernel, "speed", 1.0, "kernel.speed");
  if (!(c.kernel.alpha > 0.0)) r.fail("kernel.alpha", "must be positive");
  if (!(c.kernel.speed >= 0.0)) r.fail("kernel.speed", "must be non-negative");

  c.walkers = r.integer(doc, "walkers", 1000, "walkers");
  if (c.walkers < 1) r.fail("walkers", "must be at least 1");

  const json times = doc.value("times", json::object());
  c.T = r.number(times, "T", 1.0, "times.T");
  c.dt = r.number(times, "dt", 1e-4, "times.dt");
  c.sample_times = r.numbers(times, "sample_times", "times.sample_times");
  const bool dt_ok = c.dt > 0.0;
  if (!dt_ok) r.fail("times.dt", "dt must be positive");
  if (!(c.T > 0.0)) r.fail("times.T", "T must be positive");
  if (dt_ok && c.T > 0.0) {
    if (!is_multiple(c.T, c.dt)) r.fail("times.T", "T must be a whole number of steps dt");
    for (double t : c.sample_times) {
      if (t < 0.0 || t > c.T * (1.0 + 1e-12) || !is_multiple(t, c.dt)) {
        r.fail("times.sample_times", "sample times must be whole steps within [0, T]");
        break;
      }
    }
  }
  std::sort(c.sample_times.begin(), c.sample_times.end());

  c.bins = static_cast<int>(r.integer(doc, "histogram_bins", 64, "histogram_bins"));
  if (c.bins < 2) r.fail("histogram_bins", "must be at least 2");

  c.output_dir = r.get<std::string>(doc, "output_dir", c.name, "output_dir");
  const fs::path out(c.output_dir);
  if (c.output_dir.empty() || out.is_absolute() ||
      std::any_of(out.begin(), out.end(), [](const fs::path& part) { return part == ".."; }))
    r.fail("output_dir", "must be a relative path inside the output root");

  if (doc.contains("parameters")) {
    if (!doc.at("parameters").is_object())
      r.fail("parameters", "must be an object");
    else
      c.parameters = doc.at("parameters");
  }

  if (!have_kind) return c;
  const json& p = c.parameters;
  switch (c.experiment) {
    case ExperimentKind::ConditionalDensity: {
      if (c.kernel.kind == qwalk::KernelKind::Zero) r.fail("kernel.kind", "degenerate kernel density");
      const double x1 = r.number(p, "x1", 0.5 * c.length, "parameters.x1");
      if (x1 < 0.0 || x1 >= c.length) r.fail("parameters.x1", "must lie in [0, L)");
      break;
    }
    case ExperimentKind::ZeroNoiseBohm:
      if (c.kernel.kind != qwalk::KernelKind::Zero) r.fail("kernel.kind", "zero-noise-bohm needs the zero kernel");
      for (double x : r.numbers(p, "x0", "parameters.x0"))
        if (x < 0.0 || x >= c.length) r.fail("parameters.x0", "start positions must lie in [0, L)");
      break;
    case ExperimentKind::NodalCrossing: {
      const std::vector<double> nodes = r.numbers(p, "nodes", "parameters.nodes");
      if (nodes.empty()) r.fail("parameters.nodes", "nodal-crossing needs the node positions");
      for (double x : nodes)
        if (x < 0.0 || x >= c.length) r.fail("parameters.nodes", "nodes must lie in [0, L)");
      const double interval = r.number(p, "sample_interval", c.dt, "parameters.sample_interval");
      if (!(interval > 0.0) || (dt_ok && !is_multiple(interval, c.dt)))
        r.fail("parameters.sample_interval", "must be a positive multiple of dt");
      for (double f : r.numbers(p, "refinements", "parameters.refinements"))
        if (!(f > 1.0) || std::round(f) != f) r.fail("parameters.refinements", "factors must be integers > 1");
      break;
    }
    case ExperimentKind::QeRelaxation: {
      const long cells = r.integer(p, "cells", 16, "parameters.cells");
      if (cells < 2) r.fail("parameters.cells", "must be at least 2");
      break;
    }
    case ExperimentKind::TypicalityHistograms:
      if (p.contains("intervals")) {
        const json& list = p.at("intervals");
        bool ok = list.is_array();
        if (ok)
          for (const json& e : list) ok = ok && e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number();
        if (!ok) r.fail("parameters.intervals", "must be an array of [a, b] pairs");
      }
      for (double m : r.numbers(p, "volume_law_sizes", "parameters.volume_law_sizes"))
        if (!(m >= 2.0) || std::round(m) != m || static_cast<long>(m) % 2 != 0)
          r.fail("parameters.volume_law_sizes", "sizes must be even integers >= 2");
      break;
    case ExperimentKind::MaxentSuite: {
      const double mean = r.number(p, "mean", 0.6, "parameters.mean");
      if (!(mean > 0.0 && mean < 1.0)) r.fail("parameters.mean", "must lie strictly inside (0, 1)");
      break;
    }
    case ExperimentKind::QeStationarity:
      break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Artifacts.

class Csv {
 public:
  Csv(const fs::path& path, std::initializer_list<const char*> header) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    bool first = true;
    for (const char* h : header) {
      if (!first) out_ << ',';
      out_ << h;
      first = false;
    }
    out_ << '\n';
  }

  Csv& field(double v) { return put(format_number(v)); }
  Csv& field(long v) { return put(std::to_string(v)); }
  Csv& field(const std::string& s) { return put(s); }
  void end() {
    out_ << '\n';
    first_ = true;
  }

 private:
  Csv& put(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }

  std::ofstream out_;
  bool first_ = true;
};

class Run {
 public:
  Run(const ExperimentConfig& config, RunReport& report, fs::path dir)
      : config(config), report(report), dir(std::move(dir)), grid(config.length, config.points) {}

  Csv csv(const std::string& file, std::initializer_list<const char*> header) {
    report.artifacts.push_back(file);
    return Csv(dir / file, header);
  }

  void metric(const std::string& name, double value) { report.metrics[name] = value; }

  void criterion(const std::string& name, bool passed, const std::string& detail) {
    report.criteria.push_back({name, passed, detail});
  }

  Wavefunction initial_state() const { return make_state(config.state, grid, config.units); }

  template <class T>
  T param(const char* key, T fallback) const {
    return config.parameters.contains(key) ? config.parameters.at(key).get<T>() : fallback;
  }

  std::vector<double> sample_times() const {
    if (!config.sample_times.empty()) return config.sample_times;
    return {0.0, config.T};
  }

  const ExperimentConfig& config;
  RunReport& report;
  fs::path dir;
  Grid1D grid;
};

std::string describe(double value, const char* op, double bound) {
  return format_number(value) + " " + op + " " + format_number(bound);
}

void write_fields(Run& run, const Wavefunction& psi, const QMap& map, const std::string& suffix) {
  const Eigen::VectorXd rho = density(psi), F = flux(psi);
  Csv fields = run.csv("fields" + suffix + ".csv", {"x", "rho", "F"});
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    fields.field(psi.grid.x(i)).field(rho[i]).field(F[i]).end();
  }
  Csv qmap = run.csv("qmap" + suffix + ".csv", {"x", "Q", "omega"});
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    qmap.field(psi.grid.x(i)).field(map.forward(psi.grid.x(i))).field(map.omega()[i]).end();
  }
}

Eigen::VectorXd positions(std::span<const qwalk::WalkerState> ws) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(ws.size()));
  for (std::size_t i = 0; i < ws.size(); ++i) x[static_cast<Eigen::Index>(i)] = ws[i].x;
  return x;
}

// Shared body of the two ensemble experiments: runs the walkers, records a
// trajectory sample and the coarse and fine relative entropies at each
// sample time.
struct EntropySeries {
  std::vector<double> times;
  std::vector<double> coarse;  // KL on `cells` bins
  std::vector<double> fine;    // KL on histogram_bins
};

EntropySeries run_walkers(Run& run, std::vector<qwalk::WalkerState> walkers, int cells) {
  const ExperimentConfig& c = run.config;
  const Wavefunction psi0 = run.initial_state();
  const Potential pot = make_potential(c.potential, psi0);
  const long keep = std::min<long>(run.param<long>("trajectory_walkers", 100), static_cast<long>(walkers.size()));
  const std::vector<double> times = run.sample_times();

  EntropySeries series;
  Csv traj = run.csv("trajectories.csv", {"t", "walker_id", "x", "q"});
  Csv entropy = run.csv("entropy_series.csv", {"t", "H_coarse", "S_relative"});
  std::optional<Wavefunction> last_psi;
  std::optional<QMap> last_map;
  qwalk::run_ensemble(walkers, c.kernel, psi0, pot, c.T, c.dt, times,
                      [&](const Evolution& evo, const QMap& map, std::span<const qwalk::WalkerState> ws) {
                        const double t = evo.time();
                        for (long i = 0; i < keep; ++i) {
                          const auto& w = ws[static_cast<std::size_t>(i)];
                          traj.field(t).field(w.id).field(w.x).field(w.q).end();
                        }
                        const Eigen::VectorXd x = positions(ws);
                        const double coarse = entropy::histogram_kl(entropy::Histogram::of(x, cells, c.length),
                                                                    entropy::bin_probabilities(evo.psi(), cells));
                        const double fine = entropy::histogram_kl(entropy::Histogram::of(x, c.bins, c.length),
                                                                  entropy::bin_probabilities(evo.psi(), c.bins));
                        entropy.field(t).field(coarse).field(-fine).end();
                        series.times.push_back(t);
                        series.coarse.push_back(coarse);
                        series.fine.push_back(fine);
                        last_psi = evo.psi();
                        last_map = map;
                      });
  if (last_psi) write_fields(run, *last_psi, *last_map, "");
  return series;
}

// ---------------------------------------------------------------------------
// Experiments.

void qe_stationarity(Run& run) {
  const ExperimentConfig& c = run.config;
  const Wavefunction psi0 = run.initial_state();
  auto walkers = qwalk::equilibrium_walkers(build_qmap(psi0), static_cast<std::size_t>(c.walkers), c.kernel, c.seed,
                                            c.units);
  const EntropySeries s = run_walkers(run, std::move(walkers), c.bins);
  const double factor = run.param<double>("safety_factor", 3.0);
  const double floor = factor * (c.bins - 1) / (2.0 * static_cast<double>(c.walkers));
  run.metric("kl_initial", s.fine.front());
  run.metric("kl", s.fine.back());
  run.metric("kl_max", *std::max_element(s.fine.begin(), s.fine.end()));
  run.metric("kl_floor", floor);
  run.criterion("kl_below_floor", s.fine.back() < floor, "KL(T) " + describe(s.fine.back(), "<", floor));
}

void qe_relaxation(Run& run) {
  const ExperimentConfig& c = run.config;
  const int cells = static_cast<int>(run.param<long>("cells", 16));
  const double reduction = run.param<double>("reduction", 0.2);
  const Wavefunction psi0 = run.initial_state();
  std::vector<double> x0(static_cast<std::size_t>(c.walkers));
  for (std::size_t i = 0; i < x0.size(); ++i) {
    WalkerRandom rng(c.seed ^ 0x5eedULL, i);
    x0[i] = c.length * rng.uniform();
  }
  auto walkers = qwalk::walkers_at(build_qmap(psi0), x0, c.kernel, c.seed, c.units);
  ExperimentConfig with_midpoint = c;
  if (with_midpoint.sample_times.empty()) {
    const long half = bohm::step_count(c.T, c.dt) / 2;
    with_midpoint.sample_times = {0.0, static_cast<double>(half) * c.dt, c.T};
  }
  Run inner(with_midpoint, run.report, run.dir);
  const EntropySeries s = run_walkers(inner, std::move(walkers), cells);

  const double noise = 3.0 * (cells - 1) / (2.0 * static_cast<double>(c.walkers));
  bool monotone = true;
  for (std::size_t k = 1; k < s.coarse.size(); ++k) monotone = monotone && s.coarse[k] <= s.coarse[k - 1] + noise;
  run.metric("H_initial", s.coarse.front());
  run.metric("H_final", s.coarse.back());
  run.metric("H_ratio", s.coarse.back() / s.coarse.front());
  run.metric("monte_carlo_tolerance", noise);
  run.criterion("H_reduced", s.coarse.back() < reduction * s.coarse.front(),
                "H(T) " + describe(s.coarse.back(), "<", reduction * s.coarse.front()));
  run.criterion("H_non_increasing", monotone,
                std::to_string(s.coarse.size()) + " samples, tolerance " + format_number(noise));
}

void zero_noise_bohm(Run& run) {
  const ExperimentConfig& c = run.config;
  const Wavefunction psi0 = run.initial_state();
  const Potential pot = make_potential(c.potential, psi0);
  std::vector<double> x0 = run.param<std::vector<double>>("x0", {});
  if (x0.empty())
    for (long i = 0; i < c.walkers; ++i) x0.push_back((static_cast<double>(i) + 0.5) * c.length / static_cast<double>(c.walkers));
  const double tolerance = run.param<double>("tolerance", 1e-3);

  const long steps = bohm::step_count(c.T, c.dt);
  std::vector<double> every(static_cast<std::size_t>(steps + 1));
  for (long s = 0; s <= steps; ++s) every[static_cast<std::size_t>(s)] = static_cast<double>(s) * c.dt;
  const auto paths = bohm::integrate(psi0, pot, x0, c.T, c.dt);
  const auto trace = qwalk::evolve_ensemble(qwalk::walkers_at(build_qmap(psi0), x0, c.kernel, c.seed, c.units),
                                            c.kernel, psi0, pot, c.T, c.dt, every);

  std::set<long> recorded;
  for (double t : run.sample_times()) recorded.insert(std::lround(t / c.dt));
  Csv traj = run.csv("trajectories.csv", {"t", "walker_id", "x", "q"});
  Csv bohm_csv = run.csv("bohm_trajectories.csv", {"t", "walker_id", "x"});
  double worst = 0.0;
  for (std::size_t s = 0; s < trace.times.size(); ++s) {
    for (std::size_t w = 0; w < x0.size(); ++w) {
      const auto wi = static_cast<Eigen::Index>(w);
      worst = std::max(worst, std::abs(wrap_signed(trace.x[s][wi] - paths[w].unwrapped[s], c.length)));
      if (recorded.contains(static_cast<long>(s))) {
        traj.field(trace.times[s]).field(static_cast<long>(w)).field(trace.x[s][wi]).field(trace.q[s][wi]).end();
        bohm_csv.field(paths[w].times[s]).field(static_cast<long>(w)).field(paths[w].position(s)).end();
      }
    }
  }
  run.metric("max_traj_deviation", worst);
  run.metric("walkers", static_cast<double>(x0.size()));
  run.criterion("trajectories_match", worst < tolerance, "sup-norm " + describe(worst, "<", tolerance));
}

void nodal_crossing(Run& run) {
  const ExperimentConfig& c = run.config;
  const Wavefunction psi0 = run.initial_state();
  nelson::CrossingSetup setup{.psi0 = psi0,
                              .potential = make_potential(c.potential, psi0),
                              .nodes = run.param<std::vector<double>>("nodes", {}),
                              .start = run.param<double>("start", 0.2 * c.length),
                              .walkers = static_cast<std::size_t>(c.walkers),
                              .T = c.T,
                              .sample_interval = run.param<double>("sample_interval", c.dt),
                              .band = run.param<double>("band", 0.0),
                              .seed = c.seed,
                              .stationary = run.param<bool>("stationary", false)};
  const auto nelson_walkers = static_cast<std::size_t>(run.param<long>("nelson_walkers", c.walkers));
  const auto qwalk_walkers = static_cast<std::size_t>(run.param<long>("qwalk_walkers", c.walkers));
  const double min_ratio = run.param<double>("min_ratio", 10.0);
  std::vector<double> dts = {c.dt};
  for (double f : run.param<std::vector<double>>("refinements", {2.0, 4.0})) dts.push_back(c.dt / f);

  std::vector<nelson::CrossingRate> nel, qw;
  Csv report = run.csv("crossing_report.csv", {"dynamics", "dt", "crossings_per_unit_time", "walkers", "ci_low", "ci_high"});
  auto write = [&](const nelson::CrossingRate& r) {
    report.field(r.dynamics).field(r.dt).field(r.rate).field(r.walkers).field(r.ci_low).field(r.ci_high).end();
  };
  for (double dt : dts) {
    setup.walkers = nelson_walkers;
    nel.push_back(nelson::nelson_crossings(setup, dt));
    write(nel.back());
    setup.walkers = qwalk_walkers;
    qw.push_back(nelson::qwalk_crossings(setup, c.kernel, dt));
    write(qw.back());
  }

  const double nu = nelson::NelsonParams::for_units(c.units, c.dt).nu;
  run.metric("diffusion_ratio", c.kernel.diffusion(c.units) / nu);
  run.metric("nelson_rate", nel.front().rate);
  run.metric("qwalk_rate", qw.front().rate);
  run.metric("nelson_rejected_steps", static_cast<double>(nel.front().rejected));
  run.metric("rate_ratio", nel.front().ci_high > 0.0 ? qw.front().rate / nel.front().ci_high : INFINITY);

  run.criterion("qwalk_exceeds_nelson", qw.front().rate >= min_ratio * nel.front().ci_high,
                "qwalk " + describe(qw.front().rate, ">=", min_ratio * nel.front().ci_high) + " (" +
                    format_number(min_ratio) + " x Nelson upper 95% bound)");
  bool decreasing = true;
  for (std::size_t k = 1; k < nel.size(); ++k) decreasing = decreasing && nel[k].rate < nel[k - 1].rate;
  std::string rates;
  for (const auto& r : nel) rates += (rates.empty() ? "" : " > ") + format_number(r.rate);
  run.criterion("nelson_decreases_with_dt", decreasing, "Nelson rates " + rates);
  bool stable = true;
  for (std::size_t a = 0; a < qw.size(); ++a)
    for (std::size_t b = a + 1; b < qw.size(); ++b)
      stable = stable && qw[a].ci_low <= qw[b].ci_high && qw[b].ci_low <= qw[a].ci_high;
  run.criterion("qwalk_stable_with_dt", stable, "95% intervals overlap pairwise");
}

// Simpson integral of the predicted conditional density over each bin.
Eigen::VectorXd predicted_bins(const QMap& map1, const QMap& map2, const Wavefunction& psi2, double x1,
                               const qwalk::TransitionKernel& kernel, double tau, int bins) {
  const int sub = 64;
  const double L = psi2.grid.length(), h = L / bins / sub;
  std::vector<double> xs(static_cast<std::size_t>(bins * sub + 1));
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = std::min(static_cast<double>(i) * h, std::nextafter(L, 0.0));
  const Eigen::VectorXd f = qwalk::conditional_density_predicted(map1, map2, psi2, x1, kernel, tau, xs);
  Eigen::VectorXd probs(bins);
  for (int b = 0; b < bins; ++b) {
    double s = 0.0;
    for (int k = 0; k < sub; k += 2) {
      const Eigen::Index i = b * sub + k;
      s += f[i] + 4.0 * f[i + 1] + f[i + 2];
    }
    probs[b] = s * h / 3.0;
  }
  return probs;
}

void conditional_density(Run& run) {
  const ExperimentConfig& c = run.config;
  const Wavefunction psi1 = run.initial_state();
  const Potential pot = make_potential(c.potential, psi1);
  const double x1 = run.param<double>("x1", 0.5 * c.length);
  const double level = run.param<double>("significance", 0.01);
  const QMap map1 = build_qmap(psi1);

  std::vector<double> start(static_cast<std::size_t>(c.walkers), x1);
  auto walkers = qwalk::walkers_at(map1, start, c.kernel, c.seed, c.units);
  Eigen::VectorXd probs;
  entropy::Histogram hist;
  qwalk::run_ensemble(walkers, c.kernel, psi1, pot, c.dt, c.dt, std::vector<double>{c.dt},
                      [&](const Evolution& evo, const QMap& map2, std::span<const qwalk::WalkerState> ws) {
                        probs = predicted_bins(map1, map2, evo.psi(), x1, c.kernel, c.dt, c.bins);
                        hist = entropy::Histogram::of(positions(ws), c.bins, c.length);
                      });
  const double mass = probs.sum();
  const entropy::ChiSquare test = entropy::chi_square_test(hist, probs / mass);

  Csv out = run.csv("conditional_density.csv", {"x_low", "x_high", "predicted", "observed"});
  for (int b = 0; b < c.bins; ++b) {
    out.field(b * hist.width()).field((b + 1) * hist.width()).field(probs[b] / mass)
        .field(static_cast<double>(hist.counts[static_cast<std::size_t>(b)]) / static_cast<double>(hist.total()))
        .end();
  }
  run.metric("chi_square", test.statistic);
  run.metric("dof", test.dof);
  run.metric("p_value", test.p_value);
  run.metric("predicted_mass", mass);
  run.criterion("chi_square_p_value", test.p_value > level, "p " + describe(test.p_value, ">", level));
}

void typicality_histograms(Run& run) {
  const ExperimentConfig& c = run.config;
  const Wavefunction psi = run.initial_state();
  const QMap map = build_qmap(psi);
  std::vector<entropy::Interval> set;
  if (c.parameters.contains("intervals")) {
    for (const json& e : c.parameters.at("intervals")) set.push_back({e[0].get<double>(), e[1].get<double>()});
  } else {
    set.push_back({0.0, c.length});
  }
  const double tolerance = run.param<double>("tolerance", 1e-9);

  const double typ = entropy::typicality(psi, set);
  const double qfrac = entropy::q_volume_fraction(map, set);
  run.metric("typicality", typ);
  run.metric("q_volume_fraction", qfrac);
  run.metric("typicality_gap", std::abs(typ - qfrac));
  run.criterion("typicality_is_q_volume", std::abs(typ - qfrac) < tolerance,
                "|typicality - q fraction| " + describe(std::abs(typ - qfrac), "<", tolerance));

  // Equilibrium sample: fraction of walkers inside the set and the
  // histogram of all of them.
  const auto walkers =
      qwalk::equilibrium_walkers(map, static_cast<std::size_t>(c.walkers), c.kernel, c.seed, c.units);
  long inside = 0;
  for (const auto& w : walkers)
    for (const auto& iv : set)
      if (w.x >= iv.a && w.x < iv.b) ++inside;
  const double M = static_cast<double>(c.walkers);
  const double fraction = static_cast<double>(inside) / M;
  const double se = std::sqrt(std::max(typ * (1.0 - typ), 1.0 / M) / M);
  run.metric("sample_fraction", fraction);
  run.criterion("sample_fraction_matches", std::abs(fraction - typ) <= 4.0 * se,
                "|fraction - typicality| " + describe(std::abs(fraction - typ), "<=", 4.0 * se));

  const entropy::Histogram hist = entropy::Histogram::of(positions(walkers), c.bins, c.length);
  const Eigen::VectorXd probs = entropy::bin_probabilities(psi, c.bins);
  Csv h = run.csv("histogram.csv", {"x_low", "x_high", "count", "probability"});
  for (int b = 0; b < c.bins; ++b)
    h.field(b * hist.width()).field((b + 1) * hist.width()).field(hist.counts[static_cast<std::size_t>(b)])
        .field(probs[b]).end();
  run.metric("histogram_entropy", entropy::histogram_entropy(hist));
  run.metric("log_sequence_count", entropy::log_sequence_count(hist));

  // Volume law at the half-half composition.
  std::vector<double> sizes = run.param<std::vector<double>>("volume_law_sizes", {4.0, 100.0});
  Csv vl = run.csv("volume_law.csv", {"M", "ln_W", "M_S_h", "ratio"});
  bool increasing = true;
  double previous = -1.0;
  for (double m : sizes) {
    const long half = static_cast<long>(m) / 2;
    entropy::Histogram composition{.length = 1.0, .counts = {half, half}};
    const double ratio = entropy::volume_law_ratio(composition).ratio;
    vl.field(static_cast<long>(m)).field(entropy::log_sequence_count(composition))
        .field(m * entropy::histogram_entropy(composition)).field(ratio).end();
    run.metric("volume_law_ratio_M" + std::to_string(static_cast<long>(m)), ratio);
    increasing = increasing && ratio > previous;
    previous = ratio;
  }
  run.criterion("volume_law_increasing", increasing, "ratio strictly increasing over the listed sizes");
}

void maxent_suite(Run& run) {
  const Eigen::Index n = run.param<long>("quadrature_intervals", 4096);
  const double mean = run.param<double>("mean", 0.6);
  const double lambda_tolerance = run.param<double>("lambda_tolerance", 1e-8);
  const double qe_tolerance = run.param<double>("qe_tolerance", 1e-10);
  Csv out = run.csv("maxent.csv", {"case", "x", "measure", "rho"});
  auto dump = [&](const std::string& name, const entropy::MaxEntProblem& p) {
    for (Eigen::Index i = 0; i < p.x.size(); ++i) out.field(name).field(p.x[i]).field(p.measure[i]).field(p.rho[i]).end();
  };

  // No constraints on a non-uniform measure.
  {
    const Wavefunction psi = run.initial_state();
    const Eigen::VectorXd m = 2.0 * density(psi) + Eigen::VectorXd::Constant(run.grid.points(), 0.5);
    const auto solved = entropy::maxent_solve(entropy::MaxEntProblem::on_grid(run.grid, m, Eigen::VectorXd()));
    const double gap = (solved.rho - m / solved.Z).cwiseAbs().maxCoeff();
    run.metric("zero_constraint_gap", gap);
    run.criterion("zero_constraint_is_measure", gap <= 1e-14 * solved.rho.cwiseAbs().maxCoeff(),
                  "max |rho - m/Z| " + format_number(gap));
    dump("zero-constraint", solved);
  }

  // Mean constraint on the uniform measure, rho ~ exp(-lambda x), against a
  // bracketing root find on the same quadrature.
  {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n + 1);
    Eigen::VectorXd target(1);
    target << mean;
    const auto problem = entropy::MaxEntProblem::on_interval(0.0, 1.0, n, ones, target);
    const auto solved = entropy::maxent_solve(problem);
    auto excess = [&](double l) {
      const Eigen::ArrayXd e = (-l * (problem.x.array() - 0.5)).exp() * problem.weights.array();
      return (e * problem.x.array()).sum() / e.sum() - mean;
    };
    std::uintmax_t iterations = 200;
    const auto [lo, hi] = boost::math::tools::toms748_solve(excess, -50.0, 50.0, boost::math::tools::eps_tolerance<double>(52),
                                                            iterations);
    const double oracle = 0.5 * (lo + hi);
    const double gap = std::abs(solved.lambda[0] - oracle);
    run.metric("mean_lambda", solved.lambda[0]);
    run.metric("mean_lambda_oracle", oracle);
    run.metric("mean_lambda_gap", gap);
    run.criterion("mean_constraint_matches_root_find", gap < lambda_tolerance,
                  "|lambda - oracle| " + describe(gap, "<", lambda_tolerance));
    dump("mean-constraint", solved);
  }

  // Quantum equilibrium as the unconstrained maximum relative to omega.
  {
    const Wavefunction psi = run.initial_state();
    const Eigen::VectorXd rho = density(psi);
    const auto solved =
        entropy::maxent_solve(entropy::MaxEntProblem::on_grid(run.grid, run.grid.length() * rho, Eigen::VectorXd()));
    const double gap = (solved.rho - rho).cwiseAbs().maxCoeff();
    run.metric("qe_gap", gap);
    run.criterion("qe_is_maxent", gap < qe_tolerance, "max |rho - |psi|^2| " + describe(gap, "<", qe_tolerance));
    dump("quantum-equilibrium", solved);
  }
}

void write_report(const RunReport& report, const fs::path& dir) {
  std::ofstream out(dir / "report.json", std::ios::binary);
  out << report.to_json().dump(2) << '\n';
}

}  // namespace

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (const auto& e : kExperiments)
    if (name == e.name) return e.kind;
  throw InvalidArgument("unknown experiment '" + std::string(name) + "'");
}

std::string to_string(ExperimentKind kind) {
  for (const auto& e : kExperiments)
    if (e.kind == kind) return e.name;
  return "unknown";
}

std::vector<std::string> experiment_names() {
  std::vector<std::string> names;
  for (const auto& e : kExperiments) names.emplace_back(e.name);
  return names;
}

std::vector<Finding> validate(const json& document) {
  std::vector<Finding> findings;
  read_config(document, findings);
  return findings;
}

ExperimentConfig parse_config(const json& document) {
  std::vector<Finding> findings;
  ExperimentConfig config = read_config(document, findings);
  if (!findings.empty()) throw InvalidArgument(findings.front().field + ": " + findings.front().message);
  return config;
}

json load_document(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

std::string software_version() { return QDOS_VERSION; }

fs::path output_root() {
  const char* env = std::getenv(kOutputRootVariable);
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
}

fs::path run_directory(const ExperimentConfig& config) { return output_root() / config.output_dir; }

bool RunReport::passed() const {
  return !failure && !criteria.empty() &&
         std::all_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.passed; });
}

json RunReport::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["name"] = name;
  j["passed"] = passed();
  j["criteria"] = json::array();
  for (const auto& c : criteria) j["criteria"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["metrics"] = json::object();
  for (const auto& [k, v] : metrics) {
    if (std::isfinite(v))
      j["metrics"][k] = v;
    else
      j["metrics"][k] = format_number(v);
  }
  j["artifacts"] = artifacts;
  j["software_version"] = version;
  j["config"] = config;
  j["failure"] = failure ? json(*failure) : json(nullptr);
  return j;
}

RunReport RunReport::from_json(const json& j) {
  RunReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.name = j.value("name", r.experiment);
  for (const auto& c : j.at("criteria"))
    r.criteria.push_back({c.at("name").get<std::string>(), c.at("passed").get<bool>(), c.value("detail", "")});
  for (const auto& [k, v] : j.at("metrics").items())
    r.metrics[k] = v.is_number() ? v.get<double>() : std::strtod(v.get<std::string>().c_str(), nullptr);
  r.artifacts = j.value("artifacts", std::vector<std::string>{});
  r.version = j.value("software_version", "");
  r.config = j.value("config", json::object());
  if (j.contains("failure") && j.at("failure").is_string()) r.failure = j.at("failure").get<std::string>();
  return r;
}

RunReport run(const ExperimentConfig& config) {
  RunReport report;
  report.experiment = to_string(config.experiment);
  report.name = config.name;
  report.version = software_version();
  report.config = config.source;
  const fs::path dir = run_directory(config);
  fs::create_directories(dir);

  Run context(config, report, dir);
  try {
    switch (config.experiment) {
      case ExperimentKind::QeStationarity: qe_stationarity(context); break;
      case ExperimentKind::QeRelaxation: qe_relaxation(context); break;
      case ExperimentKind::ZeroNoiseBohm: zero_noise_bohm(context); break;
      case ExperimentKind::NodalCrossing: nodal_crossing(context); break;
      case ExperimentKind::ConditionalDensity: conditional_density(context); break;
      case ExperimentKind::TypicalityHistograms: typicality_histograms(context); break;
      case ExperimentKind::MaxentSuite: maxent_suite(context); break;
    }
  } catch (const NodeProximity& e) {
    report.failure = std::string("NodeProximity: ") + e.what();
  } catch (const DegenerateDensity& e) {
    report.failure = std::string("DegenerateDensity: ") + e.what();
  } catch (const NonRealizable& e) {
    report.failure = std::string("NonRealizable: ") + e.what();
  } catch (const GridMismatch& e) {
    report.failure = std::string("GridMismatch: ") + e.what();
  } catch (const InvalidArgument& e) {
    report.failure = std::string("InvalidArgument: ") + e.what();
  } catch (const std::exception& e) {
    report.failure = e.what();
  }
  write_report(report, dir);
  return report;
}

RunReport read_report(const fs::path& run_dir) {
  const json j = load_document(run_dir / "report.json");
  try {
    return RunReport::from_json(j);
  } catch (const json::exception& e) {
    throw InvalidArgument((run_dir / "report.json").string() + ": malformed report: " + e.what());
  }
}

}  // namespace qdos::experiments
