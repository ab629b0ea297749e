#include "qdos/nelson.hpp"

#include <algorithm>
#include <cmath>

#include "qdos/bohm.hpp"
#include "qdos/errors.hpp"
#include "qdos/parallel.hpp"
#include "qdos/qmap.hpp"

namespace qdos::nelson {

NelsonParams NelsonParams::for_units(const Units& units, double dt) {
  return {.nu = units.hbar / (2.0 * units.mass), .dt = dt};
}

double drift(const WaveFields& fields, double x, double nu) {
  const double rho = fields.density(x);
  if (!(rho > fields.node_floor())) throw NodeProximity(x, rho, fields.node_floor());
  return (fields.flux(x) + nu * fields.density_slope(x)) / rho;
}

double nelson_step(double x, const WaveFields& fields, const NelsonParams& params, double xi) {
  if (!(params.nu > 0.0) || !(params.dt > 0.0)) throw InvalidArgument("nelson_step: need nu > 0 and dt > 0");
  const double L = fields.density.length();
  return wrap(x + drift(fields, x, params.nu) * params.dt + std::sqrt(2.0 * params.nu * params.dt) * xi, L);
}

double nelson_step(double x, const Wavefunction& psi, const NelsonParams& params, WalkerRandom& rng) {
  return nelson_step(x, make_fields(psi), params, rng.normal());
}

std::vector<Walker> walkers_at(std::span<const double> x, std::uint64_t seed, double length) {
  std::vector<Walker> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i].id = static_cast<long>(i);
    out[i].x = wrap(x[i], length);
    out[i].rng = WalkerRandom(seed, i);
  }
  return out;
}

namespace {

constexpr int kMaxRedraws = 64;

void advance_walker(Walker& w, const WaveFields& from, const WaveFields& to, const NelsonParams& p) {
  const double L = from.density.length();
  const double det = w.x + drift(from, w.x, p.nu) * p.dt;
  const double amp = std::sqrt(2.0 * p.nu * p.dt);
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    const double next = wrap(det + amp * w.rng.normal(), L);
    if (to.density(next) > to.node_floor()) {
      w.x = next;
      return;
    }
    ++w.rejected;
  }
  throw NodeProximity(w.x, to.density(w.x), to.node_floor());
}

}  // namespace

void run_ensemble(std::vector<Walker>& walkers, const Wavefunction& psi0, const Potential& pot, double T,
                  const NelsonParams& params, long sample_every, const SampleObserver& observer, bool evolve) {
  if (!(params.nu > 0.0)) throw InvalidArgument("nelson: nu must be positive");
  if (sample_every < 1) throw InvalidArgument("nelson: sample_every must be at least 1");
  const long steps = bohm::step_count(T, params.dt);

  const WaveFields frozen = make_fields(psi0);
  for (const Walker& w : walkers) drift(frozen, w.x, params.nu);
  if (observer) observer(psi0.time, walkers);

  if (!evolve) {
    for (long s = 1; s <= steps; ++s) {
      parallel_for(walkers.size(), [&](std::size_t i) { advance_walker(walkers[i], frozen, frozen, params); });
      if (observer && s % sample_every == 0) observer(psi0.time + static_cast<double>(s) * params.dt, walkers);
    }
    return;
  }

  Evolution evo(psi0, pot, params.dt, {.fields = true, .half_fields = false});
  for (long s = 1; s <= steps; ++s) {
    evo.advance();
    parallel_for(walkers.size(), [&](std::size_t i) {
      advance_walker(walkers[i], evo.previous_fields(), evo.fields(), params);
    });
    if (observer && s % sample_every == 0) observer(evo.time(), walkers);
  }
}

CrossingDetector::CrossingDetector(std::vector<double> nodes, double length, double band, std::size_t walkers)
    : nodes_(std::move(nodes)), length_(length), band_(band), last_(walkers, -1), counts_(walkers, 0) {
  if (nodes_.empty()) throw InvalidArgument("crossing detector needs at least one node");
  for (double& a : nodes_) a = wrap(a, length_);
  std::sort(nodes_.begin(), nodes_.end());
  unwrapped_.assign(walkers, 0.0);
  started_.assign(walkers, 0);
  has_last_.assign(walkers, 0);
}

bool CrossingDetector::in_band(double x) const {
  for (double a : nodes_)
    if (std::abs(wrap_signed(x - a, length_)) < band_) return true;
  return false;
}

long CrossingDetector::region(double u) const {
  const double turns = std::floor(u / length_);
  const double x = u - turns * length_;
  const long below = std::upper_bound(nodes_.begin(), nodes_.end(), x) - nodes_.begin();
  return static_cast<long>(turns) * static_cast<long>(nodes_.size()) + below;
}

void CrossingDetector::observe(std::size_t walker, double x) {
  double& u = unwrapped_[walker];
  if (!started_[walker]) {
    u = x;
    started_[walker] = 1;
  } else {
    u += wrap_signed(x - wrap(u, length_), length_);
  }
  if (in_band(x)) return;
  const long r = region(u);
  if (has_last_[walker]) counts_[walker] += std::labs(r - last_[walker]);
  last_[walker] = r;
  has_last_[walker] = 1;
}

long CrossingDetector::total() const {
  long sum = 0;
  for (long c : counts_) sum += c;
  return sum;
}

CrossingRate summarize(const CrossingDetector& detector, double T, std::string dynamics, double dt) {
  const std::size_t M = detector.walkers();
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t w = 0; w < M; ++w) {
    const double r = static_cast<double>(detector.crossings(w)) / T;
    sum += r;
    sum2 += r * r;
  }
  const double n = static_cast<double>(M);
  const double mean = sum / n;
  const double var = M > 1 ? std::max(sum2 - n * mean * mean, 0.0) / (n - 1.0) : 0.0;
  const double half = 1.96 * std::sqrt(var / n);
  return {.dynamics = std::move(dynamics),
          .dt = dt,
          .rate = mean,
          .walkers = static_cast<long>(M),
          .ci_low = std::max(0.0, mean - half),
          .ci_high = mean + half,
          .crossings = detector.total()};
}

namespace {

long steps_per_sample(double interval, double dt) {
  const long k = bohm::step_count(interval, dt);
  if (k < 1) throw InvalidArgument("sample interval shorter than dt");
  return k;
}

double band_for(const CrossingSetup& setup) { return setup.band > 0.0 ? setup.band : 2.0 * setup.psi0.grid.dx(); }

}  // namespace

CrossingRate nelson_crossings(const CrossingSetup& setup, double dt) {
  const double L = setup.psi0.grid.length();
  const std::vector<double> x0(setup.walkers, setup.start);
  auto walkers = walkers_at(x0, setup.seed, L);
  CrossingDetector detector(setup.nodes, L, band_for(setup), setup.walkers);
  const NelsonParams params = NelsonParams::for_units(setup.psi0.units, dt);
  run_ensemble(walkers, setup.psi0, setup.potential, setup.T, params, steps_per_sample(setup.sample_interval, dt),
               [&](double, std::span<const Walker> ws) {
                 for (std::size_t i = 0; i < ws.size(); ++i) detector.observe(i, ws[i].x);
               },
               !setup.stationary);
  CrossingRate out = summarize(detector, setup.T, "nelson", dt);
  for (const Walker& w : walkers) out.rejected += w.rejected;
  return out;
}

CrossingRate qwalk_crossings(const CrossingSetup& setup, const qwalk::TransitionKernel& kernel, double dt) {
  const double L = setup.psi0.grid.length();
  const std::vector<double> x0(setup.walkers, setup.start);
  auto walkers = qwalk::walkers_at(build_qmap(setup.psi0), x0, kernel, setup.seed, setup.psi0.units);
  CrossingDetector detector(setup.nodes, L, band_for(setup), setup.walkers);
  const long every = steps_per_sample(setup.sample_interval, dt);
  const long samples = bohm::step_count(setup.T, dt) / every;
  std::vector<double> times;
  for (long k = 0; k <= samples; ++k) times.push_back(static_cast<double>(k * every) * dt);
  qwalk::run_ensemble(walkers, kernel, setup.psi0, setup.potential, setup.T, dt, times,
                      [&](const Evolution&, const QMap&, std::span<const qwalk::WalkerState> ws) {
                        for (std::size_t i = 0; i < ws.size(); ++i) detector.observe(i, ws[i].x);
                      });
  return summarize(detector, setup.T, "qwalk", dt);
}

}  // namespace qdos::nelson
