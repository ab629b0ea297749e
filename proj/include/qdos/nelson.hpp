#pragma once

// Nelson's stochastic mechanics as a comparator: Euler-Maruyama steps of
//   dx = (F / rho + nu d/dx ln rho) dt + sqrt(2 nu) dW,   nu = hbar / 2m,
// plus the node-crossing detector applied identically to Nelson walkers and
// q-space walkers.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qdos/grid_wave.hpp"
#include "qdos/qwalk.hpp"
#include "qdos/rng.hpp"

namespace qdos::nelson {

struct NelsonParams {
  double nu = 0.5;
  double dt = 1e-4;

  /// nu = hbar / 2m, the diffusion constant of the Schroedinger-Nelson process.
  static NelsonParams for_units(const Units& units, double dt);
};

/// Current plus osmotic velocity at x. Throws NodeProximity below the node
/// floor.
double drift(const WaveFields& fields, double x, double nu);

/// x + drift dt + sqrt(2 nu dt) xi, wrapped to [0, L).
double nelson_step(double x, const WaveFields& fields, const NelsonParams& params, double xi);
double nelson_step(double x, const Wavefunction& psi, const NelsonParams& params, WalkerRandom& rng);

struct Walker {
  long id = 0;
  double x = 0.0;
  WalkerRandom rng;
  long rejected = 0;  // steps redrawn because they landed under the node floor
};

std::vector<Walker> walkers_at(std::span<const double> x, std::uint64_t seed, double length);

/// Called every sample_every steps (and once at the start) with the time and
/// the walkers.
using SampleObserver = std::function<void(double, std::span<const Walker>)>;

/// Advances walkers for T / dt steps. A step that lands where |psi|^2 at the
/// new time is under the node floor is redrawn; after 64 refusals in a row
/// the NodeProximity error propagates. With evolve = false the fields of
/// psi0 are used throughout, which is exact for stationary states.
void run_ensemble(std::vector<Walker>& walkers, const Wavefunction& psi0, const Potential& pot, double T,
                  const NelsonParams& params, long sample_every, const SampleObserver& observer, bool evolve = true);

/// Counts node passages from sampled positions. Samples are unwrapped by
/// the minimal image, so consecutive samples must be less than L/2 apart.
/// The unwrapped line is cut into regions by the periodic copies of the
/// nodes; a sample within `band` of a node is ignored, and otherwise each
/// region boundary between it and the last recorded region counts once.
class CrossingDetector {
 public:
  CrossingDetector(std::vector<double> nodes, double length, double band, std::size_t walkers);

  void observe(std::size_t walker, double x);
  long crossings(std::size_t walker) const { return counts_[walker]; }
  long total() const;
  std::size_t walkers() const { return counts_.size(); }

 private:
  bool in_band(double x) const;
  long region(double unwrapped) const;

  std::vector<double> nodes_;
  double length_;
  double band_;
  std::vector<long> last_;
  std::vector<long> counts_;
  std::vector<double> unwrapped_;
  std::vector<char> started_;
  std::vector<char> has_last_;
};

struct CrossingRate {
  std::string dynamics;
  double dt = 0.0;
  double rate = 0.0;  // crossings per walker per unit time
  long walkers = 0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  long crossings = 0;
  long rejected = 0;
};

/// Mean per-walker rate over time T with a normal 95% interval from the
/// between-walker spread.
CrossingRate summarize(const CrossingDetector& detector, double T, std::string dynamics, double dt);

struct CrossingSetup {
  Wavefunction psi0;
  Potential potential;
  std::vector<double> nodes;
  double start = 0.2;
  std::size_t walkers = 1000;
  double T = 1.0;
  double sample_interval = 1e-4;
  double band = 0.0;  // zero selects two grid cells
  std::uint64_t seed = 1;
  /// |psi|^2 and F are constant in time, so Nelson walkers may use the
  /// fields of psi0 throughout.
  bool stationary = false;
};

CrossingRate nelson_crossings(const CrossingSetup& setup, double dt);
CrossingRate qwalk_crossings(const CrossingSetup& setup, const qwalk::TransitionKernel& kernel, double dt);

}  // namespace qdos::nelson
