#pragma once

// Random motion in q-space. Walkers carry their q coordinate; physical
// positions are read back through the inverse map of the current state,
// so the drift of the Bohmian flow is carried by the map and the kernel
// only has to supply translation-invariant, zero-mean increments.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "qdos/grid_wave.hpp"
#include "qdos/qmap.hpp"
#include "qdos/rng.hpp"

namespace qdos::qwalk {

enum class KernelKind { WrappedGaussian, UniformJump, UniformVelocity, Zero };

KernelKind parse_kernel_kind(std::string_view name);
std::string to_string(KernelKind kind);

/// Increment law in q. D_q = alpha * hbar / m^power sets the variance growth
/// 2 D_q dt of the diffusive kinds; the uniform jump is matched to the same
/// variance. UniformVelocity gives each walker a fixed q-velocity drawn
/// uniformly from [-speed, speed].
struct TransitionKernel {
  KernelKind kind = KernelKind::WrappedGaussian;
  double alpha = 0.5;
  double power = 1.0;
  double speed = 1.0;

  double diffusion(const Units& units) const;
  /// Half-width of the uniform increment over an interval tau, for the two
  /// uniform kinds.
  double half_width(double tau, const Units& units) const;
};

/// Density on the circle of length L of the increment accumulated over tau.
/// Throws DegenerateDensity for the zero kernel.
double increment_density(const TransitionKernel& kernel, double dq, double tau, double length, const Units& units);

/// Wrapped normal density with standard deviation sigma on a circle of
/// length L.
double wrapped_normal_density(double d, double sigma, double length);

struct WalkerState {
  long id = 0;
  double q = 0.0;
  double x = 0.0;
  double velocity = 0.0;
  WalkerRandom rng;
};

double draw_increment(const TransitionKernel& kernel, WalkerState& walker, double dt, const Units& units);

/// Walkers at the given positions, with q taken from map. Walker i draws
/// from stream i of seed.
std::vector<WalkerState> walkers_at(const QMap& map, std::span<const double> x, const TransitionKernel& kernel,
                                    std::uint64_t seed, const Units& units = {});

/// M walkers in quantum equilibrium: q uniform on [0, L), x = inverse(q).
std::vector<WalkerState> equilibrium_walkers(const QMap& map, std::size_t count, const TransitionKernel& kernel,
                                             std::uint64_t seed, const Units& units = {});

/// One kernel step followed by synchronization with the map at t + dt.
WalkerState step(WalkerState walker, const TransitionKernel& kernel, const QMap& map_next, double dt,
                 const Units& units = {});

/// Called at each sample time with the co-evolved wave, its map and the
/// synchronized walkers.
using SampleObserver = std::function<void(const Evolution&, const QMap&, std::span<const WalkerState>)>;

/// Co-evolves psi and the walkers for T / dt steps. Walkers are mapped back
/// to x only at steps whose time is in sample_times; each sample time must
/// be a whole number of steps from the start. A sample at the start time is
/// reported before the first step.
void run_ensemble(std::vector<WalkerState>& walkers, const TransitionKernel& kernel, const Wavefunction& psi0,
                  const Potential& pot, double T, double dt, std::span<const double> sample_times,
                  const SampleObserver& observer);

struct EnsembleTrace {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> q;
};

EnsembleTrace evolve_ensemble(std::vector<WalkerState> walkers, const TransitionKernel& kernel,
                              const Wavefunction& psi0, const Potential& pot, double T, double dt,
                              std::span<const double> sample_times);

/// Transition density from x1 at the time of map1 to each x2 at the time of
/// map2 = psi2's map, for one kernel interval tau:
/// L |psi2(x2)|^2 rho_q(Q2(x2) - Q1(x1)).
Eigen::VectorXd conditional_density_predicted(const QMap& map1, const QMap& map2, const Wavefunction& psi2,
                                              double x1, const TransitionKernel& kernel, double tau,
                                              std::span<const double> x2);
/// Same, evaluated at the grid nodes of psi2.
Eigen::VectorXd conditional_density_predicted(const QMap& map1, const QMap& map2, const Wavefunction& psi2,
                                              double x1, const TransitionKernel& kernel, double tau);

}  // namespace qdos::qwalk
