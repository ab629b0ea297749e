#pragma once

// Deterministic trajectories under the guidance condition v = F / |psi|^2.

#include <functional>
#include <span>
#include <vector>

#include "qdos/grid_wave.hpp"

namespace qdos::bohm {

/// Sampled trajectory. Positions are stored unwrapped so the winding number
/// survives; position() reports the wrapped value in [0, L).
struct Trajectory {
  long walker_id = 0;
  double length = 1.0;
  std::vector<double> times;
  std::vector<double> unwrapped;

  double position(std::size_t i) const { return wrap(unwrapped[i], length); }
  long winding(std::size_t i) const;
  std::vector<double> positions() const;
};

/// Guidance velocity at x. Throws NodeProximity where |psi(x)|^2 is at or
/// below the node floor.
double velocity(const WaveFields& fields, double x);
double velocity(const Wavefunction& psi, double x);

/// Called after every step with the co-evolved wave and the walkers'
/// unwrapped positions.
using StepObserver = std::function<void(const Evolution&, std::span<const double>)>;

/// RK4 integration of dx/dt = v with psi advanced in lockstep; midpoint
/// stages use the half-step state. T must be an integer multiple of dt.
std::vector<Trajectory> integrate(const Wavefunction& psi0, const Potential& pot, std::span<const double> x0,
                                  double T, double dt, const StepObserver& observer = {});
Trajectory integrate(const Wavefunction& psi0, const Potential& pot, double x0, double T, double dt);

/// Number of whole steps of size dt in T; throws if T is not a multiple.
long step_count(double T, double dt);

}  // namespace qdos::bohm
