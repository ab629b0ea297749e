#pragma once

// Wavefunctions on a uniform periodic 1D grid: construction, split-step
// evolution, density, flux and continuity diagnostics.

#include <Eigen/Core>

#include <complex>
#include <string>
#include <string_view>
#include <vector>

#include "qdos/spectral.hpp"

namespace qdos {

struct Units {
  double hbar = 1.0;
  double mass = 1.0;
};

/// Periodic grid on [0, length) with a power-of-two number of points.
class Grid1D {
 public:
  Grid1D(double length, Eigen::Index points);

  double length() const { return length_; }
  Eigen::Index points() const { return points_; }
  double dx() const { return length_ / static_cast<double>(points_); }
  double x(Eigen::Index i) const { return static_cast<double>(i) * dx(); }
  Eigen::VectorXd nodes() const;

  bool operator==(const Grid1D&) const = default;

 private:
  double length_;
  Eigen::Index points_;
};

struct Wavefunction {
  Grid1D grid;
  Eigen::VectorXcd amplitudes;
  double time = 0.0;
  Units units;
};

struct Potential {
  Eigen::VectorXd values;
};

enum class StateKind { Uniform, PlaneWave, TwoMode, Superposition, Gaussian, RealProfile };

/// A Fourier mode exp(2 pi i n x / L) / sqrt(L) with complex weight.
struct Mode {
  int index = 0;
  std::complex<double> amplitude{1.0, 0.0};
};

struct StateSpec {
  StateKind kind = StateKind::Uniform;
  int mode = 1;              // PlaneWave
  std::vector<Mode> modes;   // TwoMode (exactly two), Superposition
  double center = 0.5;       // Gaussian, fraction-free position
  double width = 0.05;       // Gaussian sigma
  int momentum_mode = 0;     // Gaussian carrier, k0 = 2 pi n / L
  double contrast = 0.5;     // RealProfile: |psi|^2 ~ 1 - contrast * cos(2 pi x / L)
};

StateKind parse_state_kind(std::string_view name);
std::string to_string(StateKind kind);

/// Normalized state at t = 0. Throws InvalidArgument for bad parameters.
Wavefunction make_state(const StateSpec& spec, const Grid1D& grid, Units units = {});

enum class PotentialKind { Zero, Constant, Cosine, Harmonic, Stationary };

struct PotentialSpec {
  PotentialKind kind = PotentialKind::Zero;
  double strength = 0.0;  // Constant value, Cosine amplitude, Harmonic omega
  int mode = 1;           // Cosine: V = strength * cos(2 pi mode x / L)
};

PotentialKind parse_potential_kind(std::string_view name);

/// Stationary builds V = (hbar^2 / 2m) psi'' / psi so that the given real
/// positive state is a zero-energy eigenstate.
Potential make_potential(const PotentialSpec& spec, const Wavefunction& state);
Potential stationary_potential(const Wavefunction& psi);

double norm(const Wavefunction& psi);
Eigen::VectorXd density(const Wavefunction& psi);
/// F = (hbar / m) Im(psi* dpsi/dx), derivative taken spectrally.
Eigen::VectorXd flux(const Wavefunction& psi);
double flux_at_origin(const Wavefunction& psi);
double energy(const Wavefunction& psi, const Potential& pot);

/// Strang split-step propagator for a fixed dt and static potential.
class Propagator {
 public:
  Propagator(const Grid1D& grid, const Potential& pot, double dt, Units units);

  Wavefunction step(const Wavefunction& psi) const;
  double dt() const { return dt_; }

 private:
  Grid1D grid_;
  double dt_;
  Eigen::VectorXcd half_potential_phase_;
  Eigen::VectorXcd kinetic_phase_;
};

Wavefunction evolve_step(const Wavefunction& psi, const Potential& pot, double dt);

/// Max-norm of d|psi|^2/dt + dF/dx over one step, with F taken at the
/// half-step state.
double continuity_residual(const Wavefunction& before, const Wavefunction& after, const Potential& pot,
                           double dt);

/// Interpolable snapshot of density, its slope and flux.
struct WaveFields {
  double time = 0.0;
  double max_density = 0.0;
  PeriodicHermite<double> density;
  PeriodicHermite<double> density_slope;
  PeriodicHermite<double> flux;

  double node_floor() const { return 1e-12 * max_density; }
};

WaveFields make_fields(const Wavefunction& psi);

/// |psi|^2 as the exact trigonometric polynomial implied by the sampled
/// amplitudes, for integrals that do not depend on a quadrature rule.
class BandLimitedDensity {
 public:
  explicit BandLimitedDensity(const Wavefunction& psi);

  /// Integral over [a, b) on the circle, a <= b, b - a <= length.
  double integral(double a, double b) const;
  /// Mass of each grid cell [x_i, x_i + dx).
  Eigen::VectorXd cell_integrals() const;

 private:
  Grid1D grid_;
  Eigen::VectorXcd coefficients_;  // 2P-point transform of |psi|^2
  Eigen::VectorXd wavenumbers_;
};

/// Co-evolves a wavefunction and the quantities downstream modules sample
/// at every step: fields at t, t + dt/2, t + dt, and the time-integrated flux
/// through x = 0.
class Evolution {
 public:
  struct Options {
    bool fields = true;
    bool half_fields = true;
  };

  Evolution(Wavefunction psi0, const Potential& pot, double dt, Options options);
  Evolution(Wavefunction psi0, const Potential& pot, double dt) : Evolution(std::move(psi0), pot, dt, Options{}) {}

  void advance();

  const Wavefunction& psi() const { return psi_; }
  const WaveFields& fields() const { return fields_; }
  const WaveFields& previous_fields() const { return previous_fields_; }
  const WaveFields& half_fields() const { return half_fields_; }
  double time() const { return psi_.time; }
  long steps() const { return steps_; }
  double dt() const { return full_.dt(); }
  /// Integral of F(0, s) ds from the start time to now (Simpson per step).
  double origin_transport() const { return origin_transport_; }

 private:
  Propagator full_;
  Propagator half_;
  Options options_;
  Wavefunction psi_;
  WaveFields fields_;
  WaveFields previous_fields_;
  WaveFields half_fields_;
  double origin_flux_;
  double origin_transport_ = 0.0;
  long steps_ = 0;
};

}  // namespace qdos
