#include "qdos/grid_wave.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "qdos/errors.hpp"

namespace qdos {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXcd forward_fft(const Eigen::VectorXcd& v) {
  Eigen::FFT<double> fft;
  Eigen::VectorXcd out(v.size());
  fft.fwd(out, v);
  return out;
}

Eigen::VectorXcd inverse_fft(const Eigen::VectorXcd& v) {
  Eigen::FFT<double> fft;
  Eigen::VectorXcd out(v.size());
  fft.inv(out, v);
  return out;
}

void require_same_grid(const Grid1D& a, const Grid1D& b, const char* what) {
  if (!(a == b)) throw GridMismatch(std::string(what) + ": grids differ");
}

void normalize(Wavefunction& psi) {
  const double n = norm(psi);
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("state is not normalizable");
  psi.amplitudes /= std::sqrt(n);
}

}  // namespace

Grid1D::Grid1D(double length, Eigen::Index points) : length_(length), points_(points) {
  if (!(length > 0.0) || !std::isfinite(length)) throw InvalidArgument("grid length must be positive");
  if (points < 4 || !std::has_single_bit(static_cast<unsigned long long>(points)))
    throw InvalidArgument("grid points must be a power of two >= 4");
}

Eigen::VectorXd Grid1D::nodes() const {
  Eigen::VectorXd x(points_);
  for (Eigen::Index i = 0; i < points_; ++i) x[i] = this->x(i);
  return x;
}

StateKind parse_state_kind(std::string_view name) {
  if (name == "uniform") return StateKind::Uniform;
  if (name == "plane-wave") return StateKind::PlaneWave;
  if (name == "two-mode") return StateKind::TwoMode;
  if (name == "superposition") return StateKind::Superposition;
  if (name == "gaussian") return StateKind::Gaussian;
  if (name == "real-profile") return StateKind::RealProfile;
  throw InvalidArgument("unknown state kind '" + std::string(name) + "'");
}

std::string to_string(StateKind kind) {
  switch (kind) {
    case StateKind::Uniform: return "uniform";
    case StateKind::PlaneWave: return "plane-wave";
    case StateKind::TwoMode: return "two-mode";
    case StateKind::Superposition: return "superposition";
    case StateKind::Gaussian: return "gaussian";
    case StateKind::RealProfile: return "real-profile";
  }
  return "unknown";
}

Wavefunction make_state(const StateSpec& spec, const Grid1D& grid, Units units) {
  if (!(units.hbar > 0.0) || !(units.mass > 0.0)) throw InvalidArgument("hbar and mass must be positive");
  const Eigen::Index n = grid.points();
  const double L = grid.length();
  Wavefunction psi{grid, Eigen::VectorXcd::Zero(n), 0.0, units};

  auto add_mode = [&](int index, std::complex<double> amplitude) {
    if (std::abs(index) >= n / 2) throw InvalidArgument("mode index beyond grid Nyquist limit");
    const double k = 2.0 * kPi * index / L;
    for (Eigen::Index i = 0; i < n; ++i)
      psi.amplitudes[i] += amplitude * std::polar(1.0 / std::sqrt(L), k * grid.x(i));
  };

  switch (spec.kind) {
    case StateKind::Uniform:
      psi.amplitudes.setConstant(1.0 / std::sqrt(L));
      break;
    case StateKind::PlaneWave:
      add_mode(spec.mode, 1.0);
      break;
    case StateKind::TwoMode:
      if (spec.modes.size() != 2) throw InvalidArgument("two-mode state needs exactly two modes");
      [[fallthrough]];
    case StateKind::Superposition:
      if (spec.modes.empty()) throw InvalidArgument("superposition needs at least one mode");
      for (const Mode& m : spec.modes) add_mode(m.index, m.amplitude);
      break;
    case StateKind::Gaussian: {
      if (!(spec.width > 0.0) || spec.width > 0.25 * L) throw InvalidArgument("gaussian width must be in (0, L/4]");
      if (std::abs(spec.momentum_mode) >= n / 2) throw InvalidArgument("gaussian carrier beyond Nyquist");
      const double k0 = 2.0 * kPi * spec.momentum_mode / L;
      const double c = wrap(spec.center, L);
      // Sum of periodic images keeps the packet smooth across the seam.
      for (Eigen::Index i = 0; i < n; ++i) {
        const double x = grid.x(i);
        double envelope = 0.0;
        for (int image = -4; image <= 4; ++image) {
          const double d = x - c + image * L;
          envelope += std::exp(-d * d / (4.0 * spec.width * spec.width));
        }
        psi.amplitudes[i] = std::polar(envelope, k0 * x);
      }
      break;
    }
    case StateKind::RealProfile:
      if (!(std::abs(spec.contrast) < 1.0)) throw InvalidArgument("real-profile contrast must satisfy |c| < 1");
      for (Eigen::Index i = 0; i < n; ++i)
        psi.amplitudes[i] = std::sqrt(1.0 - spec.contrast * std::cos(2.0 * kPi * grid.x(i) / L));
      break;
  }
  normalize(psi);
  return psi;
}

PotentialKind parse_potential_kind(std::string_view name) {
  if (name == "zero") return PotentialKind::Zero;
  if (name == "constant") return PotentialKind::Constant;
  if (name == "cosine") return PotentialKind::Cosine;
  if (name == "harmonic") return PotentialKind::Harmonic;
  if (name == "stationary") return PotentialKind::Stationary;
  throw InvalidArgument("unknown potential kind '" + std::string(name) + "'");
}

Potential make_potential(const PotentialSpec& spec, const Wavefunction& state) {
  const Grid1D& grid = state.grid;
  const double L = grid.length();
  Potential pot{Eigen::VectorXd::Zero(grid.points())};
  switch (spec.kind) {
    case PotentialKind::Zero:
      break;
    case PotentialKind::Constant:
      pot.values.setConstant(spec.strength);
      break;
    case PotentialKind::Cosine:
      for (Eigen::Index i = 0; i < grid.points(); ++i)
        pot.values[i] = spec.strength * std::cos(2.0 * kPi * spec.mode * grid.x(i) / L);
      break;
    case PotentialKind::Harmonic:
      for (Eigen::Index i = 0; i < grid.points(); ++i) {
        const double d = grid.x(i) - 0.5 * L;
        pot.values[i] = 0.5 * state.units.mass * spec.strength * spec.strength * d * d;
      }
      break;
    case PotentialKind::Stationary:
      return stationary_potential(state);
  }
  if (!pot.values.allFinite()) throw InvalidArgument("potential has non-finite entries");
  return pot;
}

Potential stationary_potential(const Wavefunction& psi) {
  const Eigen::VectorXd re = psi.amplitudes.real();
  if (psi.amplitudes.imag().cwiseAbs().maxCoeff() > 1e-12 * re.cwiseAbs().maxCoeff() || re.minCoeff() <= 0.0)
    throw InvalidArgument("stationary potential needs a real, strictly positive state");
  const Eigen::VectorXd second = spectral_derivative_real(re, psi.grid.length(), 2);
  const double c = psi.units.hbar * psi.units.hbar / (2.0 * psi.units.mass);
  Potential pot{(c * second.array() / re.array()).matrix()};
  if (!pot.values.allFinite()) throw InvalidArgument("potential has non-finite entries");
  return pot;
}

double norm(const Wavefunction& psi) { return psi.amplitudes.squaredNorm() * psi.grid.dx(); }

Eigen::VectorXd density(const Wavefunction& psi) { return psi.amplitudes.cwiseAbs2(); }

Eigen::VectorXd flux(const Wavefunction& psi) {
  const Eigen::VectorXcd d = spectral_derivative(psi.amplitudes, psi.grid.length());
  const double c = psi.units.hbar / psi.units.mass;
  return (c * (psi.amplitudes.conjugate().cwiseProduct(d)).imag()).eval();
}

double flux_at_origin(const Wavefunction& psi) {
  const Eigen::Index n = psi.grid.points();
  const Eigen::VectorXcd spec = forward_fft(psi.amplitudes);
  const Eigen::VectorXd k = wavenumbers<double>(n, psi.grid.length());
  std::complex<double> slope = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    if (j != n / 2) slope += std::complex<double>(0.0, k[j]) * spec[j];
  slope /= static_cast<double>(n);
  return psi.units.hbar / psi.units.mass * (std::conj(psi.amplitudes[0]) * slope).imag();
}

double energy(const Wavefunction& psi, const Potential& pot) {
  if (pot.values.size() != psi.grid.points()) throw GridMismatch("energy: potential size differs from grid");
  const Eigen::Index n = psi.grid.points();
  const Eigen::VectorXcd spec = forward_fft(psi.amplitudes);
  const Eigen::VectorXd k = wavenumbers<double>(n, psi.grid.length());
  const double c = psi.units.hbar * psi.units.hbar / (2.0 * psi.units.mass);
  double kinetic = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) kinetic += c * k[j] * k[j] * std::norm(spec[j]);
  kinetic *= psi.grid.dx() / static_cast<double>(n);
  const double potential = psi.grid.dx() * density(psi).dot(pot.values);
  return kinetic + potential;
}

Propagator::Propagator(const Grid1D& grid, const Potential& pot, double dt, Units units)
    : grid_(grid), dt_(dt) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (pot.values.size() != grid.points()) throw GridMismatch("propagator: potential size differs from grid");
  if (!pot.values.allFinite()) throw InvalidArgument("potential has non-finite entries");
  const Eigen::Index n = grid.points();
  half_potential_phase_.resize(n);
  kinetic_phase_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    half_potential_phase_[i] = std::polar(1.0, -0.5 * pot.values[i] * dt / units.hbar);
  const Eigen::VectorXd k = wavenumbers<double>(n, grid.length());
  for (Eigen::Index j = 0; j < n; ++j)
    kinetic_phase_[j] = std::polar(1.0, -units.hbar * k[j] * k[j] * dt / (2.0 * units.mass));
}

Wavefunction Propagator::step(const Wavefunction& psi) const {
  require_same_grid(grid_, psi.grid, "propagator step");
  Wavefunction out = psi;
  out.amplitudes = psi.amplitudes.cwiseProduct(half_potential_phase_);
  out.amplitudes = inverse_fft(forward_fft(out.amplitudes).cwiseProduct(kinetic_phase_));
  out.amplitudes = out.amplitudes.cwiseProduct(half_potential_phase_);
  out.time = psi.time + dt_;
  return out;
}

Wavefunction evolve_step(const Wavefunction& psi, const Potential& pot, double dt) {
  return Propagator(psi.grid, pot, dt, psi.units).step(psi);
}

double continuity_residual(const Wavefunction& before, const Wavefunction& after, const Potential& pot,
                           double dt) {
  require_same_grid(before.grid, after.grid, "continuity_residual");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  const Wavefunction mid = Propagator(before.grid, pot, 0.5 * dt, before.units).step(before);
  const Eigen::VectorXd div = spectral_derivative_real(flux(mid), before.grid.length());
  return ((density(after) - density(before)) / dt + div).cwiseAbs().maxCoeff();
}

WaveFields make_fields(const Wavefunction& psi) {
  const Eigen::Index n = psi.grid.points();
  const double L = psi.grid.length();
  const Eigen::VectorXcd spec = forward_fft(psi.amplitudes);
  const Eigen::VectorXd k = wavenumbers<double>(n, L);
  Eigen::VectorXcd s1(n), s2(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    s1[j] = std::complex<double>(0.0, k[j]) * spec[j];
    s2[j] = -k[j] * k[j] * spec[j];
  }
  s1[n / 2] = 0.0;
  const Eigen::VectorXcd d1 = inverse_fft(s1);
  const Eigen::VectorXcd d2 = inverse_fft(s2);
  const Eigen::VectorXcd& p = psi.amplitudes;
  const double c = psi.units.hbar / psi.units.mass;

  const Eigen::VectorXd rho = p.cwiseAbs2();
  const Eigen::VectorXd rho1 = 2.0 * p.conjugate().cwiseProduct(d1).real();
  const Eigen::VectorXd rho2 = 2.0 * p.conjugate().cwiseProduct(d2).real() + 2.0 * d1.cwiseAbs2();
  const Eigen::VectorXd f = c * p.conjugate().cwiseProduct(d1).imag();
  const Eigen::VectorXd f1 = c * p.conjugate().cwiseProduct(d2).imag();

  WaveFields out;
  out.time = psi.time;
  out.max_density = rho.maxCoeff();
  out.density = PeriodicHermite<double>(rho, rho1, L);
  out.density_slope = PeriodicHermite<double>(rho1, rho2, L);
  out.flux = PeriodicHermite<double>(f, f1, L);
  return out;
}

BandLimitedDensity::BandLimitedDensity(const Wavefunction& psi) : grid_(psi.grid) {
  const Eigen::Index n = psi.grid.points();
  const Eigen::VectorXcd spec = forward_fft(psi.amplitudes);
  // Zero-pad to 2n so |psi|^2 is sampled without aliasing; the Nyquist mode
  // is dropped since it has no unique continuous extension.
  Eigen::VectorXcd padded = Eigen::VectorXcd::Zero(2 * n);
  for (Eigen::Index j = 0; j < n / 2; ++j) padded[j] = spec[j];
  for (Eigen::Index j = n / 2 + 1; j < n; ++j) padded[j + n] = spec[j];
  const Eigen::VectorXcd fine = 2.0 * inverse_fft(padded);
  coefficients_ = forward_fft(fine.cwiseAbs2().cast<std::complex<double>>());
  wavenumbers_ = wavenumbers<double>(2 * n, grid_.length());
}

double BandLimitedDensity::integral(double a, double b) const {
  if (!(b >= a) || b - a > grid_.length() * (1.0 + 1e-15))
    throw InvalidArgument("integral bounds must satisfy a <= b <= a + L");
  const Eigen::Index m = coefficients_.size();
  std::complex<double> total = coefficients_[0] * (b - a);
  for (Eigen::Index j = 1; j < m; ++j) {
    const double k = wavenumbers_[j];
    total += coefficients_[j] * (std::polar(1.0, k * b) - std::polar(1.0, k * a)) / std::complex<double>(0.0, k);
  }
  return total.real() / static_cast<double>(m);
}

Eigen::VectorXd BandLimitedDensity::cell_integrals() const {
  const Eigen::Index m = coefficients_.size();
  const double dx = grid_.dx();
  Eigen::VectorXcd g(m);
  g[0] = coefficients_[0] * dx;
  for (Eigen::Index j = 1; j < m; ++j) {
    const double k = wavenumbers_[j];
    g[j] = coefficients_[j] * (std::polar(1.0, k * dx) - 1.0) / std::complex<double>(0.0, k);
  }
  const Eigen::VectorXcd fine = inverse_fft(g);
  Eigen::VectorXd cells(grid_.points());
  for (Eigen::Index i = 0; i < grid_.points(); ++i) cells[i] = fine[2 * i].real();
  return cells;
}

Evolution::Evolution(Wavefunction psi0, const Potential& pot, double dt, Options options)
    : full_(psi0.grid, pot, dt, psi0.units),
      half_(psi0.grid, pot, 0.5 * dt, psi0.units),
      options_(options),
      psi_(std::move(psi0)),
      origin_flux_(flux_at_origin(psi_)) {
  if (options_.fields) fields_ = make_fields(psi_);
}

void Evolution::advance() {
  const Wavefunction half = half_.step(psi_);
  Wavefunction next = full_.step(psi_);
  const double half_flux = flux_at_origin(half);
  const double next_flux = flux_at_origin(next);
  origin_transport_ += full_.dt() / 6.0 * (origin_flux_ + 4.0 * half_flux + next_flux);
  origin_flux_ = next_flux;
  if (options_.fields) {
    previous_fields_ = std::move(fields_);
    if (options_.half_fields) half_fields_ = make_fields(half);
    fields_ = make_fields(next);
  }
  psi_ = std::move(next);
  ++steps_;
}

}  // namespace qdos
