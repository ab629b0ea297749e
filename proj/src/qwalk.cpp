#include "qdos/qwalk.hpp"

#include <cmath>
#include <numbers>

#include "qdos/bohm.hpp"
#include "qdos/errors.hpp"
#include "qdos/parallel.hpp"

namespace qdos::qwalk {

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "wrapped-gaussian") return KernelKind::WrappedGaussian;
  if (name == "uniform-jump") return KernelKind::UniformJump;
  if (name == "uniform-velocity") return KernelKind::UniformVelocity;
  if (name == "zero") return KernelKind::Zero;
  throw InvalidArgument("unknown kernel kind '" + std::string(name) + "'");
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::WrappedGaussian: return "wrapped-gaussian";
    case KernelKind::UniformJump: return "uniform-jump";
    case KernelKind::UniformVelocity: return "uniform-velocity";
    case KernelKind::Zero: return "zero";
  }
  return "?";
}

double TransitionKernel::diffusion(const Units& units) const {
  if (kind == KernelKind::Zero) return 0.0;
  return alpha * units.hbar / std::pow(units.mass, power);
}

double TransitionKernel::half_width(double tau, const Units& units) const {
  if (kind == KernelKind::UniformVelocity) return speed * tau;
  return std::sqrt(6.0 * diffusion(units) * tau);
}

double wrapped_normal_density(double d, double sigma, double length) {
  using std::numbers::pi;
  d = wrap_signed(d, length);
  if (sigma < length / 3.0) {
    double total = 0.0;
    for (int n = -4; n <= 4; ++n) {
      const double z = (d + n * length) / sigma;
      total += std::exp(-0.5 * z * z);
    }
    return total / (sigma * std::sqrt(2.0 * pi));
  }
  // Broad case: the Fourier series converges in a handful of terms.
  double total = 1.0;
  for (int k = 1; k <= 12; ++k) {
    const double a = 2.0 * pi * k / length;
    total += 2.0 * std::exp(-0.5 * a * a * sigma * sigma) * std::cos(a * d);
  }
  return total / length;
}

namespace {

// Wrapped uniform on [-a, a]: number of images of d inside the window over
// the window width.
double wrapped_uniform_density(double d, double a, double length) {
  d = wrap_signed(d, length);
  const long reach = static_cast<long>(std::ceil(a / length)) + 1;
  long inside = 0;
  for (long n = -reach; n <= reach; ++n)
    if (std::abs(d + static_cast<double>(n) * length) <= a) ++inside;
  return static_cast<double>(inside) / (2.0 * a);
}

}  // namespace

double increment_density(const TransitionKernel& kernel, double dq, double tau, double length, const Units& units) {
  if (!(tau > 0.0)) throw InvalidArgument("increment_density: tau must be positive");
  switch (kernel.kind) {
    case KernelKind::WrappedGaussian:
      return wrapped_normal_density(dq, std::sqrt(2.0 * kernel.diffusion(units) * tau), length);
    case KernelKind::UniformJump:
    case KernelKind::UniformVelocity:
      return wrapped_uniform_density(dq, kernel.half_width(tau, units), length);
    case KernelKind::Zero:
      break;
  }
  throw DegenerateDensity("zero kernel has a point-mass increment law; no density exists");
}

double draw_increment(const TransitionKernel& kernel, WalkerState& walker, double dt, const Units& units) {
  switch (kernel.kind) {
    case KernelKind::WrappedGaussian: return std::sqrt(2.0 * kernel.diffusion(units) * dt) * walker.rng.normal();
    case KernelKind::UniformJump: return kernel.half_width(dt, units) * (2.0 * walker.rng.uniform() - 1.0);
    case KernelKind::UniformVelocity: return walker.velocity * dt;
    case KernelKind::Zero: return 0.0;
  }
  return 0.0;
}

namespace {

WalkerState new_walker(long id, const TransitionKernel& kernel, std::uint64_t seed) {
  WalkerState w;
  w.id = id;
  w.rng = WalkerRandom(seed, static_cast<std::uint64_t>(id));
  if (kernel.kind == KernelKind::UniformVelocity) w.velocity = kernel.speed * (2.0 * w.rng.uniform() - 1.0);
  return w;
}

}  // namespace

std::vector<WalkerState> walkers_at(const QMap& map, std::span<const double> x, const TransitionKernel& kernel,
                                    std::uint64_t seed, const Units&) {
  std::vector<WalkerState> out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    WalkerState w = new_walker(static_cast<long>(i), kernel, seed);
    w.x = wrap(x[i], map.grid().length());
    w.q = map.forward(w.x);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<WalkerState> equilibrium_walkers(const QMap& map, std::size_t count, const TransitionKernel& kernel,
                                             std::uint64_t seed, const Units&) {
  const double L = map.grid().length();
  std::vector<WalkerState> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    WalkerState w = new_walker(static_cast<long>(i), kernel, seed);
    w.q = wrap(L * w.rng.uniform(), L);
    w.x = map.inverse(w.q);
    out.push_back(std::move(w));
  }
  return out;
}

WalkerState step(WalkerState walker, const TransitionKernel& kernel, const QMap& map_next, double dt,
                 const Units& units) {
  const double L = map_next.grid().length();
  walker.q = wrap(walker.q + draw_increment(kernel, walker, dt, units), L);
  walker.x = map_next.inverse(walker.q);
  return walker;
}

void run_ensemble(std::vector<WalkerState>& walkers, const TransitionKernel& kernel, const Wavefunction& psi0,
                  const Potential& pot, double T, double dt, std::span<const double> sample_times,
                  const SampleObserver& observer) {
  const long steps = bohm::step_count(T, dt);
  std::vector<char> sample_at(static_cast<std::size_t>(steps) + 1, 0);
  for (double t : sample_times) {
    if (t < 0.0 || t > T * (1.0 + 1e-12)) throw InvalidArgument("sample time outside [0, T]");
    sample_at[static_cast<std::size_t>(bohm::step_count(t, dt))] = 1;
  }

  const double L = psi0.grid.length();
  const Units units = psi0.units;
  Evolution evo(psi0, pot, dt, {.fields = false, .half_fields = false});

  auto synchronize = [&] {
    const QMap map = build_qmap(evo);
    parallel_for(walkers.size(), [&](std::size_t i) { walkers[i].x = map.inverse(walkers[i].q); });
    if (observer) observer(evo, map, walkers);
  };

  if (sample_at[0]) synchronize();
  for (long s = 1; s <= steps; ++s) {
    evo.advance();
    if (kernel.kind != KernelKind::Zero) {
      parallel_for(walkers.size(), [&](std::size_t i) {
        WalkerState& w = walkers[i];
        w.q = wrap(w.q + draw_increment(kernel, w, dt, units), L);
      });
    }
    if (sample_at[static_cast<std::size_t>(s)]) synchronize();
  }
}

EnsembleTrace evolve_ensemble(std::vector<WalkerState> walkers, const TransitionKernel& kernel,
                              const Wavefunction& psi0, const Potential& pot, double T, double dt,
                              std::span<const double> sample_times) {
  EnsembleTrace trace;
  run_ensemble(walkers, kernel, psi0, pot, T, dt, sample_times,
               [&](const Evolution& evo, const QMap&, std::span<const WalkerState> ws) {
                 Eigen::VectorXd x(static_cast<Eigen::Index>(ws.size())), q(x.size());
                 for (std::size_t i = 0; i < ws.size(); ++i) {
                   x[static_cast<Eigen::Index>(i)] = ws[i].x;
                   q[static_cast<Eigen::Index>(i)] = ws[i].q;
                 }
                 trace.times.push_back(evo.time());
                 trace.x.push_back(std::move(x));
                 trace.q.push_back(std::move(q));
               });
  return trace;
}

Eigen::VectorXd conditional_density_predicted(const QMap& map1, const QMap& map2, const Wavefunction& psi2,
                                              double x1, const TransitionKernel& kernel, double tau,
                                              std::span<const double> x2) {
  if (kernel.kind == KernelKind::Zero)
    throw DegenerateDensity("zero kernel: the conditional law is a point mass on the Bohmian image of x1");
  if (!(map1.grid() == map2.grid()) || !(map2.grid() == psi2.grid))
    throw GridMismatch("conditional_density_predicted: maps and state must share a grid");
  const double L = psi2.grid.length();
  const double q1 = map1.forward(x1);
  const WaveFields fields = make_fields(psi2);
  Eigen::VectorXd out(static_cast<Eigen::Index>(x2.size()));
  for (std::size_t i = 0; i < x2.size(); ++i) {
    const double rho = std::max(fields.density(x2[i]), 0.0);
    out[static_cast<Eigen::Index>(i)] =
        L * rho * increment_density(kernel, map2.forward(x2[i]) - q1, tau, L, psi2.units);
  }
  return out;
}

Eigen::VectorXd conditional_density_predicted(const QMap& map1, const QMap& map2, const Wavefunction& psi2,
                                              double x1, const TransitionKernel& kernel, double tau) {
  const Eigen::VectorXd nodes = psi2.grid.nodes();
  return conditional_density_predicted(map1, map2, psi2, x1, kernel, tau,
                                       std::span<const double>(nodes.data(), static_cast<std::size_t>(nodes.size())));
}

}  // namespace qdos::qwalk
