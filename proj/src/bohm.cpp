#include "qdos/bohm.hpp"

#include <cmath>

#include "qdos/errors.hpp"

namespace qdos::bohm {

long Trajectory::winding(std::size_t i) const {
  return static_cast<long>(std::floor(unwrapped[i] / length));
}

std::vector<double> Trajectory::positions() const {
  std::vector<double> out(unwrapped.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = position(i);
  return out;
}

double velocity(const WaveFields& fields, double x) {
  const double rho = fields.density(x);
  if (!(rho > fields.node_floor())) throw NodeProximity(x, rho, fields.node_floor());
  return fields.flux(x) / rho;
}

double velocity(const Wavefunction& psi, double x) { return velocity(make_fields(psi), x); }

long step_count(double T, double dt) {
  if (!(dt > 0.0) || !(T >= 0.0)) throw InvalidArgument("need T >= 0 and dt > 0");
  const double ratio = T / dt;
  const long n = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(n)) > 1e-6) throw InvalidArgument("T must be an integer multiple of dt");
  return n;
}

std::vector<Trajectory> integrate(const Wavefunction& psi0, const Potential& pot, std::span<const double> x0,
                                  double T, double dt, const StepObserver& observer) {
  const long steps = step_count(T, dt);
  const double L = psi0.grid.length();
  Evolution evo(psi0, pot, dt);

  std::vector<double> x(x0.size());
  for (std::size_t w = 0; w < x.size(); ++w) x[w] = wrap(x0[w], L);
  std::vector<Trajectory> out(x.size());
  for (std::size_t w = 0; w < x.size(); ++w) {
    velocity(evo.fields(), x[w]);  // admissibility of the start point
    out[w].walker_id = static_cast<long>(w);
    out[w].length = L;
    out[w].times.reserve(static_cast<std::size_t>(steps) + 1);
    out[w].unwrapped.reserve(static_cast<std::size_t>(steps) + 1);
    out[w].times.push_back(psi0.time);
    out[w].unwrapped.push_back(x[w]);
  }

  for (long s = 0; s < steps; ++s) {
    evo.advance();
    const WaveFields& f0 = evo.previous_fields();
    const WaveFields& fh = evo.half_fields();
    const WaveFields& f1 = evo.fields();
    for (std::size_t w = 0; w < x.size(); ++w) {
      const double k1 = velocity(f0, x[w]);
      const double k2 = velocity(fh, x[w] + 0.5 * dt * k1);
      const double k3 = velocity(fh, x[w] + 0.5 * dt * k2);
      const double k4 = velocity(f1, x[w] + dt * k3);
      x[w] += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      out[w].times.push_back(evo.time());
      out[w].unwrapped.push_back(x[w]);
    }
    if (observer) observer(evo, x);
  }
  return out;
}

Trajectory integrate(const Wavefunction& psi0, const Potential& pot, double x0, double T, double dt) {
  const double start[] = {x0};
  return std::move(integrate(psi0, pot, start, T, dt).front());
}

}  // namespace qdos::bohm
