#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qdos/bohm.hpp"
#include "qdos/errors.hpp"
#include "qdos/qwalk.hpp"

using namespace qdos;
using oracle::pi;
using qwalk::KernelKind;
using qwalk::TransitionKernel;

namespace {

std::vector<double> every_step(double T, double dt) {
  std::vector<double> t;
  const long n = bohm::step_count(T, dt);
  for (long s = 0; s <= n; ++s) t.push_back(static_cast<double>(s) * dt);
  return t;
}

// Max circular distance between a zero-kernel q-walk and RK4 Bohm paths.
double zero_noise_gap(const Wavefunction& psi0, const std::vector<double>& x0, double T, double dt) {
  const Potential none = fixtures::zero_potential(psi0.grid);
  const TransitionKernel zero{.kind = KernelKind::Zero};
  const auto walkers = qwalk::walkers_at(build_qmap(psi0), x0, zero, 1);
  const auto trace = qwalk::evolve_ensemble(walkers, zero, psi0, none, T, dt, every_step(T, dt));
  const auto paths = bohm::integrate(psi0, none, x0, T, dt);
  double worst = 0.0;
  for (std::size_t s = 0; s < trace.times.size(); ++s)
    for (std::size_t w = 0; w < x0.size(); ++w)
      worst = std::max(worst, std::abs(wrap_signed(trace.x[s][static_cast<Eigen::Index>(w)] - paths[w].unwrapped[s], 1.0)));
  return worst;
}

// Simpson integral of the predicted density over each of n equal bins.
std::vector<double> predicted_bin_probabilities(const QMap& map1, const QMap& map2, const Wavefunction& psi2,
                                                double x1, const TransitionKernel& kernel, double tau, int bins) {
  const int sub = 64;
  const double L = psi2.grid.length(), h = L / bins / sub;
  std::vector<double> xs(static_cast<std::size_t>(bins * sub + 1));
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = std::min(static_cast<double>(i) * h, std::nextafter(L, 0.0));
  const Eigen::VectorXd f = qwalk::conditional_density_predicted(map1, map2, psi2, x1, kernel, tau, xs);
  std::vector<double> probs(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    double s = 0.0;
    for (int k = 0; k < sub; k += 2) {
      const Eigen::Index i = b * sub + k;
      s += f[i] + 4.0 * f[i + 1] + f[i + 2];
    }
    probs[static_cast<std::size_t>(b)] = s * h / 3.0;
  }
  return probs;
}

std::vector<double> histogram(const Eigen::VectorXd& x, int bins, double L) {
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double v : x) counts[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(v / L * bins)))] += 1.0;
  return counts;
}

}  // namespace

TEST_CASE("kernel names round trip") {
  for (auto k : {KernelKind::WrappedGaussian, KernelKind::UniformJump, KernelKind::UniformVelocity, KernelKind::Zero})
    CHECK(qwalk::parse_kernel_kind(qwalk::to_string(k)) == k);
  CHECK_THROWS_AS(qwalk::parse_kernel_kind("levy"), InvalidArgument);
  CHECK(TransitionKernel{}.diffusion({}) == 0.5);
  CHECK(TransitionKernel{.power = 2.0}.diffusion({.hbar = 1.0, .mass = 2.0}) == doctest::Approx(0.125));
}

TEST_CASE("step examples") {
  const Grid1D g = fixtures::grid();

  SUBCASE("zero kernel on a plane wave moves at hbar k / m") {
    const Wavefunction psi0 = fixtures::plane_wave(1, g);
    const double dt = 1e-4;
    Evolution evo(psi0, fixtures::zero_potential(g), dt);
    const TransitionKernel zero{.kind = KernelKind::Zero};
    const double start[] = {0.3};
    auto walker = qwalk::walkers_at(build_qmap(psi0), start, zero, 7).front();
    evo.advance();
    walker = qwalk::step(walker, zero, build_qmap(evo), dt);
    CHECK(walker.x == doctest::Approx(0.3 + 2 * pi * dt).epsilon(1e-10));
    const bohm::Trajectory tr = bohm::integrate(psi0, fixtures::zero_potential(g), 0.3, dt, dt);
    CHECK(std::abs(walker.x - tr.position(1)) < 1e-10);
  }

  SUBCASE("identity map: increments follow the kernel law") {
    const QMap identity = build_qmap(fixtures::uniform(g));
    const TransitionKernel kernel{};
    const double dt = 1e-4, var = 2.0 * kernel.diffusion({}) * dt;
    const std::size_t M = 100000;
    const double start[] = {0.5};
    const auto base = qwalk::walkers_at(identity, start, kernel, 99).front();
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      qwalk::WalkerState w = base;
      w.rng = WalkerRandom(99, i);
      const double d = wrap_signed(qwalk::step(w, kernel, identity, dt).x - 0.5, 1.0);
      sum += d;
      sum2 += d * d;
    }
    const double mean = sum / M, second = sum2 / M;
    CHECK(std::abs(mean) < 3.0 * std::sqrt(var / M));
    CHECK(std::abs(second - var) < 3.0 * std::sqrt(2.0) * var / std::sqrt(static_cast<double>(M)));
  }

  SUBCASE("walkers pass through the node of a standing wave") {
    const TransitionKernel kernel{};
    const Wavefunction psi0 = fixtures::standing_wave(g);
    const std::vector<double> start(200, 0.2);
    long crossed = 0;
    std::vector<char> seen(start.size(), 0);
    std::vector<double> samples;
    for (int s = 0; s <= 100; ++s) samples.push_back(s * 0.01);
    auto walkers = qwalk::walkers_at(build_qmap(psi0), start, kernel, 3);
    qwalk::run_ensemble(walkers, kernel, psi0, fixtures::zero_potential(g), 1.0, 1e-4, samples,
                        [&](const Evolution&, const QMap&, std::span<const qwalk::WalkerState> ws) {
                          for (const auto& w : ws)
                            if (w.x > 0.26 && w.x < 0.74 && !seen[static_cast<std::size_t>(w.id)]) {
                              seen[static_cast<std::size_t>(w.id)] = 1;
                              ++crossed;
                            }
                        });
    MESSAGE(crossed << " of 200 walkers crossed x = L/4");
    CHECK(crossed > 0);
  }
}

TEST_CASE("increments have zero circular mean for every kernel") {
  const std::size_t M = 1000000;
  const double dt = 1e-4;
  for (auto kind : {KernelKind::WrappedGaussian, KernelKind::UniformJump, KernelKind::UniformVelocity, KernelKind::Zero}) {
    const TransitionKernel kernel{.kind = kind};
    const QMap identity = build_qmap(fixtures::uniform());
    std::vector<double> x(M, 0.5);
    auto walkers = qwalk::walkers_at(identity, x, kernel, 2024);
    double c = 0.0, s = 0.0, sum = 0.0, sum2 = 0.0;
    for (auto& w : walkers) {
      const double d = qwalk::draw_increment(kernel, w, dt, {});
      c += std::cos(2 * pi * d);
      s += std::sin(2 * pi * d);
      sum += d;
      sum2 += d * d;
    }
    const double circular_mean = std::atan2(s, c) / (2 * pi);
    const double sd = std::sqrt(std::max(sum2 / M - (sum / M) * (sum / M), 0.0));
    CAPTURE(qwalk::to_string(kind));
    CHECK(std::abs(circular_mean) <= 4.0 * sd / std::sqrt(static_cast<double>(M)));
  }
}

TEST_CASE("zero kernel reproduces Bohmian trajectories") {
  const Grid1D g = fixtures::grid();
  const std::vector<double> x0 = {0.1, 0.3, 0.45, 0.6, 0.85};
  SUBCASE("plane wave") { CHECK(zero_noise_gap(fixtures::plane_wave(1, g), x0, 0.2, 1e-4) < 1e-6); }
  SUBCASE("packet") { CHECK(zero_noise_gap(fixtures::packet(0.5, 0.1, 2, g), {0.4, 0.5, 0.6}, 0.05, 1e-4) < 1e-3); }
  SUBCASE("two-mode") { CHECK(zero_noise_gap(fixtures::two_mode(g), x0, 0.2, 1e-4) < 1e-3); }

  SUBCASE("walkers started together stay together") {
    const TransitionKernel zero{.kind = KernelKind::Zero};
    const Wavefunction psi0 = fixtures::four_mode(g);
    const std::vector<double> x(16, 0.37);
    const auto trace = qwalk::evolve_ensemble(qwalk::walkers_at(build_qmap(psi0), x, zero, 5), zero, psi0,
                                              fixtures::zero_potential(g), 0.1, 1e-4, std::vector<double>{0.05, 0.1});
    REQUIRE(trace.times.size() == 2);
    for (const auto& xs : trace.x) CHECK(xs.maxCoeff() == xs.minCoeff());
  }
}

TEST_CASE("ensemble runs are reproducible and validate sample times") {
  const Grid1D g = fixtures::grid(128);
  const Wavefunction psi0 = fixtures::two_mode(g);
  const TransitionKernel kernel{};
  const auto a = qwalk::evolve_ensemble(qwalk::equilibrium_walkers(build_qmap(psi0), 500, kernel, 11), kernel, psi0,
                                        fixtures::zero_potential(g), 0.05, 1e-4, std::vector<double>{0.05});
  const auto b = qwalk::evolve_ensemble(qwalk::equilibrium_walkers(build_qmap(psi0), 500, kernel, 11), kernel, psi0,
                                        fixtures::zero_potential(g), 0.05, 1e-4, std::vector<double>{0.05});
  CHECK(a.x.back() == b.x.back());
  const auto c = qwalk::evolve_ensemble(qwalk::equilibrium_walkers(build_qmap(psi0), 500, kernel, 12), kernel, psi0,
                                        fixtures::zero_potential(g), 0.05, 1e-4, std::vector<double>{0.05});
  CHECK(a.x.back() != c.x.back());
  CHECK_THROWS_AS(qwalk::evolve_ensemble({}, kernel, psi0, fixtures::zero_potential(g), 0.05, 1e-4,
                                         std::vector<double>{0.03333}),
                  InvalidArgument);
}

TEST_CASE("quantum equilibrium is preserved") {
  const Grid1D g = fixtures::grid();
  const Wavefunction psi0 = fixtures::two_mode(g);
  const std::size_t M = 10000;
  const int bins = 64;
  for (auto kind : {KernelKind::WrappedGaussian, KernelKind::UniformJump, KernelKind::Zero}) {
    const TransitionKernel kernel{.kind = kind};
    double kl = -1.0;
    auto walkers = qwalk::equilibrium_walkers(build_qmap(psi0), M, kernel, 77);
    qwalk::run_ensemble(walkers, kernel, psi0, fixtures::zero_potential(g), 0.25, 1e-4, std::vector<double>{0.25},
                        [&](const Evolution& evo, const QMap&, std::span<const qwalk::WalkerState> ws) {
                          const BandLimitedDensity exact(evo.psi());
                          std::vector<double> probs(bins), counts(bins, 0.0);
                          for (int b = 0; b < bins; ++b) probs[b] = exact.integral(b * 1.0 / bins, (b + 1) * 1.0 / bins);
                          for (const auto& w : ws) counts[std::min(bins - 1, static_cast<int>(w.x * bins))] += 1.0;
                          kl = oracle::histogram_kl(counts, probs);
                        });
    CAPTURE(qwalk::to_string(kind));
    MESSAGE("KL " << kl);
    CHECK(kl >= 0.0);
    CHECK(kl < 3.0 * (bins - 1) / (2.0 * M));
  }
}

TEST_CASE("conditional density prediction") {
  const Grid1D g = fixtures::grid();
  const TransitionKernel kernel{};
  const double tau = 1e-3;

  SUBCASE("uniform state gives the kernel itself") {
    const QMap id = build_qmap(fixtures::uniform(g));
    const Eigen::VectorXd p = qwalk::conditional_density_predicted(id, id, fixtures::uniform(g), 0.3, kernel, tau);
    const double sigma = std::sqrt(2.0 * 0.5 * tau);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < g.points(); ++i)
      worst = std::max(worst, std::abs(p[i] - oracle::wrapped_normal(g.x(i) - 0.3, sigma, 1.0)));
    CHECK(worst < 1e-9);
    CHECK(p.sum() * g.dx() == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("prediction integrates to one after evolution") {
    const Wavefunction psi1 = fixtures::sin2_state(g);
    Evolution evo(psi1, fixtures::zero_potential(g), tau, {.fields = false, .half_fields = false});
    evo.advance();
    for (double x1 : {0.5, 0.2, 0.93}) {
      const Eigen::VectorXd p =
          qwalk::conditional_density_predicted(build_qmap(psi1), build_qmap(evo), evo.psi(), x1, kernel, tau);
      CHECK(std::abs(p.sum() * g.dx() - 1.0) < 1e-6);
      CHECK(p.minCoeff() >= 0.0);
    }
  }

  SUBCASE("broad kernels relax to |psi|^2") {
    const Wavefunction psi = fixtures::four_mode(g);
    const QMap map = build_qmap(psi);
    const TransitionKernel broad{.alpha = 100.0};
    const Eigen::VectorXd p = qwalk::conditional_density_predicted(map, map, psi, 0.4, broad, 1e-2);
    CHECK((p - density(psi)).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("uniform jump integrates to one") {
    const QMap id = build_qmap(fixtures::uniform(g));
    const TransitionKernel jump{.kind = KernelKind::UniformJump};
    const Eigen::VectorXd p = qwalk::conditional_density_predicted(id, id, fixtures::uniform(g), 0.5, jump, tau);
    CHECK(p.sum() * g.dx() == doctest::Approx(1.0).epsilon(0.02));
    CHECK(qwalk::increment_density(jump, 0.0, 1.0, 1.0, {}) > 0.0);
  }

  SUBCASE("zero kernel has no density") {
    const QMap id = build_qmap(fixtures::uniform(g));
    CHECK_THROWS_AS(qwalk::conditional_density_predicted(id, id, fixtures::uniform(g), 0.5,
                                                         TransitionKernel{.kind = KernelKind::Zero}, tau),
                    DegenerateDensity);
  }
}

TEST_CASE("one-step Monte Carlo matches the predicted conditional law") {
  const Grid1D g = fixtures::grid();
  const TransitionKernel kernel{};
  const double tau = 1e-3;
  const std::size_t M = 100000;
  const int bins = 64;

  auto p_value = [&](const Wavefunction& psi1, double x1) {
    std::vector<double> x(M, x1);
    auto walkers = qwalk::walkers_at(build_qmap(psi1), x, kernel, 4242);
    std::vector<double> probs, counts;
    qwalk::run_ensemble(walkers, kernel, psi1, fixtures::zero_potential(g), tau, tau, std::vector<double>{tau},
                        [&](const Evolution& evo, const QMap& map2, std::span<const qwalk::WalkerState> ws) {
                          probs = predicted_bin_probabilities(build_qmap(psi1), map2, evo.psi(), x1, kernel, tau, bins);
                          Eigen::VectorXd xs(static_cast<Eigen::Index>(ws.size()));
                          for (std::size_t i = 0; i < ws.size(); ++i) xs[static_cast<Eigen::Index>(i)] = ws[i].x;
                          counts = histogram(xs, bins, 1.0);
                        });
    std::vector<double> expected(probs.size());
    double total = 0.0;
    for (double p : probs) total += p;
    for (std::size_t b = 0; b < probs.size(); ++b) expected[b] = probs[b] / total * static_cast<double>(M);
    const auto [stat, dof] = oracle::pooled_chi_square(counts, expected);
    const double p = oracle::chi_square_sf(stat, dof);
    MESSAGE("chi2 " << stat << " dof " << dof << " p " << p << " mass " << total);
    return p;
  };

  SUBCASE("identity map") { CHECK(p_value(fixtures::uniform(g), 0.5) > 0.01); }
  SUBCASE("sin^2 map") { CHECK(p_value(fixtures::sin2_state(g), 0.5) > 0.01); }
}
