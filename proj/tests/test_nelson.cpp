#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qdos/errors.hpp"
#include "qdos/nelson.hpp"

using namespace qdos;
using nelson::CrossingDetector;
using oracle::pi;

TEST_CASE("drift examples") {
  const Grid1D g = fixtures::grid();
  SUBCASE("plane wave: osmotic part vanishes") {
    CHECK(nelson::drift(make_fields(fixtures::plane_wave(1, g)), 0.3, 0.5) == doctest::Approx(2 * pi).epsilon(1e-10));
  }
  SUBCASE("real profile: pure osmotic velocity") {
    const double c = 0.5;
    const WaveFields f = make_fields(make_state({.kind = StateKind::RealProfile, .contrast = c}, g));
    for (double x : {0.1, 0.33, 0.8}) {
      const double expected = 0.5 * 2 * pi * c * std::sin(2 * pi * x) / (1 - c * std::cos(2 * pi * x));
      CHECK(nelson::drift(f, x, 0.5) == doctest::Approx(expected).epsilon(1e-8));
    }
  }
  SUBCASE("nodes are refused") {
    CHECK_THROWS_AS(nelson::drift(make_fields(fixtures::standing_wave(g)), 0.25, 0.5), NodeProximity);
    WalkerRandom rng(1, 0);
    CHECK_THROWS_AS(nelson::nelson_step(0.75, fixtures::standing_wave(g), {}, rng), NodeProximity);
  }
  SUBCASE("parameters") {
    CHECK(nelson::NelsonParams::for_units({.hbar = 1.0, .mass = 2.0}, 1e-3).nu == 0.25);
    CHECK_THROWS_AS(nelson::nelson_step(0.5, make_fields(fixtures::uniform(g)), {.nu = 0.0, .dt = 1e-4}, 0.1),
                    InvalidArgument);
  }
}

TEST_CASE("uniform state gives Brownian motion") {
  const WaveFields f = make_fields(fixtures::uniform());
  const nelson::NelsonParams p{.nu = 0.5, .dt = 1e-4};
  const std::size_t M = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    WalkerRandom rng(8, i);
    const double d = wrap_signed(nelson::nelson_step(0.5, f, p, rng.normal()) - 0.5, 1.0);
    sum += d;
    sum2 += d * d;
  }
  const double var = 2 * p.nu * p.dt;
  CHECK(std::abs(sum / M) < 3.0 * std::sqrt(var / M));
  CHECK(std::abs(sum2 / M - var) < 3.0 * std::sqrt(2.0) * var / std::sqrt(static_cast<double>(M)));
}

TEST_CASE("single walker samples a static density") {
  // One walker, 10^6 steps of 1e-3. The osmotic relaxation time of this
  // profile is about 1 / (4 pi^2 nu) = 0.05, so the run holds far more than
  // 10^4 independent samples; the floor below is the one for 10^4.
  const Grid1D g = fixtures::grid();
  const Wavefunction psi = make_state({.kind = StateKind::RealProfile, .contrast = 0.5}, g);
  const int bins = 64;
  const BandLimitedDensity exact(psi);
  std::vector<double> probs(bins), counts(bins, 0.0);
  for (int b = 0; b < bins; ++b) probs[b] = exact.integral(b * 1.0 / bins, (b + 1) * 1.0 / bins);
  const double start[] = {0.5};
  auto walkers = nelson::walkers_at(start, 5, 1.0);
  nelson::run_ensemble(
      walkers, psi, fixtures::zero_potential(g), 1000.0, {.nu = 0.5, .dt = 1e-3}, 1,
      [&](double, std::span<const nelson::Walker> ws) { counts[std::min(bins - 1, static_cast<int>(ws[0].x * bins))] += 1; },
      false);
  const double kl = oracle::histogram_kl(counts, probs);
  MESSAGE("KL " << kl);
  CHECK(kl < 3.0 * (bins - 1) / (2.0 * 1e4));
}

TEST_CASE("crossing detector") {
  CrossingDetector det({0.75, 0.25}, 1.0, 0.004, 6);
  auto feed = [&](std::size_t w, std::vector<double> xs) {
    for (double x : xs) det.observe(w, x);
    return det.crossings(w);
  };
  CHECK(feed(0, {0.2, 0.24, 0.3}) == 1);
  CHECK(feed(1, {0.2, 0.2495, 0.2505, 0.2}) == 0);  // jitter inside the band
  CHECK(feed(2, {0.2, 0.2495, 0.3}) == 1);          // band entered, left on the far side
  CHECK(feed(3, {0.8, 0.95, 0.1, 0.2}) == 0);       // through x = 0, no node
  CHECK(feed(4, {0.7, 0.8, 0.7, 0.8}) == 3);
  CHECK(feed(5, {0.1, 0.4, 0.6, 0.9, 0.1, 0.4}) == 3);
  CHECK(det.total() == 8);

  CrossingDetector single({0.5}, 1.0, 0.01, 1);
  for (double x : {0.4, 0.6, 0.9, 0.2, 0.4, 0.6}) single.observe(0, x);
  CHECK(single.crossings(0) == 2);  // one node, passed twice while winding once

  const nelson::CrossingRate r = nelson::summarize(det, 2.0, "test", 1e-4);
  CHECK(r.rate == doctest::Approx(8.0 / 6.0 / 2.0));
  CHECK(r.ci_low <= r.rate);
  CHECK(r.ci_high >= r.rate);
  CHECK_THROWS_AS(CrossingDetector({}, 1.0, 0.01, 1), InvalidArgument);
}

TEST_CASE("Nelson walkers rarely cross a node that q-space walkers cross freely") {
  const Grid1D g = fixtures::grid();
  const nelson::CrossingSetup setup{.psi0 = fixtures::standing_wave(g),
                                    .potential = fixtures::zero_potential(g),
                                    .nodes = {0.25, 0.75},
                                    .start = 0.2,
                                    .walkers = 500,
                                    .T = 0.5,
                                    .sample_interval = 1e-4,
                                    .seed = 31,
                                    .stationary = true};
  const nelson::CrossingRate n = nelson::nelson_crossings(setup, 1e-4);
  const nelson::CrossingRate q = nelson::qwalk_crossings(setup, {}, 1e-4);
  MESSAGE("nelson " << n.rate << " qwalk " << q.rate);
  CHECK(q.crossings > 0);
  CHECK(q.rate >= 10.0 * n.ci_high);
  CHECK(n.dynamics == "nelson");
  CHECK(q.walkers == 500);
}

TEST_CASE("co-evolved and frozen fields agree for a stationary state") {
  const Grid1D g = fixtures::grid();
  const Wavefunction psi = make_state({.kind = StateKind::RealProfile, .contrast = 0.4}, g);
  const std::vector<double> x0 = {0.1, 0.5, 0.9};
  auto a = nelson::walkers_at(x0, 3, 1.0), b = a;
  const nelson::NelsonParams p{.nu = 0.5, .dt = 1e-4};
  nelson::run_ensemble(a, psi, stationary_potential(psi), 0.05, p, 10, {}, true);
  nelson::run_ensemble(b, psi, stationary_potential(psi), 0.05, p, 10, {}, false);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(wrap_signed(a[i].x - b[i].x, 1.0)) < 1e-5);
}
