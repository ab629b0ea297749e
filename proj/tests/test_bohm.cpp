#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qdos/bohm.hpp"
#include "qdos/errors.hpp"

using namespace qdos;
using oracle::pi;

TEST_CASE("guidance velocity examples") {
  const Grid1D g = fixtures::grid();

  SUBCASE("plane wave moves at hbar k / m") {
    const WaveFields f = make_fields(fixtures::plane_wave(3, g));
    for (double x : {0.0, 0.123, 0.5, 0.987}) CHECK(bohm::velocity(f, x) == doctest::Approx(6 * pi).epsilon(1e-12));
  }
  SUBCASE("real state has zero velocity") {
    const WaveFields f = make_fields(make_state({.kind = StateKind::RealProfile, .contrast = 0.6}, g));
    for (double x : {0.0, 0.3, 0.77}) CHECK(std::abs(bohm::velocity(f, x)) < 1e-12);
  }
  SUBCASE("standing wave has zero velocity away from nodes") {
    const WaveFields f = make_fields(fixtures::standing_wave(g));
    for (double x : {0.1, 0.4, 0.6, 0.9}) CHECK(std::abs(bohm::velocity(f, x)) < 1e-10);
  }
  SUBCASE("node proximity is refused") {
    CHECK_THROWS_AS(bohm::velocity(fixtures::standing_wave(g), 0.25), NodeProximity);
  }
  SUBCASE("units enter as hbar / m") {
    const Wavefunction psi = make_state({.kind = StateKind::PlaneWave, .mode = 1}, g, {.hbar = 2.0, .mass = 4.0});
    CHECK(bohm::velocity(psi, 0.4) == doctest::Approx(2 * pi * 0.5).epsilon(1e-12));
  }
}

TEST_CASE("integrate examples") {
  const Grid1D g = fixtures::grid();
  const Potential none = fixtures::zero_potential(g);

  SUBCASE("plane wave is uniform motion") {
    const bohm::Trajectory tr = bohm::integrate(fixtures::plane_wave(1, g), none, 0.3, 0.1, 1e-4);
    CHECK(tr.times.size() == 1001);
    CHECK(tr.times.back() == doctest::Approx(0.1));
    CHECK(tr.position(tr.times.size() - 1) == doctest::Approx(wrap(0.3 + 2 * pi * 0.1, 1.0)).epsilon(1e-10));
    CHECK(tr.winding(tr.times.size() - 1) == 0);
  }
  SUBCASE("winding is retained") {
    const bohm::Trajectory tr = bohm::integrate(fixtures::plane_wave(1, g), none, 0.3, 0.5, 1e-4);
    CHECK(tr.unwrapped.back() == doctest::Approx(0.3 + pi).epsilon(1e-10));
    CHECK(tr.winding(tr.times.size() - 1) == 3);
  }
  SUBCASE("real stationary state does not move") {
    const Wavefunction psi = make_state({.kind = StateKind::RealProfile, .contrast = 0.5}, g);
    const bohm::Trajectory tr = bohm::integrate(psi, stationary_potential(psi), 0.42, 0.05, 1e-4);
    CHECK(std::abs(tr.unwrapped.back() - 0.42) < 1e-7);
  }
  SUBCASE("packet centre follows the carrier") {
    const double k0 = 2 * pi * 2;
    const bohm::Trajectory tr = bohm::integrate(fixtures::packet(0.5, 0.05, 2, g), none, 0.5, 0.05, 1e-4);
    CHECK(tr.unwrapped.back() == doctest::Approx(0.5 + k0 * 0.05).epsilon(1e-8));
  }
  SUBCASE("T must be a whole number of steps") {
    CHECK_THROWS_AS(bohm::integrate(fixtures::plane_wave(1, g), none, 0.3, 0.10005, 1e-3), InvalidArgument);
  }
  SUBCASE("start at a node is refused") {
    CHECK_THROWS_AS(bohm::integrate(fixtures::standing_wave(g), none, 0.25, 0.01, 1e-4), NodeProximity);
  }
}

TEST_CASE("trajectories never cross") {
  const Grid1D g = fixtures::grid();
  const std::vector<double> starts = {0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95};
  const auto trajectories = bohm::integrate(fixtures::four_mode(g), fixtures::zero_potential(g), starts, 0.2, 1e-4);
  for (std::size_t s = 0; s < trajectories.front().times.size(); ++s) {
    for (std::size_t w = 0; w + 1 < trajectories.size(); ++w)
      CHECK(trajectories[w].unwrapped[s] < trajectories[w + 1].unwrapped[s]);
    CHECK(trajectories.back().unwrapped[s] < trajectories.front().unwrapped[s] + 1.0);
  }
}
