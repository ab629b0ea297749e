#pragma once

#include <cmath>
#include <vector>

#include "qdos/grid_wave.hpp"

namespace fixtures {

inline qdos::Grid1D grid(Eigen::Index points = 512, double length = 1.0) { return {length, points}; }

inline qdos::Wavefunction uniform(const qdos::Grid1D& g = grid()) {
  return qdos::make_state({.kind = qdos::StateKind::Uniform}, g);
}

inline qdos::Wavefunction plane_wave(int mode = 1, const qdos::Grid1D& g = grid()) {
  return qdos::make_state({.kind = qdos::StateKind::PlaneWave, .mode = mode}, g);
}

/// Equal superposition of modes +1 and -1: |psi|^2 = (2/L) cos^2(2 pi x / L).
inline qdos::Wavefunction standing_wave(const qdos::Grid1D& g = grid()) {
  return qdos::make_state({.kind = qdos::StateKind::TwoMode, .modes = {{1, 1.0}, {-1, 1.0}}}, g);
}

/// Modes 0 and 1 with opposite sign: |psi|^2 = (2/L) sin^2(pi x / L) at t = 0.
inline qdos::Wavefunction sin2_state(const qdos::Grid1D& g = grid()) {
  return qdos::make_state({.kind = qdos::StateKind::TwoMode, .modes = {{0, 1.0}, {1, -1.0}}}, g);
}

/// Unequal two-mode superposition with a travelling, node-free density.
inline qdos::Wavefunction two_mode(const qdos::Grid1D& g = grid()) {
  return qdos::make_state({.kind = qdos::StateKind::TwoMode, .modes = {{0, 0.8}, {1, 0.6}}}, g);
}

/// Four-mode superposition used for relaxation runs.
inline qdos::Wavefunction four_mode(const qdos::Grid1D& g = grid()) {
  return qdos::make_state({.kind = qdos::StateKind::Superposition,
                           .modes = {{0, 1.0}, {1, {0.0, 0.9}}, {-2, 0.7}, {3, {0.5, -0.3}}}},
                          g);
}

inline qdos::Wavefunction packet(double center = 0.5, double width = 0.05, int momentum_mode = 0,
                                 const qdos::Grid1D& g = grid()) {
  return qdos::make_state(
      {.kind = qdos::StateKind::Gaussian, .center = center, .width = width, .momentum_mode = momentum_mode}, g);
}

inline qdos::Potential zero_potential(const qdos::Grid1D& g = grid()) {
  return {Eigen::VectorXd::Zero(g.points())};
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace fixtures
