#pragma once

// The monotone coordinate map q(x) whose Jacobian is the density of states
// omega = L |psi|^2, tabulated on the grid with inverse lookup.

#include <Eigen/Core>

#include "qdos/grid_wave.hpp"

namespace qdos {

/// q(x) = offset + L * int_0^x |psi|^2, reduced mod L.
///
/// The table holds the cumulative part at the P+1 nodes 0, dx, ..., L with
/// table(0) = 0 and table(P) = L. On the circle the map is fixed only up to a
/// rotation; offset is that rotation. It is zero for a map built at the start
/// of a run and afterwards equals -L times the mass carried through x = 0, so
/// q stays constant along guidance streamlines.
class QMap {
 public:
  /// omega_slope, if given, holds d omega / dx at the nodes and lets the
  /// map integrate the Hermite interpolant of omega inside each cell.
  QMap(Grid1D grid, Eigen::VectorXd table, Eigen::VectorXd omega, double offset, double time,
       Eigen::VectorXd omega_slope = {});

  const Grid1D& grid() const { return grid_; }
  const Eigen::VectorXd& table() const { return table_; }
  const Eigen::VectorXd& omega() const { return omega_; }
  /// q-length of each grid cell, table(i + 1) - table(i), kept separately so
  /// it carries no cancellation error.
  const Eigen::VectorXd& increments() const { return increments_; }
  double offset() const { return offset_; }
  double time() const { return time_; }

  /// Cumulative part at x in [0, L], without the rotation.
  double cumulative(double x) const;
  /// Leftmost x in [0, L) with cumulative(x) = u, for u in [0, L).
  double solve_cumulative(double u) const;

  double forward(double x) const;
  double inverse(double q) const;

  /// Same map rotated by dq.
  QMap rotated(double dq) const;

 private:
  struct Cell;
  Cell cell(Eigen::Index i) const;

  Grid1D grid_;
  Eigen::VectorXd table_;
  Eigen::VectorXd omega_;
  Eigen::VectorXd omega_slope_;
  Eigen::VectorXd increments_;
  double offset_;
  double time_;

  friend QMap build_qmap(const Wavefunction& psi, double origin_transport);
};

/// Cumulative table by trapezoid quadrature with the Euler-Maclaurin
/// endpoint-slope correction (fourth order); the slope of |psi|^2 comes from
/// spectral derivatives of psi. Inside a cell the map integrates the cubic
/// Hermite interpolant of omega. origin_transport is the time
/// integral of the flux through x = 0 since the reference time.
QMap build_qmap(const Wavefunction& psi, double origin_transport = 0.0);
QMap build_qmap(const Evolution& evolution);

inline double forward(const QMap& map, double x) { return map.forward(x); }
inline double inverse(const QMap& map, double q) { return map.inverse(q); }

/// max over cells of |dQ/dx - L <|psi|^2>_cell|, where the cell average is
/// the exact integral of the band-limited density.
double jacobian_residual(const QMap& map, const Wavefunction& psi);

/// Runs a Bohmian trajectory from x0 and returns the largest circular
/// deviation of Q_t(x(t)) from Q_0(x0) over the run.
double transport_check(const Wavefunction& psi0, const Potential& pot, double x0, double T, double dt);

}  // namespace qdos
