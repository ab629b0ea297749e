#include "qdos/qmap.hpp"

#include <algorithm>
#include <cmath>

#include "qdos/bohm.hpp"
#include "qdos/errors.hpp"

namespace qdos {

namespace {

// Fritsch-Carlson limited endpoint slopes for one cell, so the Hermite
// piece is monotone between the table values.
struct CellSlopes {
  double left, right;
};

CellSlopes limited_slopes(double secant, double left, double right) {
  if (secant <= 0.0) return {0.0, 0.0};
  const double a = left / secant, b = right / secant;
  const double r2 = a * a + b * b;
  if (r2 <= 9.0) return {left, right};
  const double tau = 3.0 / std::sqrt(r2);
  return {tau * a * secant, tau * b * secant};
}

// Cubic Hermite h(t) = a h00 + ma h10 + b h01 + mb h11 on [0, 1] is
// non-negative when it is at both ends and at its interior extrema.
bool hermite_nonnegative(double a, double ma, double b, double mb) {
  if (a < 0.0 || b < 0.0) return false;
  // h'(t) = A t^2 + B t + C
  const double A = 6 * a + 3 * ma - 6 * b + 3 * mb;
  const double B = -6 * a - 4 * ma + 6 * b - 2 * mb;
  const double C = ma;
  auto h = [&](double t) {
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * a + (t3 - 2 * t2 + t) * ma + (-2 * t3 + 3 * t2) * b + (t3 - t2) * mb;
  };
  auto check = [&](double t) { return !(t > 0.0 && t < 1.0) || h(t) >= 0.0; };
  if (std::abs(A) < 1e-300) return std::abs(B) < 1e-300 || check(-C / B);
  const double disc = B * B - 4 * A * C;
  if (disc < 0.0) return true;
  const double r = std::sqrt(disc);
  return check((-B - r) / (2 * A)) && check((-B + r) / (2 * A));
}

}  // namespace

// One table cell. When the density slopes are known and the cubic Hermite
// interpolant of omega stays non-negative, the cumulative is its exact
// integral (a quartic in t) rescaled to hit both table values; otherwise it
// falls back to a monotone cubic through the table with limited slopes.
struct QMap::Cell {
  double q0, q1, dx;
  bool quartic = false;
  double a = 0, ma = 0, b = 0, mb = 0, total = 0;  // quartic data, slopes in t units
  double m0 = 0, m1 = 0;                            // cubic fallback slopes

  double value(double t) const {
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    if (quartic) {
      const double phi = a * (0.5 * t4 - t3 + t) + ma * (0.25 * t4 - 2.0 / 3.0 * t3 + 0.5 * t2) +
                         b * (-0.5 * t4 + t3) + mb * (0.25 * t4 - t3 / 3.0);
      return q0 + (q1 - q0) * (phi / total);
    }
    return (2 * t3 - 3 * t2 + 1) * q0 + (t3 - 2 * t2 + t) * dx * m0 + (-2 * t3 + 3 * t2) * q1 + (t3 - t2) * dx * m1;
  }

  // d value / dt
  double slope(double t) const {
    const double t2 = t * t, t3 = t2 * t;
    if (quartic) {
      const double h = (2 * t3 - 3 * t2 + 1) * a + (t3 - 2 * t2 + t) * ma + (-2 * t3 + 3 * t2) * b + (t3 - t2) * mb;
      return (q1 - q0) * h / total;
    }
    return (6 * t2 - 6 * t) * q0 + (-6 * t2 + 6 * t) * q1 + ((3 * t2 - 4 * t + 1) * m0 + (3 * t2 - 2 * t) * m1) * dx;
  }
};

QMap::QMap(Grid1D grid, Eigen::VectorXd table, Eigen::VectorXd omega, double offset, double time,
           Eigen::VectorXd omega_slope)
    : grid_(grid),
      table_(std::move(table)),
      omega_(std::move(omega)),
      omega_slope_(std::move(omega_slope)),
      offset_(offset),
      time_(time) {
  if (table_.size() != grid_.points() + 1 || omega_.size() != grid_.points() + 1)
    throw GridMismatch("qmap table size must be points + 1");
  if (omega_slope_.size() != 0 && omega_slope_.size() != omega_.size())
    throw GridMismatch("qmap slope table size must be points + 1");
  increments_ = table_.tail(grid_.points()) - table_.head(grid_.points());
}

QMap::Cell QMap::cell(Eigen::Index i) const {
  const double dx = grid_.dx();
  Cell c{table_[i], table_[i + 1], dx};
  const double secant = (c.q1 - c.q0) / dx;
  if (secant <= 0.0) return c;  // flat: value is q0 throughout
  if (omega_slope_.size() != 0) {
    c.a = omega_[i];
    c.b = omega_[i + 1];
    c.ma = omega_slope_[i] * dx;
    c.mb = omega_slope_[i + 1] * dx;
    c.total = 0.5 * (c.a + c.b) + (c.ma - c.mb) / 12.0;
    if (c.total > 0.0 && hermite_nonnegative(c.a, c.ma, c.b, c.mb)) {
      c.quartic = true;
      return c;
    }
  }
  const auto [m0, m1] = limited_slopes(secant, omega_[i], omega_[i + 1]);
  c.m0 = m0;
  c.m1 = m1;
  return c;
}

double QMap::cumulative(double x) const {
  const Eigen::Index n = grid_.points();
  const double dx = grid_.dx();
  if (x <= 0.0) return 0.0;
  if (x >= grid_.length()) return grid_.length();
  const Eigen::Index i = std::min<Eigen::Index>(static_cast<Eigen::Index>(x / dx), n - 1);
  const double t = x / dx - static_cast<double>(i);
  const Cell c = cell(i);
  if (c.q1 <= c.q0) return c.q0;
  return c.value(t);
}

double QMap::solve_cumulative(double u) const {
  const double dx = grid_.dx();
  // First node with table >= u; on a flat run of equal values this is its
  // left end.
  const auto begin = table_.data(), end = table_.data() + table_.size();
  const auto it = std::lower_bound(begin, end, u);
  const Eigen::Index j = it - begin;
  if (j == 0) return 0.0;
  if (j >= table_.size()) return grid_.length();
  if (table_[j] == u) return wrap(grid_.x(j), grid_.length());

  const Cell c = cell(j - 1);
  // Newton on the monotone cell shape, safeguarded by the bracket [lo, hi].
  double lo = 0.0, hi = 1.0;
  double t = (u - c.q0) / (c.q1 - c.q0);
  for (int iter = 0; iter < 100; ++iter) {
    const double f = c.value(t) - u;
    if (f == 0.0) break;
    if (f < 0.0) lo = t; else hi = t;
    const double d = c.slope(t);
    double next = d > 0.0 ? t - f / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-16 || hi - lo <= 1e-16) {
      t = next;
      break;
    }
    t = next;
  }
  return wrap(grid_.x(j - 1) + t * dx, grid_.length());
}

double QMap::forward(double x) const {
  const double L = grid_.length();
  return wrap(offset_ + cumulative(wrap(x, L)), L);
}

double QMap::inverse(double q) const {
  const double L = grid_.length();
  return solve_cumulative(wrap(q - offset_, L));
}

QMap QMap::rotated(double dq) const {
  QMap out = *this;
  out.offset_ += dq;
  return out;
}

QMap build_qmap(const Wavefunction& psi, double origin_transport) {
  const Grid1D& grid = psi.grid;
  const Eigen::Index n = grid.points();
  const double L = grid.length(), dx = grid.dx();
  const WaveFields fields = make_fields(psi);
  const Eigen::VectorXd& rho = fields.density.values();
  const Eigen::VectorXd& slope = fields.density.slopes();

  // Trapezoid plus the Euler-Maclaurin endpoint-slope correction.
  const double c2 = dx * dx / 12.0;
  Eigen::VectorXd cells(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = (i + 1) % n;
    const double cell = 0.5 * dx * (rho[i] + rho[j]) - c2 * (slope[j] - slope[i]);
    cells[i] = std::max(cell, 0.0);
  }
  const double scale = 1.0 / cells.sum();
  cells *= scale * L;

  Eigen::VectorXd table(n + 1);
  table[0] = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) table[i + 1] = table[i] + cells[i];
  table[n] = L;

  Eigen::VectorXd omega(n + 1), omega_slope(n + 1);
  for (Eigen::Index i = 0; i <= n; ++i) {
    omega[i] = scale * L * rho[i % n];
    omega_slope[i] = scale * L * slope[i % n];
  }
  QMap map(grid, std::move(table), std::move(omega), -L * origin_transport, psi.time, std::move(omega_slope));
  map.increments_ = std::move(cells);
  return map;
}

QMap build_qmap(const Evolution& evolution) { return build_qmap(evolution.psi(), evolution.origin_transport()); }

double jacobian_residual(const QMap& map, const Wavefunction& psi) {
  if (!(map.grid() == psi.grid)) throw GridMismatch("jacobian_residual: map and state grids differ");
  const Eigen::VectorXd cells = BandLimitedDensity(psi).cell_integrals();
  const double L = psi.grid.length(), dx = psi.grid.dx();
  const Eigen::VectorXd& dq = map.increments();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < psi.grid.points(); ++i) worst = std::max(worst, std::abs(dq[i] - L * cells[i]) / dx);
  return worst;
}

double transport_check(const Wavefunction& psi0, const Potential& pot, double x0, double T, double dt) {
  const double L = psi0.grid.length();
  const double q0 = build_qmap(psi0).forward(x0);
  double worst = 0.0;
  const double start[] = {x0};
  bohm::integrate(psi0, pot, start, T, dt, [&](const Evolution& evo, std::span<const double> x) {
    const double q = build_qmap(evo).forward(x[0]);
    worst = std::max(worst, std::abs(wrap_signed(q - q0, L)));
  });
  return worst;
}

}  // namespace qdos
