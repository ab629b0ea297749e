#pragma once

// Entropies, the multinomial volume law, typicality and maximum-entropy
// densities. All entropies are in nats.

#include <span>
#include <vector>

#include <Eigen/Core>
#include <boost/multiprecision/cpp_int.hpp>

#include "qdos/grid_wave.hpp"
#include "qdos/qmap.hpp"

namespace qdos::entropy {

using BigInt = boost::multiprecision::cpp_int;

/// Counts in adjacent equal-width bins covering [0, length).
struct Histogram {
  double length = 1.0;
  std::vector<long> counts;

  static Histogram of(std::span<const double> x, int bins, double length);
  static Histogram of(const Eigen::Ref<const Eigen::VectorXd>& x, int bins, double length);

  long total() const;
  int bins() const { return static_cast<int>(counts.size()); }
  double width() const { return length / static_cast<double>(counts.size()); }
};

/// -sum p_i ln p_i with 0 ln 0 = 0. p must be non-negative and sum to one.
double discrete_entropy(const Eigen::Ref<const Eigen::VectorXd>& p);

/// -(1/M) sum m_i ln(m_i / M).
double histogram_entropy(const Histogram& h);

/// Multinomial M! / prod m_i!, exact. Refuses M > 64; use
/// log_sequence_count there.
BigInt sequence_count(const Histogram& h);

/// ln of the exact multinomial for any M.
double log_sequence_count(const Histogram& h);

/// Natural log of a positive big integer.
double log(const BigInt& n);

struct VolumeLaw {
  double ratio = 1.0;
  bool degenerate = false;  // S_h = 0 and W = 1
};

/// ln W / (M S_h).
VolumeLaw volume_law_ratio(const Histogram& h);

/// -sum_i w_i rho_i ln(rho_i / m_i). Returns -infinity when rho > 0 where
/// the measure vanishes.
double relative_entropy(const Eigen::Ref<const Eigen::VectorXd>& rho, const Eigen::Ref<const Eigen::VectorXd>& measure,
                        const Eigen::Ref<const Eigen::VectorXd>& weights);
/// Periodic grid form: every weight is dx.
double relative_entropy(const Eigen::Ref<const Eigen::VectorXd>& rho, const Eigen::Ref<const Eigen::VectorXd>& measure,
                        double dx);

/// sum over cells of cell * rhobar ln(rhobar / psibar), with bars the cell
/// averages of grid samples. cell must be a whole number of grid spacings
/// that divides the grid.
double coarse_H(const Eigen::Ref<const Eigen::VectorXd>& rho, const Eigen::Ref<const Eigen::VectorXd>& psi_density,
                double dx, double cell);

/// KL divergence of the empirical bin frequencies from bin probabilities.
/// With probabilities of |psi|^2 over the bins this is coarse_H of the
/// ensemble.
double histogram_kl(const Histogram& h, const Eigen::Ref<const Eigen::VectorXd>& probabilities);

/// Probability |psi|^2 assigns to each bin of the histogram layout.
Eigen::VectorXd bin_probabilities(const Wavefunction& psi, int bins);

struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  int pooled_bins = 0;
};

/// Pearson goodness of fit. Bins with expected count below 5 are merged
/// with their right neighbours (the last group joins the one before).
ChiSquare chi_square_test(const Histogram& h, const Eigen::Ref<const Eigen::VectorXd>& probabilities);

/// Half-open interval [a, b) inside [0, L).
struct Interval {
  double a = 0.0;
  double b = 0.0;
};

/// Integral of |psi|^2 over disjoint intervals.
double typicality(const Wavefunction& psi, std::span<const Interval> set);
/// The same set measured in q: its q-length over L.
double q_volume_fraction(const QMap& map, std::span<const Interval> set);

/// Maximum-entropy density relative to a measure m under power-moment
/// constraints E[x^k] = f_k, k = 1..K.
struct MaxEntProblem {
  Eigen::VectorXd x;        // quadrature nodes
  Eigen::VectorXd weights;  // quadrature weights
  Eigen::VectorXd measure;  // m(x) >= 0 at the nodes
  Eigen::VectorXd targets;  // f_1 .. f_K

  // Filled by maxent_solve.
  Eigen::VectorXd lambda;
  double Z = 0.0;
  Eigen::VectorXd rho;
  int iterations = 0;

  /// Trapezoid rule with n intervals on [a, b].
  static MaxEntProblem on_interval(double a, double b, Eigen::Index n, Eigen::VectorXd measure,
                                   Eigen::VectorXd targets);
  /// Periodic grid with weight dx at each node.
  static MaxEntProblem on_grid(const Grid1D& grid, Eigen::VectorXd measure, Eigen::VectorXd targets);

  int order() const { return static_cast<int>(targets.size()); }
  /// E_rho[x^k] - f_k for the stored rho.
  Eigen::VectorXd moment_residuals() const;
  /// relative_entropy(rho, measure) with the problem's weights.
  double entropy_of(const Eigen::Ref<const Eigen::VectorXd>& density) const;
};

/// Damped Newton on the convex dual ln Z(lambda) + lambda . f starting from
/// lambda = 0. Throws NonRealizable when the iteration diverges or stalls
/// above the residual tolerance.
MaxEntProblem maxent_solve(MaxEntProblem problem);

}  // namespace qdos::entropy
