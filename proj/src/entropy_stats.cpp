#include "qdos/entropy_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <unsupported/Eigen/SpecialFunctions>

#include "qdos/errors.hpp"

namespace qdos::entropy {

Histogram Histogram::of(std::span<const double> x, int bins, double length) {
  if (bins < 1 || !(length > 0.0)) throw InvalidArgument("histogram needs bins >= 1 and length > 0");
  Histogram h{length, std::vector<long>(static_cast<std::size_t>(bins), 0)};
  for (double v : x) {
    const double u = wrap(v, length) / length * bins;
    h.counts[static_cast<std::size_t>(std::clamp(static_cast<int>(u), 0, bins - 1))] += 1;
  }
  return h;
}

Histogram Histogram::of(const Eigen::Ref<const Eigen::VectorXd>& x, int bins, double length) {
  return of(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), bins, length);
}

long Histogram::total() const {
  long m = 0;
  for (long c : counts) m += c;
  return m;
}

double discrete_entropy(const Eigen::Ref<const Eigen::VectorXd>& p) {
  if ((p.array() < 0.0).any()) throw InvalidArgument("discrete_entropy: negative probability");
  if (std::abs(p.sum() - 1.0) > 1e-9) throw InvalidArgument("discrete_entropy: probabilities do not sum to one");
  double s = 0.0;
  for (double v : p)
    if (v > 0.0) s -= v * std::log(v);
  return s;
}

double histogram_entropy(const Histogram& h) {
  const long M = h.total();
  if (M <= 0) throw InvalidArgument("histogram_entropy: empty histogram");
  for (long c : h.counts)
    if (c < 0) throw InvalidArgument("histogram_entropy: negative count");
  double s = 0.0;
  for (long c : h.counts)
    if (c > 0) {
      const double f = static_cast<double>(c) / static_cast<double>(M);
      s -= f * std::log(f);
    }
  return s;
}

namespace {

BigInt multinomial(const Histogram& h) {
  for (long c : h.counts)
    if (c < 0) throw InvalidArgument("sequence count: negative count");
  // Product of binomials C(m_1 + ... + m_j, m_j), each built exactly by
  // the multiplicative formula.
  BigInt w = 1;
  long running = 0;
  for (long c : h.counts) {
    for (long i = 1; i <= c; ++i) {
      w *= running + i;
      w /= i;
    }
    running += c;
  }
  return w;
}

}  // namespace

BigInt sequence_count(const Histogram& h) {
  if (h.total() > 64) throw InvalidArgument("sequence_count: M > 64, use log_sequence_count");
  return multinomial(h);
}

double log_sequence_count(const Histogram& h) { return log(multinomial(h)); }

double log(const BigInt& n) {
  if (n <= 0) throw InvalidArgument("log of a non-positive integer");
  const std::size_t bits = boost::multiprecision::msb(n) + 1;
  if (bits <= 62) return std::log(n.convert_to<double>());
  const std::size_t shift = bits - 62;
  const BigInt top = n >> shift;
  return std::log(top.convert_to<double>()) + static_cast<double>(shift) * std::numbers::ln2;
}

VolumeLaw volume_law_ratio(const Histogram& h) {
  if (h.total() < 2) throw InvalidArgument("volume_law_ratio: need M >= 2");
  const double S = histogram_entropy(h);
  const double lnW = log_sequence_count(h);
  if (S == 0.0) return {1.0, true};
  return {lnW / (static_cast<double>(h.total()) * S), false};
}

double relative_entropy(const Eigen::Ref<const Eigen::VectorXd>& rho, const Eigen::Ref<const Eigen::VectorXd>& measure,
                        const Eigen::Ref<const Eigen::VectorXd>& weights) {
  if (rho.size() != measure.size() || rho.size() != weights.size())
    throw GridMismatch("relative_entropy: arrays differ in length");
  if ((rho.array() < 0.0).any() || (measure.array() < 0.0).any())
    throw InvalidArgument("relative_entropy: negative density or measure");
  double s = 0.0;
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    if (rho[i] == 0.0) continue;
    if (measure[i] == 0.0) return -std::numeric_limits<double>::infinity();
    s -= weights[i] * rho[i] * std::log(rho[i] / measure[i]);
  }
  return s;
}

double relative_entropy(const Eigen::Ref<const Eigen::VectorXd>& rho, const Eigen::Ref<const Eigen::VectorXd>& measure,
                        double dx) {
  return relative_entropy(rho, measure, Eigen::VectorXd::Constant(rho.size(), dx));
}

double coarse_H(const Eigen::Ref<const Eigen::VectorXd>& rho, const Eigen::Ref<const Eigen::VectorXd>& psi_density,
                double dx, double cell) {
  if (rho.size() != psi_density.size()) throw GridMismatch("coarse_H: arrays differ in length");
  const double ratio = cell / dx;
  const Eigen::Index k = std::lround(ratio);
  if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9 * ratio || rho.size() % k != 0)
    throw InvalidArgument("coarse_H: cell must be a whole number of grid spacings dividing the grid");
  double H = 0.0;
  for (Eigen::Index j = 0; j < rho.size() / k; ++j) {
    const double r = rho.segment(j * k, k).mean();
    const double p = psi_density.segment(j * k, k).mean();
    if (r <= 0.0) continue;
    if (p <= 0.0) return std::numeric_limits<double>::infinity();
    H += cell * r * std::log(r / p);
  }
  return H;
}

double histogram_kl(const Histogram& h, const Eigen::Ref<const Eigen::VectorXd>& probabilities) {
  if (probabilities.size() != h.bins()) throw GridMismatch("histogram_kl: bin count mismatch");
  const double M = static_cast<double>(h.total());
  if (!(M > 0.0)) throw InvalidArgument("histogram_kl: empty histogram");
  double kl = 0.0;
  for (int b = 0; b < h.bins(); ++b) {
    const long c = h.counts[static_cast<std::size_t>(b)];
    if (c == 0) continue;
    if (!(probabilities[b] > 0.0)) return std::numeric_limits<double>::infinity();
    const double f = static_cast<double>(c) / M;
    kl += f * std::log(f / probabilities[b]);
  }
  return kl;
}

Eigen::VectorXd bin_probabilities(const Wavefunction& psi, int bins) {
  if (bins < 1) throw InvalidArgument("bin_probabilities: bins must be positive");
  const BandLimitedDensity exact(psi);
  const double w = psi.grid.length() / bins;
  Eigen::VectorXd p(bins);
  for (int b = 0; b < bins; ++b) p[b] = exact.integral(b * w, (b + 1) * w);
  return p;
}

ChiSquare chi_square_test(const Histogram& h, const Eigen::Ref<const Eigen::VectorXd>& probabilities) {
  if (probabilities.size() != h.bins()) throw GridMismatch("chi_square_test: bin count mismatch");
  const double M = static_cast<double>(h.total());
  const double mass = probabilities.sum();
  std::vector<double> obs, exp;
  double o = 0.0, e = 0.0;
  for (int b = 0; b < h.bins(); ++b) {
    o += static_cast<double>(h.counts[static_cast<std::size_t>(b)]);
    e += probabilities[b] / mass * M;
    if (e >= 5.0) {
      obs.push_back(o);
      exp.push_back(e);
      o = e = 0.0;
    }
  }
  if (exp.empty()) throw InvalidArgument("chi_square_test: fewer than 5 expected counts in total");
  obs.back() += o;
  exp.back() += e;

  ChiSquare out;
  for (std::size_t i = 0; i < obs.size(); ++i) out.statistic += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
  out.pooled_bins = static_cast<int>(obs.size());
  out.dof = out.pooled_bins - 1;
  out.p_value = out.dof > 0 ? Eigen::numext::igammac(0.5 * out.dof, 0.5 * out.statistic) : 1.0;
  return out;
}

namespace {

void check_intervals(std::span<const Interval> set, double L) {
  std::vector<Interval> sorted(set.begin(), set.end());
  std::sort(sorted.begin(), sorted.end(), [](const Interval& u, const Interval& v) { return u.a < v.a; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Interval& s = sorted[i];
    if (!(s.a >= 0.0) || !(s.b <= L) || !(s.a <= s.b)) throw InvalidArgument("interval must satisfy 0 <= a <= b <= L");
    if (i > 0 && s.a < sorted[i - 1].b) throw InvalidArgument("intervals overlap");
  }
}

}  // namespace

double typicality(const Wavefunction& psi, std::span<const Interval> set) {
  check_intervals(set, psi.grid.length());
  const BandLimitedDensity exact(psi);
  double t = 0.0;
  for (const Interval& s : set) t += exact.integral(s.a, s.b);
  return t / norm(psi);
}

double q_volume_fraction(const QMap& map, std::span<const Interval> set) {
  const double L = map.grid().length();
  check_intervals(set, L);
  double v = 0.0;
  for (const Interval& s : set) v += map.cumulative(s.b) - map.cumulative(s.a);
  return v / L;
}

MaxEntProblem MaxEntProblem::on_interval(double a, double b, Eigen::Index n, Eigen::VectorXd measure,
                                         Eigen::VectorXd targets) {
  if (!(b > a) || n < 2) throw InvalidArgument("maxent interval needs b > a and n >= 2");
  if (measure.size() != n + 1) throw GridMismatch("maxent measure must have n + 1 samples");
  MaxEntProblem p;
  p.x = Eigen::VectorXd::LinSpaced(n + 1, a, b);
  const double h = (b - a) / static_cast<double>(n);
  p.weights = Eigen::VectorXd::Constant(n + 1, h);
  p.weights[0] = p.weights[n] = 0.5 * h;
  p.measure = std::move(measure);
  p.targets = std::move(targets);
  return p;
}

MaxEntProblem MaxEntProblem::on_grid(const Grid1D& grid, Eigen::VectorXd measure, Eigen::VectorXd targets) {
  if (measure.size() != grid.points()) throw GridMismatch("maxent measure must match the grid");
  MaxEntProblem p;
  p.x = grid.nodes();
  p.weights = Eigen::VectorXd::Constant(grid.points(), grid.dx());
  p.measure = std::move(measure);
  p.targets = std::move(targets);
  return p;
}

namespace {

Eigen::MatrixXd powers(const Eigen::VectorXd& x, int K) {
  Eigen::MatrixXd phi(x.size(), K);
  if (K > 0) phi.col(0) = x;
  for (int k = 1; k < K; ++k) phi.col(k) = phi.col(k - 1).cwiseProduct(x);
  return phi;
}

struct DualState {
  double value;  // ln Z + lambda . f
  double Z;
  Eigen::VectorXd rho;
};

DualState evaluate(const MaxEntProblem& p, const Eigen::MatrixXd& phi, const Eigen::VectorXd& lambda) {
  const Eigen::VectorXd e = -(phi * lambda);
  double shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < e.size(); ++i)
    if (p.measure[i] > 0.0) shift = std::max(shift, e[i]);
  const Eigen::VectorXd unnormalized = p.measure.cwiseProduct((e.array() - shift).exp().matrix());
  const double scaled = p.weights.dot(unnormalized);
  DualState s;
  s.Z = scaled * std::exp(shift);
  s.value = std::log(scaled) + shift + lambda.dot(p.targets);
  s.rho = unnormalized / scaled;
  return s;
}

}  // namespace

Eigen::VectorXd MaxEntProblem::moment_residuals() const {
  const Eigen::MatrixXd phi = powers(x, order());
  return phi.transpose() * weights.cwiseProduct(rho) - targets;
}

double MaxEntProblem::entropy_of(const Eigen::Ref<const Eigen::VectorXd>& density) const {
  return relative_entropy(density, measure, weights);
}

MaxEntProblem maxent_solve(MaxEntProblem p) {
  const int K = p.order();
  if (K > 4) throw InvalidArgument("maxent_solve supports at most four moment constraints");
  if (p.x.size() != p.weights.size() || p.x.size() != p.measure.size())
    throw GridMismatch("maxent problem arrays differ in length");
  if ((p.measure.array() < 0.0).any() || !(p.weights.dot(p.measure) > 0.0))
    throw InvalidArgument("maxent measure must be non-negative with positive mass");

  constexpr double kTolerance = 1e-12;
  constexpr double kBlowUp = 1e7;
  constexpr int kMaxIterations = 200;

  const Eigen::MatrixXd phi = powers(p.x, K);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(K);
  DualState state = evaluate(p, phi, lambda);
  int it = 0;
  for (; it < kMaxIterations; ++it) {
    const Eigen::VectorXd w = p.weights.cwiseProduct(state.rho);
    const Eigen::VectorXd mean = phi.transpose() * w;
    const Eigen::VectorXd gradient = p.targets - mean;
    if (K == 0 || gradient.lpNorm<Eigen::Infinity>() < kTolerance) break;

    const Eigen::MatrixXd centred = phi.rowwise() - mean.transpose();
    const Eigen::MatrixXd hessian = centred.transpose() * w.asDiagonal() * centred;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
      throw NonRealizable("maxent: moment covariance is singular");
    const Eigen::VectorXd direction = -ldlt.solve(gradient);
    const double slope = gradient.dot(direction);

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= 30; ++halving, t *= 0.5) {
      const Eigen::VectorXd trial = lambda + t * direction;
      const DualState next = evaluate(p, phi, trial);
      if (std::isfinite(next.value) && next.value <= state.value + 1e-4 * t * slope) {
        lambda = trial;
        state = next;
        accepted = true;
        break;
      }
    }
    if (lambda.lpNorm<Eigen::Infinity>() > kBlowUp || !lambda.allFinite())
      throw NonRealizable("maxent: multipliers diverge; the moments are not realizable on this support");
    if (!accepted) {
      if (gradient.lpNorm<Eigen::Infinity>() < 1e-9) break;
      throw NonRealizable("maxent: line search failed away from the solution");
    }
  }

  p.lambda = lambda;
  p.Z = state.Z;
  p.rho = state.rho;
  p.iterations = it;
  if (K > 0 && p.moment_residuals().lpNorm<Eigen::Infinity>() >= 1e-8)
    throw NonRealizable("maxent: no convergence within the iteration budget");
  return p;
}

}  // namespace qdos::entropy
