#pragma once

// Spectral and interpolation primitives on a uniform periodic grid. Templated
// on the scalar so the same code serves float, double and long double data.

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>

namespace qdos {

template <typename Scalar>
using RealVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

/// Wrap x into [0, length).
template <typename Scalar>
Scalar wrap(Scalar x, Scalar length) {
  Scalar r = std::fmod(x, length);
  if (r < Scalar(0)) r += length;
  if (r >= length) r -= length;  // fmod of tiny negatives can round up to length
  return r;
}

/// Wrap a displacement into [-length/2, length/2).
template <typename Scalar>
Scalar wrap_signed(Scalar d, Scalar length) {
  return wrap(d + length / Scalar(2), length) - length / Scalar(2);
}

/// Angular wavenumbers in FFT order; the Nyquist entry is -pi*n/length.
template <typename Scalar>
RealVector<Scalar> wavenumbers(Eigen::Index n, Scalar length) {
  RealVector<Scalar> k(n);
  const Scalar base = Scalar(2) * std::numbers::pi_v<Scalar> / length;
  for (Eigen::Index j = 0; j < n; ++j) k[j] = base * Scalar(j < n / 2 ? j : j - n);
  return k;
}

/// order-th derivative of periodic samples, computed in Fourier space. For odd
/// orders the Nyquist mode is dropped so real input gives real output.
template <typename Derived>
auto spectral_derivative(const Eigen::MatrixBase<Derived>& f,
                         typename Eigen::NumTraits<typename Derived::Scalar>::Real length, int order = 1) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  using Complex = std::complex<Real>;
  const Eigen::Index n = f.size();
  ComplexVector<Real> in = f.template cast<Complex>();
  ComplexVector<Real> spec(n);
  Eigen::FFT<Real> fft;
  fft.fwd(spec, in);
  const RealVector<Real> k = wavenumbers<Real>(n, length);
  for (Eigen::Index j = 0; j < n; ++j) {
    Complex factor(1, 0);
    for (int o = 0; o < order; ++o) factor *= Complex(0, k[j]);
    spec[j] *= factor;
  }
  if (order % 2 == 1 && n % 2 == 0) spec[n / 2] = Complex(0, 0);
  ComplexVector<Real> out(n);
  fft.inv(out, spec);
  return out;
}

template <typename Derived>
auto spectral_derivative_real(const Eigen::MatrixBase<Derived>& f, typename Derived::Scalar length,
                              int order = 1) {
  return RealVector<typename Derived::Scalar>(spectral_derivative(f, length, order).real());
}

/// Piecewise cubic Hermite interpolant on a periodic grid, with node slopes
/// supplied by the caller (typically spectral derivatives).
template <typename Scalar>
class PeriodicHermite {
 public:
  PeriodicHermite() = default;
  PeriodicHermite(RealVector<Scalar> values, RealVector<Scalar> slopes, Scalar length)
      : values_(std::move(values)), slopes_(std::move(slopes)), length_(length),
        dx_(length / Scalar(values_.size())) {}

  Scalar operator()(Scalar x) const {
    const auto [i, j, t] = locate(x);
    const Scalar t2 = t * t, t3 = t2 * t;
    const Scalar h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const Scalar h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * values_[i] + h10 * dx_ * slopes_[i] + h01 * values_[j] + h11 * dx_ * slopes_[j];
  }

  Scalar derivative(Scalar x) const {
    const auto [i, j, t] = locate(x);
    const Scalar t2 = t * t;
    const Scalar d00 = 6 * t2 - 6 * t, d10 = 3 * t2 - 4 * t + 1;
    const Scalar d01 = -6 * t2 + 6 * t, d11 = 3 * t2 - 2 * t;
    return (d00 * values_[i] + d01 * values_[j]) / dx_ + d10 * slopes_[i] + d11 * slopes_[j];
  }

  const RealVector<Scalar>& values() const { return values_; }
  const RealVector<Scalar>& slopes() const { return slopes_; }
  Scalar length() const { return length_; }

 private:
  struct Cell {
    Eigen::Index i, j;
    Scalar t;
  };
  Cell locate(Scalar x) const {
    const Eigen::Index n = values_.size();
    const Scalar u = wrap(x, length_) / dx_;
    Eigen::Index i = static_cast<Eigen::Index>(std::floor(u));
    if (i >= n) i = n - 1;
    if (i < 0) i = 0;
    return {i, (i + 1) % n, u - Scalar(i)};
  }

  RealVector<Scalar> values_;
  RealVector<Scalar> slopes_;
  Scalar length_ = 1;
  Scalar dx_ = 1;
};

}  // namespace qdos
