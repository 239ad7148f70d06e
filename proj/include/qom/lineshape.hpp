#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>

namespace qom {

// Lineshapes usable on plain scalars and on Eigen array expressions.
// All of them are unit-peak: the value at the line center is 1.

template <typename Scalar>
Scalar lorentzian(Scalar x, Scalar center, Scalar fwhm) {
  const Scalar u = Scalar(2) * (x - center) / fwhm;
  return Scalar(1) / (Scalar(1) + u * u);
}

template <typename Derived>
auto lorentzian(const Eigen::ArrayBase<Derived>& x,
                typename Derived::Scalar center,
                typename Derived::Scalar fwhm) {
  using Scalar = typename Derived::Scalar;
  const Scalar k = Scalar(2) / fwhm;
  return (Scalar(1) + ((x - center) * k).square()).inverse();
}

/// Fano profile rescaled to [0, 1]. The maximum sits at reduced detuning
/// 1/q; q -> infinity recovers the Lorentzian, q = 0 gives a symmetric dip.
template <typename Scalar>
Scalar fano(Scalar x, Scalar center, Scalar fwhm, Scalar q) {
  const Scalar e = Scalar(2) * (x - center) / fwhm;
  return (q + e) * (q + e) / ((Scalar(1) + e * e) * (Scalar(1) + q * q));
}

/// Flat-top filter profile exp(-ln2 |2 (x - c) / fwhm|^order).
/// Half transmission at c +- fwhm/2 for every order.
template <typename Scalar>
Scalar super_gaussian(Scalar x, Scalar center, Scalar fwhm, Scalar order) {
  using std::abs;
  using std::exp;
  using std::pow;
  const Scalar u = abs(Scalar(2) * (x - center) / fwhm);
  return exp(-std::numbers::ln2_v<Scalar> * pow(u, order));
}

/// Malus-law coupling cos^2(a - b), angles in degrees.
template <typename Scalar>
Scalar malus(Scalar angle_deg, Scalar axis_deg) {
  using std::cos;
  const Scalar c = cos((angle_deg - axis_deg) * std::numbers::pi_v<Scalar> / Scalar(180));
  return c * c;
}

}  // namespace qom
