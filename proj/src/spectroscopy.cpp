#include "qom/spectroscopy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qom {

namespace {

constexpr double kFwhmPerSigma = 2.3548200450309493;

double dispersion_or_throw(const FiberSpec& fiber) {
  const double dl = std::abs(fiber.dispersion_ps_per_nm());
  if (!(dl > 0.0)) throw std::domain_error("fiber has no dispersion: delays carry no wavelength information");
  return dl;
}

WavelengthPair solve(double delay_ps, double dl, double pump_nm) {
  const double d = std::abs(delay_ps) / dl;
  const double signal = 0.5 * (2.0 * pump_nm - d + std::sqrt(4.0 * pump_nm * pump_nm + d * d));
  return {signal, signal + d};
}

class WavelengthBins {
 public:
  WavelengthBins(double lo, double hi, double width) : lo_(lo), width_(width) {
    if (!(width > 0.0) || !(hi > lo)) throw std::invalid_argument("invalid wavelength binning");
    count_ = static_cast<Eigen::Index>(std::ceil((hi - lo) / width - 1e-9));
    values_ = Eigen::ArrayXd::Zero(count_);
  }

  // Spread `weight` uniformly over [x0, x1].
  void deposit(double weight, double x0, double x1) {
    if (x1 < x0) std::swap(x0, x1);
    if (x1 - x0 < 1e-12 * width_) {
      const auto k = static_cast<Eigen::Index>(std::floor((x0 - lo_) / width_));
      if (k >= 0 && k < count_) values_(k) += weight;
      return;
    }
    const double density = weight / (x1 - x0);
    auto k = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor((x0 - lo_) / width_)));
    for (; k < count_; ++k) {
      const double b0 = lo_ + static_cast<double>(k) * width_;
      const double b1 = b0 + width_;
      if (b0 >= x1) break;
      const double overlap = std::min(b1, x1) - std::max(b0, x0);
      if (overlap > 0.0) values_(k) += density * overlap;
    }
  }

  Eigen::ArrayXd centers() const {
    return lo_ + width_ * (Eigen::ArrayXd::LinSpaced(count_, 0.0, static_cast<double>(count_ - 1)) + 0.5);
  }
  const Eigen::ArrayXd& values() const { return values_; }

 private:
  double lo_;
  double width_;
  Eigen::Index count_ = 0;
  Eigen::ArrayXd values_;
};

}  // namespace

WavelengthPair delay_to_wavelength(double delay_ps, const FiberSpec& fiber, double pump_nm,
                                   std::optional<double> max_wavelength_nm) {
  if (!(pump_nm > 0.0)) throw std::domain_error("pump wavelength must be positive");
  if (!std::isfinite(delay_ps)) throw std::domain_error("delay must be finite");
  const WavelengthPair pair = solve(delay_ps, dispersion_or_throw(fiber), pump_nm);
  if (max_wavelength_nm && pair.idler_nm > *max_wavelength_nm) {
    throw std::domain_error("delay " + std::to_string(delay_ps) + " ps maps to an idler at " +
                            std::to_string(pair.idler_nm) + " nm, beyond " +
                            std::to_string(*max_wavelength_nm) + " nm");
  }
  return pair;
}

double timing_fwhm_ps(const DetectorSpec& a, const DetectorSpec& b) {
  return kFwhmPerSigma * std::hypot(a.jitter_sigma_ps, b.jitter_sigma_ps);
}

double spectral_resolution_nm(double timing_fwhm, const FiberSpec& fiber) {
  return timing_fwhm / dispersion_or_throw(fiber);
}

ReconstructedSpectrum reconstruct_spectrum(const CoincidenceHistogram& h, const FiberSpec& fiber,
                                           double pump_nm, const ReconstructionOptions& options) {
  const double dl = dispersion_or_throw(fiber);
  if (!(pump_nm > 0.0)) throw std::domain_error("pump wavelength must be positive");
  WavelengthBins bins(options.lambda_min_nm, options.lambda_max_nm, options.lambda_bin_nm);

  auto deposit = [&](double weight, double d0, double d1) {
    const WavelengthPair p0 = solve(d0, dl, pump_nm);
    const WavelengthPair p1 = solve(d1, dl, pump_nm);
    bins.deposit(weight, p0.signal_nm, p1.signal_nm);
    bins.deposit(weight, p0.idler_nm, p1.idler_nm);
  };

  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto c = static_cast<double>(h.counts[i]);
    if (c == 0.0) continue;
    const double lo = h.bin_center_ps(i) - 0.5 * h.bin_width_ps - options.zero_delay_ps;
    const double hi = lo + h.bin_width_ps;
    if (lo >= 0.0) {
      deposit(c, lo, hi);
    } else if (hi <= 0.0) {
      deposit(c, -hi, -lo);
    } else {
      deposit(c * (-lo) / (hi - lo), 0.0, -lo);
      deposit(c * hi / (hi - lo), 0.0, hi);
    }
  }

  ReconstructedSpectrum out;
  out.lambda_nm = bins.centers();
  out.intensity = bins.values();
  out.bin_width_nm = options.lambda_bin_nm;
  out.resolution_nm = options.timing_fwhm_ps / dl;
  return out;
}

std::vector<SpectralPeak> find_peaks(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y,
                                     double min_relative_height) {
  std::vector<SpectralPeak> peaks;
  const Eigen::Index n = y.size();
  if (n == 0 || x.size() != n) return peaks;
  const double top = y.maxCoeff();
  if (!(top > 0.0)) return peaks;
  const double threshold = min_relative_height * top;

  std::vector<Eigen::Index> candidates;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) < threshold) continue;
    const bool rises = i == 0 || y(i) > y(i - 1);
    const bool falls = i == n - 1 || y(i) >= y(i + 1);
    if (rises && falls) candidates.push_back(i);
  }
  std::sort(candidates.begin(), candidates.end(),
            [&](Eigen::Index a, Eigen::Index b) { return y(a) > y(b) || (y(a) == y(b) && a < b); });

  struct Region {
    Eigen::Index first, last;
  };
  std::vector<Region> taken;
  for (const auto i : candidates) {
    const bool inside = std::any_of(taken.begin(), taken.end(),
                                    [&](const Region& r) { return i >= r.first && i <= r.last; });
    if (inside) continue;
    const double half = 0.5 * y(i);
    Eigen::Index l = i, r = i;
    while (l > 0 && y(l - 1) >= half) --l;
    while (r < n - 1 && y(r + 1) >= half) ++r;
    auto edge = [&](Eigen::Index inner, Eigen::Index outer) {
      if (outer < 0 || outer >= n) return x(inner);
      const double t = (y(inner) - half) / (y(inner) - y(outer));
      return x(inner) + t * (x(outer) - x(inner));
    };
    const double left = edge(l, l - 1);
    const double right = edge(r, r + 1);
    double wsum = 0.0, xsum = 0.0;
    for (Eigen::Index k = l; k <= r; ++k) {
      const double w = y(k) - half;
      wsum += w;
      xsum += w * x(k);
    }
    peaks.push_back({wsum > 0.0 ? xsum / wsum : x(i), right - left, y(i)});
    taken.push_back({l, r});
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const SpectralPeak& a, const SpectralPeak& b) { return a.center_nm < b.center_nm; });
  return peaks;
}

}  // namespace qom
