#pragma once

#include "qom/correlations.hpp"
#include "qom/detection.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace qom {

struct WavelengthPair {
  double signal_nm = 0.0;  // shorter
  double idler_nm = 0.0;   // longer
};

/// Inverts the two-photon fiber delay. Both photons cross the same fiber, so
/// |dt| = D L (lambda_i - lambda_s); with 1/lambda_s + 1/lambda_i = 1/lambda_p
/// this has the single solution
///   lambda_s = (2 lambda_p - d + sqrt(4 lambda_p^2 + d^2)) / 2,  d = |dt| / (D L).
/// The sign of dt is folded away. Throws std::domain_error for a fiber
/// without dispersion or when the idler exceeds `max_wavelength_nm`.
WavelengthPair delay_to_wavelength(double delay_ps, const FiberSpec& fiber, double pump_nm,
                                   std::optional<double> max_wavelength_nm = {});

/// FWHM of the coincidence timing response of two detectors.
double timing_fwhm_ps(const DetectorSpec& a, const DetectorSpec& b);

/// Wavelength-difference resolution: timing FWHM / (D L).
double spectral_resolution_nm(double timing_fwhm_ps, const FiberSpec& fiber);

struct ReconstructionOptions {
  double timing_fwhm_ps = 0.0;
  double lambda_bin_nm = 1.0;
  double lambda_min_nm = 1100.0;
  double lambda_max_nm = 1800.0;
  /// Histogram delay that corresponds to degenerate emission.
  double zero_delay_ps = 0.0;
};

struct ReconstructedSpectrum {
  Eigen::ArrayXd lambda_nm;  // bin centers
  Eigen::ArrayXd intensity;  // photons per bin (each coincidence adds two)
  double bin_width_nm = 1.0;
  double resolution_nm = 0.0;

  /// One-sigma wavelength uncertainty attached to every bin.
  double lambda_error_nm() const { return resolution_nm / 2.3548200450309493; }
};

/// Maps every delay bin (folded about zero) onto its signal and idler
/// wavelength intervals and spreads the counts over the wavelength bins in
/// proportion to overlap, which carries the Jacobian of the delay map.
/// Throws std::domain_error for a fiber without dispersion.
ReconstructedSpectrum reconstruct_spectrum(const CoincidenceHistogram& histogram, const FiberSpec& fiber,
                                           double pump_nm, const ReconstructionOptions& options);

struct SpectralPeak {
  double center_nm = 0.0;
  double fwhm_nm = 0.0;
  double height = 0.0;
};

/// Local maxima above `min_relative_height` of the global maximum, with the
/// FWHM from linear interpolation at half height and the center from the
/// centroid of the half-height region. Peaks sharing a half-height region
/// are merged. Sorted by wavelength.
std::vector<SpectralPeak> find_peaks(const Eigen::ArrayXd& lambda_nm, const Eigen::ArrayXd& value,
                                     double min_relative_height = 0.1);

}  // namespace qom
