#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace qom {

/// Default peak-enhancement scale: peak enhancement is kappa * Q.
/// 3.5 puts a Q = 330 mode roughly 10^3 above the unpatterned film.
inline constexpr double kDefaultKappa = 3.5;

/// A quasi-BIC mode described parametrically.
struct Resonance {
  std::string label;
  double center_wavelength_nm = 0.0;
  double q_factor = 1.0;
  double pol_axis_deg = 0.0;                    // in [0, 180)
  double peak_enhancement_scale = kDefaultKappa;  // kappa
  std::optional<double> fano_asymmetry;         // transmission display only

  double fwhm_nm() const { return center_wavelength_nm / q_factor; }
};

struct Metasurface {
  std::string name;
  std::vector<Resonance> resonances;
  double chi2_pm_per_V = 450.0;
  double film_thickness_nm = 500.0;
};

/// Throws std::invalid_argument naming the first broken invariant.
void validate(const Resonance& resonance);
void validate(const Metasurface& metasurface);

double fwhm(const Resonance& resonance);

/// cos^2 between the pump polarization and the resonance axis.
double polarization_coupling(const Resonance& resonance, double pump_pol_deg);

/// Vacuum-field enhancement, 1 far from every resonance:
///   1 + sum_r kappa_r Q_r L_r(lambda) cos^2(pol - axis_r)
double enhancement(const Metasurface& metasurface, double lambda_nm, double pump_pol_deg);
Eigen::ArrayXd enhancement(const Metasurface& metasurface, const Eigen::ArrayXd& lambda_nm,
                           double pump_pol_deg);

/// Sampled curve on a wavelength grid.
struct Spectrum {
  Eigen::ArrayXd lambda_nm;
  Eigen::ArrayXd value;

  Eigen::Index size() const { return lambda_nm.size(); }
};

/// Display-grade white-light transmittance: a monotone background with a
/// peak (Lorentzian, or Fano when an asymmetry is configured) at each
/// resonance, weighted by its polarization coupling. Values stay in [0, 1].
/// Throws std::invalid_argument if the grid is not sorted ascending.
Spectrum transmission_spectrum(const Metasurface& metasurface, const Eigen::ArrayXd& lambda_grid,
                               double pol_deg);

}  // namespace qom
