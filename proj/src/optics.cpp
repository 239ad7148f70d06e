#include "qom/optics.hpp"

#include "qom/lineshape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qom {

namespace {

// Background transmittance rises linearly across the grid.
constexpr double kBackgroundLow = 0.55;
constexpr double kBackgroundRise = 0.15;

}  // namespace

void validate(const Resonance& r) {
  if (!(r.center_wavelength_nm > 0.0) || !std::isfinite(r.center_wavelength_nm)) {
    throw std::invalid_argument("resonance '" + r.label + "': center wavelength must be positive");
  }
  if (!(r.q_factor > 0.0) || !std::isfinite(r.q_factor)) {
    throw std::invalid_argument("resonance '" + r.label + "': q factor must be positive");
  }
  if (!(r.pol_axis_deg >= 0.0 && r.pol_axis_deg < 180.0)) {
    throw std::invalid_argument("resonance '" + r.label + "': polarization axis must lie in [0, 180)");
  }
  if (!(r.peak_enhancement_scale > 0.0) || !std::isfinite(r.peak_enhancement_scale)) {
    throw std::invalid_argument("resonance '" + r.label + "': kappa must be positive");
  }
}

void validate(const Metasurface& m) {
  if (m.resonances.empty()) {
    throw std::invalid_argument("metasurface '" + m.name + "': needs at least one resonance");
  }
  for (const auto& r : m.resonances) validate(r);
  for (std::size_t i = 0; i < m.resonances.size(); ++i) {
    for (std::size_t j = i + 1; j < m.resonances.size(); ++j) {
      if (m.resonances[i].center_wavelength_nm == m.resonances[j].center_wavelength_nm) {
        throw std::invalid_argument("metasurface '" + m.name +
                                    "': resonance center wavelengths must be distinct");
      }
    }
  }
  if (!(m.chi2_pm_per_V > 0.0)) {
    throw std::invalid_argument("metasurface '" + m.name + "': chi2 must be positive");
  }
  if (!(m.film_thickness_nm > 0.0)) {
    throw std::invalid_argument("metasurface '" + m.name + "': film thickness must be positive");
  }
}

double fwhm(const Resonance& resonance) { return resonance.fwhm_nm(); }

double polarization_coupling(const Resonance& resonance, double pump_pol_deg) {
  return malus(pump_pol_deg, resonance.pol_axis_deg);
}

double enhancement(const Metasurface& m, double lambda_nm, double pump_pol_deg) {
  double e = 1.0;
  for (const auto& r : m.resonances) {
    const double peak = r.peak_enhancement_scale * r.q_factor;
    e += peak * polarization_coupling(r, pump_pol_deg) *
         lorentzian(lambda_nm, r.center_wavelength_nm, r.fwhm_nm());
  }
  return e;
}

Eigen::ArrayXd enhancement(const Metasurface& m, const Eigen::ArrayXd& lambda_nm,
                           double pump_pol_deg) {
  Eigen::ArrayXd e = Eigen::ArrayXd::Ones(lambda_nm.size());
  for (const auto& r : m.resonances) {
    const double weight =
        r.peak_enhancement_scale * r.q_factor * polarization_coupling(r, pump_pol_deg);
    if (weight == 0.0) continue;
    e += weight * lorentzian(lambda_nm, r.center_wavelength_nm, r.fwhm_nm());
  }
  return e;
}

Spectrum transmission_spectrum(const Metasurface& m, const Eigen::ArrayXd& grid, double pol_deg) {
  Spectrum out{grid, Eigen::ArrayXd(grid.size())};
  if (grid.size() == 0) return out;
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw std::invalid_argument("transmission_spectrum: wavelength grid must be sorted ascending");
  }
  const double lo = grid(0);
  const double span = grid(grid.size() - 1) - lo;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const double x = grid(k);
    const double background = kBackgroundLow + (span > 0.0 ? kBackgroundRise * (x - lo) / span : 0.0);
    // Features combine as independent "openings" so the total stays below 1.
    double closed = 1.0;
    for (const auto& r : m.resonances) {
      const double c = polarization_coupling(r, pol_deg);
      const double shape = r.fano_asymmetry
                               ? fano(x, r.center_wavelength_nm, r.fwhm_nm(), *r.fano_asymmetry)
                               : lorentzian(x, r.center_wavelength_nm, r.fwhm_nm());
      closed *= 1.0 - c * shape;
    }
    out.value(k) = std::clamp(background + (1.0 - background) * (1.0 - closed), 0.0, 1.0);
  }
  return out;
}

}  // namespace qom
