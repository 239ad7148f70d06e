#pragma once

#include "qom/optics.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qom {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Pairs / s / nm per (mW * (pm/V)^2 * enhancement^2). Puts the degenerate
/// QOM-A configuration at 9.6 mW near 10^3 detected coincidences per second.
inline constexpr double kDefaultRateConstant = 7.0e-10;

struct PumpConfig {
  double wavelength_nm = 0.0;
  double power_mW = 0.0;
  double pol_deg = 0.0;
  double spot_diameter_um = 140.0;
  std::optional<std::string> coherent_group_id;
};

void validate(const PumpConfig& pump);

/// One generated photon pair. lambda_s_nm <= lambda_i_nm.
struct PairEvent {
  double t_emit_s = 0.0;
  double lambda_s_nm = 0.0;
  double lambda_i_nm = 0.0;
  std::uint32_t pump_index = 0;
  std::uint32_t metasurface_index = 0;

  friend bool operator==(const PairEvent&, const PairEvent&) = default;
};

/// Both photons of an emitted pair must fall inside this band; the density
/// grid spans it with the given step.
struct EmissionWindow {
  double lo_nm = 1100.0;
  double hi_nm = 1800.0;
  double step_nm = 0.01;
};

struct SourceModel {
  double rate_constant = kDefaultRateConstant;
  EmissionWindow window;
};

/// Pair spectral density S(lambda) = C P chi2^2 E(lambda) E(partner(lambda)),
/// sampled over the whole emission window. S is symmetric in the two photons
/// so every pair appears twice on the grid; pair_rate() integrates over the
/// signal half (lambda <= 2 lambda_p) only.
struct SpectralDensity {
  Eigen::ArrayXd lambda_nm;
  Eigen::ArrayXd density;  // pairs / s / nm
  double pump_wavelength_nm = 0.0;

  double pair_rate() const;
};

/// Energy conservation: (1/lambda_p - 1/lambda_s)^-1.
/// Throws std::domain_error unless lambda_s > lambda_p > 0.
double idler_wavelength(double pump_nm, double signal_nm);

/// Inverse: the pump that produces the pair (a, b), (1/a + 1/b)^-1.
double pump_wavelength_for(double a_nm, double b_nm);

SpectralDensity pair_spectral_density(const Metasurface& metasurface, const PumpConfig& pump,
                                      const SourceModel& model = {});

/// Pairs per second with both photons inside the emission window.
double total_pair_rate(const Metasurface& metasurface, const PumpConfig& pump,
                       const SourceModel& model = {});

/// Same film thickness and chi2 with every resonance removed (E == 1).
double unpatterned_pair_rate(const Metasurface& metasurface, const PumpConfig& pump,
                             const SourceModel& model = {});

/// Coherence time lambda^2 / (c dlambda) of the signal-half emission, with
/// dlambda the power-equivalent width (int S)^2 / int S^2 and lambda the
/// S^2-weighted mean. Zero when the density vanishes.
double coherence_time_s(const SpectralDensity& density);

enum class StatsMode { kPoisson, kThermalCell };

/// Accepts "poisson" and "thermal-cell"; throws std::invalid_argument otherwise.
StatsMode parse_stats_mode(std::string_view name);
std::string_view to_string(StatsMode mode);

struct GenerationOptions {
  SourceModel model;
  /// Overrides the coherence-cell duration of thermal-cell mode.
  std::optional<double> coherence_time_s;
  unsigned threads = 1;
};

/// Monte Carlo realization of the source: every pump illuminates every
/// metasurface; each (metasurface, pump) combination is an independent
/// substream of `seed`. The result is sorted by emission time.
///
/// poisson: homogeneous Poisson emission at total_pair_rate.
/// thermal-cell: the time axis is cut into coherence cells; the pair count
/// of each cell is Bose-Einstein (geometric) with mean rate * cell duration
/// and the pairs are spread uniformly inside their cell.
///
/// Throws std::invalid_argument for a nonpositive duration.
std::vector<PairEvent> generate_events(std::span<const Metasurface> metasurfaces,
                                       std::span<const PumpConfig> pumps, double duration_s,
                                       StatsMode mode, std::uint64_t seed,
                                       const GenerationOptions& options = {});

/// Overload taking the mode by name; unknown names throw std::invalid_argument.
std::vector<PairEvent> generate_events(std::span<const Metasurface> metasurfaces,
                                       std::span<const PumpConfig> pumps, double duration_s,
                                       std::string_view stats_mode, std::uint64_t seed,
                                       const GenerationOptions& options = {});

}  // namespace qom
