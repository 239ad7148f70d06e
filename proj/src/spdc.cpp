#include "qom/spdc.hpp"

#include "qom/random.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <string>
#include <tuple>

namespace qom {

namespace {

double scale_factor(const Metasurface& m, const SourceModel& model) {
  return model.rate_constant * m.chi2_pm_per_V * m.chi2_pm_per_V;
}

void validate(const SourceModel& model) {
  const auto& w = model.window;
  if (!(w.lo_nm > 0.0 && w.hi_nm > w.lo_nm)) {
    throw std::invalid_argument("emission window must satisfy 0 < lo < hi");
  }
  if (!(w.step_nm > 0.0)) throw std::invalid_argument("emission window step must be positive");
  if (!(model.rate_constant >= 0.0)) throw std::invalid_argument("rate constant must be nonnegative");
}

// Signal half of the pair domain: lambda_s from the smallest value whose
// partner still fits under the window top, up to the degenerate point.
struct HalfDomain {
  Eigen::ArrayXd lambda_nm;
  Eigen::ArrayXd weight;  // E(lambda_s) E(lambda_i), unscaled
  double step_nm = 0.0;

  bool empty() const { return lambda_nm.size() < 2; }
};

HalfDomain half_domain(const Metasurface& m, const PumpConfig& pump, const SourceModel& model,
                       bool unpatterned = false) {
  const double lp = pump.wavelength_nm;
  const auto& w = model.window;
  const double top = 2.0 * lp;
  double lo = w.lo_nm;
  if (w.hi_nm > lp) lo = std::max(lo, 1.0 / (1.0 / lp - 1.0 / w.hi_nm));
  HalfDomain out;
  if (!(top > lo) || w.hi_nm < top) return out;
  const auto segments = static_cast<Eigen::Index>(std::ceil((top - lo) / w.step_nm));
  out.lambda_nm = Eigen::ArrayXd::LinSpaced(segments + 1, lo, top);
  out.step_nm = (top - lo) / static_cast<double>(segments);
  if (unpatterned) {
    out.weight = Eigen::ArrayXd::Ones(segments + 1);
    return out;
  }
  const Eigen::ArrayXd partner = (1.0 / lp - out.lambda_nm.inverse()).inverse();
  out.weight = enhancement(m, out.lambda_nm, pump.pol_deg) * enhancement(m, partner, pump.pol_deg);
  return out;
}

double trapezoid(const Eigen::ArrayXd& y, double h) {
  if (y.size() < 2) return 0.0;
  return h * (y.sum() - 0.5 * (y(0) + y(y.size() - 1)));
}

// Inverse-CDF sampler for a piecewise-linear density on a uniform grid.
class WavelengthSampler {
 public:
  explicit WavelengthSampler(const HalfDomain& domain) : domain_(domain) {
    const Eigen::Index n = domain.lambda_nm.size();
    cdf_.resize(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index k = 1; k < n; ++k) {
      cdf_[k] = cdf_[k - 1] + 0.5 * domain.step_nm * (domain.weight(k - 1) + domain.weight(k));
    }
  }

  double operator()(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double target = unit(rng) * cdf_.back();
    auto it = std::upper_bound(cdf_.begin() + 1, cdf_.end(), target);
    if (it == cdf_.end()) --it;
    const auto k = static_cast<Eigen::Index>(it - cdf_.begin()) - 1;
    const double area = target - cdf_[k];
    const double h = domain_.step_nm;
    const double d0 = domain_.weight(k);
    const double d1 = domain_.weight(k + 1);
    // Solve d0 x + (d1 - d0) x^2 / (2h) = area for x in [0, h].
    const double slope = (d1 - d0) / h;
    double x;
    if (std::abs(slope) * h < 1e-12 * std::max(d0, d1)) {
      x = d0 > 0.0 ? area / d0 : 0.0;
    } else {
      const double disc = std::max(0.0, d0 * d0 + 2.0 * slope * area);
      x = 2.0 * area / (d0 + std::sqrt(disc));
    }
    return domain_.lambda_nm(k) + std::clamp(x, 0.0, h);
  }

 private:
  const HalfDomain& domain_;
  std::vector<double> cdf_;
};

std::vector<PairEvent> generate_stream(const Metasurface& m, const PumpConfig& pump,
                                       std::uint32_t pump_index, std::uint32_t ms_index,
                                       double duration_s, StatsMode mode, std::uint64_t seed,
                                       const GenerationOptions& options) {
  std::vector<PairEvent> events;
  const HalfDomain domain = half_domain(m, pump, options.model);
  if (domain.empty()) return events;
  const double rate = scale_factor(m, options.model) * trapezoid(domain.weight, domain.step_nm) *
                      pump.power_mW;
  if (!(rate > 0.0)) return events;

  Rng rng = make_rng(seed, "source/metasurface/" + std::to_string(ms_index) + "/pump/" +
                               std::to_string(pump_index));
  const WavelengthSampler sample(domain);
  const double lp = pump.wavelength_nm;
  auto emit = [&](double t) {
    const double ls = sample(rng);
    events.push_back({t, ls, idler_wavelength(lp, ls), pump_index, ms_index});
  };

  events.reserve(static_cast<std::size_t>(rate * duration_s * 1.05) + 16);
  if (mode == StatsMode::kPoisson) {
    std::exponential_distribution<double> gap(rate);
    for (double t = gap(rng); t < duration_s; t += gap(rng)) emit(t);
    return events;
  }

  double cell = options.coherence_time_s.value_or(0.0);
  if (!options.coherence_time_s) {
    SpectralDensity sd{domain.lambda_nm, domain.weight, lp};
    cell = coherence_time_s(sd);
  }
  if (!(cell > 0.0)) throw std::invalid_argument("thermal-cell mode needs a positive coherence time");
  const double mean = rate * cell;
  const auto cells = static_cast<long long>(std::ceil(duration_s / cell));
  // Skip runs of empty cells directly: the gap to the next occupied cell is
  // geometric, and an occupied cell holds 1 + geometric pairs.
  std::geometric_distribution<long long> skip(mean / (1.0 + mean));
  std::geometric_distribution<long long> extra(1.0 / (1.0 + mean));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> offsets;
  for (long long c = skip(rng); c < cells; c += 1 + skip(rng)) {
    const long long n = 1 + extra(rng);
    offsets.clear();
    for (long long k = 0; k < n; ++k) offsets.push_back(unit(rng));
    std::sort(offsets.begin(), offsets.end());
    for (double u : offsets) {
      const double t = (static_cast<double>(c) + u) * cell;
      if (t < duration_s) emit(t);
    }
  }
  return events;
}

}  // namespace

void validate(const PumpConfig& pump) {
  if (!(pump.wavelength_nm > 0.0) || !std::isfinite(pump.wavelength_nm)) {
    throw std::invalid_argument("pump wavelength must be positive");
  }
  if (!(pump.power_mW >= 0.0) || !std::isfinite(pump.power_mW)) {
    throw std::invalid_argument("pump power must be nonnegative");
  }
  if (!(pump.spot_diameter_um > 0.0)) throw std::invalid_argument("pump spot diameter must be positive");
}

double SpectralDensity::pair_rate() const {
  double sum = 0.0;
  for (Eigen::Index k = 1; k < lambda_nm.size(); ++k) {
    if (lambda_nm(k) > 2.0 * pump_wavelength_nm) break;
    sum += 0.5 * (lambda_nm(k) - lambda_nm(k - 1)) * (density(k) + density(k - 1));
  }
  return sum;
}

double idler_wavelength(double pump_nm, double signal_nm) {
  if (!(pump_nm > 0.0) || !(signal_nm > pump_nm)) {
    throw std::domain_error("idler_wavelength: signal wavelength " + std::to_string(signal_nm) +
                            " nm must exceed the pump wavelength " + std::to_string(pump_nm) + " nm");
  }
  return 1.0 / (1.0 / pump_nm - 1.0 / signal_nm);
}

double pump_wavelength_for(double a_nm, double b_nm) {
  if (!(a_nm > 0.0) || !(b_nm > 0.0)) throw std::domain_error("pump_wavelength_for: wavelengths must be positive");
  return 1.0 / (1.0 / a_nm + 1.0 / b_nm);
}

SpectralDensity pair_spectral_density(const Metasurface& m, const PumpConfig& pump,
                                      const SourceModel& model) {
  validate(m);
  validate(pump);
  validate(model);
  const auto& w = model.window;
  const auto segments = static_cast<Eigen::Index>(std::ceil((w.hi_nm - w.lo_nm) / w.step_nm));
  SpectralDensity out;
  out.pump_wavelength_nm = pump.wavelength_nm;
  out.lambda_nm = Eigen::ArrayXd::LinSpaced(segments + 1, w.lo_nm, w.hi_nm);
  out.density = Eigen::ArrayXd::Zero(segments + 1);
  const double scale = scale_factor(m, model) * pump.power_mW;
  if (scale == 0.0) return out;
  const double lp = pump.wavelength_nm;
  const Eigen::ArrayXd e = enhancement(m, out.lambda_nm, pump.pol_deg);
  for (Eigen::Index k = 0; k <= segments; ++k) {
    const double x = out.lambda_nm(k);
    if (!(x > lp)) continue;
    const double partner = idler_wavelength(lp, x);
    if (partner < w.lo_nm || partner > w.hi_nm) continue;
    out.density(k) = scale * e(k) * enhancement(m, partner, pump.pol_deg);
  }
  return out;
}

double total_pair_rate(const Metasurface& m, const PumpConfig& pump, const SourceModel& model) {
  validate(m);
  validate(pump);
  validate(model);
  const HalfDomain domain = half_domain(m, pump, model);
  if (domain.empty()) return 0.0;
  return scale_factor(m, model) * trapezoid(domain.weight, domain.step_nm) * pump.power_mW;
}

double unpatterned_pair_rate(const Metasurface& m, const PumpConfig& pump, const SourceModel& model) {
  validate(m);
  validate(pump);
  validate(model);
  const HalfDomain domain = half_domain(m, pump, model, /*unpatterned=*/true);
  if (domain.empty()) return 0.0;
  return scale_factor(m, model) * trapezoid(domain.weight, domain.step_nm) * pump.power_mW;
}

double coherence_time_s(const SpectralDensity& sd) {
  double s1 = 0.0, s2 = 0.0, ls2 = 0.0;
  for (Eigen::Index k = 1; k < sd.lambda_nm.size(); ++k) {
    const double x = sd.lambda_nm(k);
    if (x > 2.0 * sd.pump_wavelength_nm + 1e-9) break;
    const double h = x - sd.lambda_nm(k - 1);
    const double y0 = sd.density(k - 1), y1 = sd.density(k);
    s1 += 0.5 * h * (y0 + y1);
    s2 += 0.5 * h * (y0 * y0 + y1 * y1);
    ls2 += 0.5 * h * (sd.lambda_nm(k - 1) * y0 * y0 + x * y1 * y1);
  }
  if (!(s2 > 0.0)) return 0.0;
  const double width_nm = s1 * s1 / s2;
  const double center_nm = ls2 / s2;
  return center_nm * center_nm * 1e-9 / (kSpeedOfLight * width_nm);
}

StatsMode parse_stats_mode(std::string_view name) {
  if (name == "poisson") return StatsMode::kPoisson;
  if (name == "thermal-cell") return StatsMode::kThermalCell;
  throw std::invalid_argument("unknown stats_mode '" + std::string(name) +
                              "' (expected poisson or thermal-cell)");
}

std::string_view to_string(StatsMode mode) {
  return mode == StatsMode::kPoisson ? "poisson" : "thermal-cell";
}

std::vector<PairEvent> generate_events(std::span<const Metasurface> metasurfaces,
                                       std::span<const PumpConfig> pumps, double duration_s,
                                       StatsMode mode, std::uint64_t seed,
                                       const GenerationOptions& options) {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw std::invalid_argument("generate_events: duration must be positive");
  }
  validate(options.model);
  for (const auto& m : metasurfaces) validate(m);
  for (const auto& p : pumps) validate(p);
  if (options.coherence_time_s && !(*options.coherence_time_s > 0.0)) {
    throw std::invalid_argument("generate_events: coherence time override must be positive");
  }

  struct Job {
    std::uint32_t ms, pump;
  };
  std::vector<Job> jobs;
  for (std::uint32_t m = 0; m < metasurfaces.size(); ++m) {
    for (std::uint32_t p = 0; p < pumps.size(); ++p) jobs.push_back({m, p});
  }
  auto run = [&](const Job& j) {
    return generate_stream(metasurfaces[j.ms], pumps[j.pump], j.pump, j.ms, duration_s, mode, seed,
                           options);
  };

  std::vector<std::vector<PairEvent>> parts(jobs.size());
  if (options.threads > 1 && jobs.size() > 1) {
    std::vector<std::future<std::vector<PairEvent>>> futures;
    for (const auto& j : jobs) futures.push_back(std::async(std::launch::async, run, j));
    for (std::size_t k = 0; k < jobs.size(); ++k) parts[k] = futures[k].get();
  } else {
    for (std::size_t k = 0; k < jobs.size(); ++k) parts[k] = run(jobs[k]);
  }

  std::vector<PairEvent> all;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  all.reserve(total);
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  std::stable_sort(all.begin(), all.end(), [](const PairEvent& a, const PairEvent& b) {
    return std::tie(a.t_emit_s, a.metasurface_index, a.pump_index) <
           std::tie(b.t_emit_s, b.metasurface_index, b.pump_index);
  });
  return all;
}

std::vector<PairEvent> generate_events(std::span<const Metasurface> metasurfaces,
                                       std::span<const PumpConfig> pumps, double duration_s,
                                       std::string_view stats_mode, std::uint64_t seed,
                                       const GenerationOptions& options) {
  return generate_events(metasurfaces, pumps, duration_s, parse_stats_mode(stats_mode), seed, options);
}

}  // namespace qom
