#include "qom/detection.hpp"

#include "qom/lineshape.hpp"
#include "qom/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace qom {

void validate(const DetectorSpec& s) {
  if (!(s.efficiency >= 0.0 && s.efficiency <= 1.0)) {
    throw std::invalid_argument("detector efficiency must lie in [0, 1]");
  }
  if (!(s.dark_count_rate_cps >= 0.0)) throw std::invalid_argument("detector dark count rate must be nonnegative");
  if (!(s.jitter_sigma_ps >= 0.0)) throw std::invalid_argument("detector jitter must be nonnegative");
  if (!(s.dead_time_ns >= 0.0)) throw std::invalid_argument("detector dead time must be nonnegative");
}

void validate(const FiberSpec& f) {
  if (!(f.length_km >= 0.0)) throw std::invalid_argument("fiber length must be nonnegative");
  if (!std::isfinite(f.dispersion_ps_per_nm_km)) throw std::invalid_argument("fiber dispersion must be finite");
  if (!(f.reference_wavelength_nm > 0.0)) throw std::invalid_argument("fiber reference wavelength must be positive");
}

void validate(const BandpassSpec& b) {
  if (!(b.fwhm_nm > 0.0)) throw std::invalid_argument("bandpass fwhm must be positive");
  if (!(b.center_nm > 0.0)) throw std::invalid_argument("bandpass center must be positive");
  if (!(b.transmission_peak >= 0.0 && b.transmission_peak <= 1.0)) {
    throw std::invalid_argument("bandpass peak transmission must lie in [0, 1]");
  }
  if (!(b.order > 0.0)) throw std::invalid_argument("bandpass order must be positive");
}

std::vector<Photon> photons_from_events(std::span<const PairEvent> events) {
  std::vector<Photon> out;
  out.reserve(2 * events.size());
  for (std::size_t k = 0; k < events.size(); ++k) {
    out.push_back({events[k].t_emit_s, events[k].lambda_s_nm, k});
    out.push_back({events[k].t_emit_s, events[k].lambda_i_nm, k});
  }
  return out;
}

SplitPhotons apply_beamsplitter(std::span<const Photon> photons, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("apply_beamsplitter: ratio must lie strictly between 0 and 1");
  }
  Rng rng(seed);
  std::bernoulli_distribution to_a(ratio);
  SplitPhotons out;
  out.arm_a.reserve(static_cast<std::size_t>(photons.size() * ratio) + 16);
  out.arm_b.reserve(static_cast<std::size_t>(photons.size() * (1.0 - ratio)) + 16);
  for (const auto& p : photons) (to_a(rng) ? out.arm_a : out.arm_b).push_back(p);
  return out;
}

double bandpass_transmission(const BandpassSpec& spec, double lambda_nm) {
  return spec.transmission_peak * super_gaussian(lambda_nm, spec.center_nm, spec.fwhm_nm, spec.order);
}

std::vector<Photon> apply_bandpass(std::span<const Photon> photons, const BandpassSpec& spec,
                                   std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Photon> out;
  for (const auto& p : photons) {
    // Always draw so the stream consumption does not depend on wavelength.
    if (unit(rng) < bandpass_transmission(spec, p.lambda_nm)) out.push_back(p);
  }
  return out;
}

double fiber_delay_ps(const FiberSpec& fiber, double lambda_nm) {
  if (fiber.length_km == 0.0) return 0.0;
  return fiber.common_delay_ps +
         fiber.dispersion_ps_per_nm() * (lambda_nm - fiber.reference_wavelength_nm);
}

std::vector<Photon> apply_fiber(std::span<const Photon> photons, const FiberSpec& fiber) {
  validate(fiber);
  std::vector<Photon> out(photons.begin(), photons.end());
  if (fiber.length_km == 0.0) return out;
  for (auto& p : out) p.t_s += fiber_delay_ps(fiber, p.lambda_nm) / kPsPerSecond;
  return out;
}

TimestampStream detect(std::span<const Photon> photons, const DetectorSpec& spec, double duration_s,
                       std::uint64_t seed, std::string channel_id) {
  validate(spec);
  if (!(duration_s > 0.0)) throw std::invalid_argument("detect: duration must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, spec.jitter_sigma_ps / kPsPerSecond);

  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(photons.size() * spec.efficiency +
                                     spec.dark_count_rate_cps * duration_s * 1.1) + 16);
  for (const auto& p : photons) {
    if (!(unit(rng) < spec.efficiency)) continue;
    t.push_back(spec.jitter_sigma_ps > 0.0 ? p.t_s + jitter(rng) : p.t_s);
  }
  if (spec.dark_count_rate_cps > 0.0) {
    std::exponential_distribution<double> gap(spec.dark_count_rate_cps);
    for (double d = gap(rng); d < duration_s; d += gap(rng)) t.push_back(d);
  }
  std::sort(t.begin(), t.end());

  TimestampStream out{std::move(channel_id), {}, duration_s};
  out.t_s.reserve(t.size());
  const double dead_s = spec.dead_time_ns * 1e-9;
  for (double x : t) {
    if (x < 0.0 || x > duration_s) continue;
    if (!out.t_s.empty() && x <= out.t_s.back() + dead_s) continue;
    out.t_s.push_back(x);
  }
  return out;
}

void validate(const SetupSpec& setup) {
  if (setup.name.empty()) throw std::invalid_argument("setup needs a name");
  if (!(setup.split_ratio > 0.0 && setup.split_ratio < 1.0)) {
    throw std::invalid_argument("setup '" + setup.name + "': split ratio must lie strictly between 0 and 1");
  }
  auto check = [](const std::vector<ChainStage>& stages) {
    for (const auto& s : stages) std::visit([](const auto& spec) { validate(spec); }, s);
  };
  check(setup.shared);
  check(setup.arm_a);
  check(setup.arm_b);
  validate(setup.detector_a);
  validate(setup.detector_b);
}

namespace {

std::string describe(const ChainStage& stage) {
  char buf[96];
  if (const auto* b = std::get_if<BandpassSpec>(&stage)) {
    std::snprintf(buf, sizeof buf, "bandpass(%g/%g)", b->center_nm, b->fwhm_nm);
  } else {
    const auto& f = std::get<FiberSpec>(stage);
    std::snprintf(buf, sizeof buf, "fiber(%gkm,%gps/nm/km)", f.length_km, f.dispersion_ps_per_nm_km);
  }
  return buf;
}

std::string describe(const std::vector<ChainStage>& stages) {
  std::string s;
  for (const auto& st : stages) {
    if (!s.empty()) s += ",";
    s += describe(st);
  }
  return "[" + s + "]";
}

std::vector<Photon> apply_stages(std::vector<Photon> photons, const std::vector<ChainStage>& stages,
                                 std::uint64_t seed, const std::string& prefix) {
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const auto& stage = stages[k];
    if (const auto* b = std::get_if<BandpassSpec>(&stage)) {
      photons = apply_bandpass(photons, *b, derive_seed(seed, prefix + "/" + std::to_string(k)));
    } else {
      photons = apply_fiber(photons, std::get<FiberSpec>(stage));
    }
  }
  return photons;
}

}  // namespace

std::string describe(const SetupSpec& setup) {
  char ratio[32];
  std::snprintf(ratio, sizeof ratio, "%.2f", setup.split_ratio);
  return "shared:" + describe(setup.shared) + " > split(" + ratio + ") > a:" + describe(setup.arm_a) +
         " b:" + describe(setup.arm_b);
}

SetupStreams run_setup(std::span<const PairEvent> events, const SetupSpec& setup, double duration_s,
                       std::uint64_t seed) {
  validate(setup);
  const std::string base = "setup/" + setup.name;
  auto photons = apply_stages(photons_from_events(events), setup.shared, seed, base + "/shared");
  auto split = apply_beamsplitter(photons, setup.split_ratio, derive_seed(seed, base + "/split"));
  auto a = apply_stages(std::move(split.arm_a), setup.arm_a, seed, base + "/a");
  auto b = apply_stages(std::move(split.arm_b), setup.arm_b, seed, base + "/b");
  return {detect(a, setup.detector_a, duration_s, derive_seed(seed, base + "/detector/a"), setup.channel_a()),
          detect(b, setup.detector_b, duration_s, derive_seed(seed, base + "/detector/b"), setup.channel_b())};
}

}  // namespace qom
