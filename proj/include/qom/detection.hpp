#pragma once

#include "qom/spdc.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace qom {

inline constexpr double kPsPerSecond = 1e12;

// Detector defaults are typical SNSPD figures, not measured values.
struct DetectorSpec {
  double efficiency = 0.8;
  double dark_count_rate_cps = 100.0;
  double jitter_sigma_ps = 50.0;
  double dead_time_ns = 30.0;
};

/// Linear dispersion: delay(lambda) = common_delay + D L (lambda - lambda_ref).
struct FiberSpec {
  double length_km = 3.0;
  double dispersion_ps_per_nm_km = 17.0;
  double reference_wavelength_nm = 1446.0;
  double common_delay_ps = 0.0;

  double dispersion_ps_per_nm() const { return dispersion_ps_per_nm_km * length_km; }
};

/// Super-Gaussian (order 4) flat-top bandpass.
struct BandpassSpec {
  double center_nm = 1400.0;
  double fwhm_nm = 50.0;
  double transmission_peak = 1.0;
  double order = 4.0;
};

void validate(const DetectorSpec& spec);
void validate(const FiberSpec& spec);
void validate(const BandpassSpec& spec);

/// A single photon in flight. pair_id links the two photons of a PairEvent.
struct Photon {
  double t_s = 0.0;
  double lambda_nm = 0.0;
  std::uint64_t pair_id = 0;
};

/// Arrival times on one detector channel, strictly increasing, in [0, duration].
struct TimestampStream {
  std::string channel_id;
  std::vector<double> t_s;
  double duration_s = 0.0;

  std::size_t size() const { return t_s.size(); }
  bool empty() const { return t_s.empty(); }
  double rate_cps() const { return duration_s > 0.0 ? static_cast<double>(t_s.size()) / duration_s : 0.0; }
};

/// Both photons of every event, signal first; pair_id is the event index.
std::vector<Photon> photons_from_events(std::span<const PairEvent> events);

struct SplitPhotons {
  std::vector<Photon> arm_a;
  std::vector<Photon> arm_b;
};

/// Routes each photon to arm A with probability `ratio`, independently.
/// Throws std::invalid_argument unless 0 < ratio < 1.
SplitPhotons apply_beamsplitter(std::span<const Photon> photons, double ratio, std::uint64_t seed);

/// Keeps each photon with probability peak * G(lambda).
std::vector<Photon> apply_bandpass(std::span<const Photon> photons, const BandpassSpec& spec,
                                   std::uint64_t seed);

/// Survival probability of a photon at `lambda_nm`.
double bandpass_transmission(const BandpassSpec& spec, double lambda_nm);

/// Adds the wavelength-dependent group delay. Deterministic.
std::vector<Photon> apply_fiber(std::span<const Photon> photons, const FiberSpec& fiber);

double fiber_delay_ps(const FiberSpec& fiber, double lambda_nm);

/// Single-photon detector: efficiency thinning, Gaussian jitter, Poisson dark
/// counts, clipping to [0, duration], then non-extending dead time. Events
/// closer than the dead time to the last accepted event are dropped; exact
/// duplicates are always dropped so the output is strictly increasing.
TimestampStream detect(std::span<const Photon> photons, const DetectorSpec& spec, double duration_s,
                       std::uint64_t seed, std::string channel_id = {});

using ChainStage = std::variant<BandpassSpec, FiberSpec>;

/// One measurement layout: shared stages, a 2-way fiber beam splitter, then
/// per-arm stages and one detector per arm. Filters placed in `shared`
/// act before the splitter, filters in an arm act after it.
struct SetupSpec {
  std::string name;
  std::vector<ChainStage> shared;
  double split_ratio = 0.5;
  std::vector<ChainStage> arm_a;
  std::vector<ChainStage> arm_b;
  DetectorSpec detector_a;
  DetectorSpec detector_b;

  std::string channel_a() const { return name + ".a"; }
  std::string channel_b() const { return name + ".b"; }
};

void validate(const SetupSpec& setup);

/// Human-readable stage order, e.g. "fiber(3km) > split(0.50) > a:[bandpass(1400/50)]".
std::string describe(const SetupSpec& setup);

struct SetupStreams {
  TimestampStream a;
  TimestampStream b;
};

/// Pushes events through a setup. Every random stage draws from its own
/// named substream of `seed` (setup name + stage position).
SetupStreams run_setup(std::span<const PairEvent> events, const SetupSpec& setup, double duration_s,
                       std::uint64_t seed);

}  // namespace qom
