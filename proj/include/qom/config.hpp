#pragma once

#include "qom/correlations.hpp"
#include "qom/detection.hpp"
#include "qom/graph.hpp"
#include "qom/optics.hpp"
#include "qom/spdc.hpp"
#include "qom/spectroscopy.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qom {

inline constexpr int kSchemaVersion = 1;

/// A scenario that cannot be used as written. `path` is a JSON pointer to
/// the offending field, `line` its approximate line in the source text.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string path, const std::string& message, int line = 0);

  const std::string& path() const { return path_; }
  int line() const { return line_; }

 private:
  std::string path_;
  int line_;
};

/// Channel pair for correlation requests: `setup` expands to <setup>.a/.b.
struct ChannelPair {
  std::string a;
  std::string b;
};

struct HistogramRequest {
  std::string name;
  std::string setup;
  ChannelPair channels;
  double bin_ps = 10.0;
  double span_ps = 24000.0;
};

enum class G2Kind { kCross, kAuto };

struct G2Request {
  std::string name;
  G2Kind kind = G2Kind::kCross;
  std::string setup;
  ChannelPair channels;
  CorrelationOptions options;
};

struct CsRequest {
  std::string si, ss, ii;  // names of g2 requests
};

struct SpectrumRequest {
  std::string name;
  std::string histogram;
  std::size_t pump = 0;
  ReconstructionOptions options;  // timing FWHM filled from the setup detectors
  double min_relative_height = 0.1;
};

struct AnalysisSpec {
  std::vector<HistogramRequest> histograms;
  std::vector<G2Request> g2;
  std::optional<CsRequest> cs;
  std::vector<SpectrumRequest> spectra;
};

struct GraphRequest {
  GraphOptions options;
  std::optional<TargetGraph> target;
};

struct ScanSpec {
  std::string param;  // "pump_power" or "detuning"
  std::vector<double> values;
  std::string g2;  // request evaluated at each power point
  std::optional<double> duration_s;
};

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name;
  std::optional<std::uint64_t> seed;
  double duration_s = 0.0;
  std::vector<Metasurface> metasurfaces;
  std::vector<PumpConfig> pumps;
  StatsMode stats_mode = StatsMode::kPoisson;
  GenerationOptions generation;
  std::vector<SetupSpec> setups;
  AnalysisSpec analysis;
  std::optional<GraphRequest> graph;
  std::optional<ScanSpec> scan;

  /// The document as parsed; the hash is taken over its canonical dump.
  nlohmann::json document;

  const SetupSpec* find_setup(const std::string& name) const;
  const HistogramRequest* find_histogram(const std::string& name) const;
  const G2Request* find_g2(const std::string& name) const;
  /// First fiber on the path to detector a of a setup (shared stages first).
  const FiberSpec* setup_fiber(const std::string& setup) const;
};

/// Parses and validates a scenario document. Unknown keys, missing fields,
/// out-of-range values and dangling references throw ValidationError.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

/// SHA-256 of the canonical document with `seed` substituted when given.
std::string scenario_hash(const Scenario& scenario, std::optional<std::uint64_t> seed = {});

/// Root seed: the override, else the scenario's; throws ValidationError when neither exists.
std::uint64_t resolve_seed(const Scenario& scenario, std::optional<std::uint64_t> seed_override);

}  // namespace qom
