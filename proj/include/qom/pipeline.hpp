#pragma once

#include "qom/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qom {

enum class TableFormat { kCsv, kJson };

/// Raised when an input stream file belongs to a different scenario.
class ProvenanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Simulation {
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  std::size_t pair_count = 0;
  std::vector<PairEvent> events;
  std::vector<TimestampStream> streams;  // two per setup, in setup order
  nlohmann::json summary;                // rates per pump and channel
};

/// generate -> every setup -> detectors. Setups draw from their own
/// substreams so adding one leaves the others unchanged.
Simulation simulate(const Scenario& scenario, std::uint64_t seed, unsigned threads = 1,
                    std::optional<double> duration_override = {});

struct Analysis {
  std::map<std::string, CoincidenceHistogram> histograms;
  std::map<std::string, CorrelationEstimate> g2;
  std::optional<CauchySchwarzResult> cs;
  std::map<std::string, ReconstructedSpectrum> spectra;
  std::map<std::string, std::vector<SpectralPeak>> peaks;
};

/// Runs every analysis request of the scenario on the given streams.
/// Throws std::runtime_error when a referenced channel is missing.
Analysis analyze(const Scenario& scenario, const std::vector<TimestampStream>& streams);

/// Only the histograms that feed spectra, and the spectra.
Analysis analyze_spectra(const Scenario& scenario, const std::vector<TimestampStream>& streams);

struct ScanTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  nlohmann::json fit;  // null when the scan has no fit
};

/// Pump-power sweep: every pump set to each power, one independent
/// simulation per point (seeded by point index), g2 of the named request,
/// fitted by power_scan_fit. Points run in parallel on `threads`.
ScanTable scan_pump_power(const Scenario& scenario, const std::vector<double>& powers_mW, std::uint64_t seed,
                          unsigned threads, const std::string& g2_request,
                          std::optional<double> duration_override = {});

/// Analytic pair-rate table versus detuning of the degenerate wavelength
/// 2 lambda_p from the first excited resonance of the first metasurface.
ScanTable scan_detuning(const Scenario& scenario, const std::vector<double>& detunings_nm);

/// Values for a scan: "1,2,4", "a..b" (6 log-spaced points for positive
/// bounds, otherwise 21 linear ones), "a..b:n", "+-X" / "±X" with an
/// optional "nm" suffix. Throws std::invalid_argument.
std::vector<double> parse_scan_values(const std::string& text, bool log_spaced);

// Serialization. Every text artifact carries the scenario hash.
std::string histogram_table(const CoincidenceHistogram& h, const std::string& hash, TableFormat format);
std::string spectrum_table(const ReconstructedSpectrum& s, const std::string& hash, TableFormat format);
/// wavelength_nm,transmittance
std::string transmission_table(const Spectrum& transmission, const std::string& hash);
/// One row per g2 estimate; the Cauchy-Schwarz result as a trailing comment.
std::string estimates_table(const Analysis& analysis, const std::string& hash);
/// t_emit_s,lambda_s_nm,lambda_i_nm,pump_index,metasurface_index
std::string events_table(const std::vector<PairEvent>& events, const std::string& hash);
std::string scan_table(const ScanTable& t, const std::string& hash, TableFormat format);
nlohmann::json to_json(const CorrelationEstimate& e);
nlohmann::json to_json(const CauchySchwarzResult& r);
nlohmann::json to_json(const std::vector<SpectralPeak>& peaks);
nlohmann::json to_json(const EntanglementGraph& g);
nlohmann::json to_json(const PumpPlan& plan, const TargetGraph& target);
nlohmann::json analysis_report(const Scenario& scenario, const Analysis& analysis);

/// Output directory written in one go: files plus manifest.json listing
/// their SHA-256, the scenario hash, the seed and library versions. Contents
/// are deterministic so identical inputs give identical bundles.
class Bundle {
 public:
  Bundle(std::string scenario_name, std::string scenario_hash, std::optional<std::uint64_t> seed,
         std::string command);

  void add(const std::string& name, std::string content);
  void add_json(const std::string& name, nlohmann::json content);
  const std::map<std::string, std::string>& files() const { return files_; }
  std::string manifest() const;
  void write(const std::filesystem::path& dir) const;

 private:
  std::string scenario_name_;
  std::string hash_;
  std::optional<std::uint64_t> seed_;
  std::string command_;
  std::map<std::string, std::string> files_;
};

/// Streams from CSV or raw binary files, checked against the scenario hash
/// unless `force`. Binary files are named <channel>.f64.
std::vector<TimestampStream> load_streams(const std::vector<std::filesystem::path>& paths,
                                          const std::string& expected_hash, bool force,
                                          std::optional<double> duration_s);

std::string library_version();

}  // namespace qom
