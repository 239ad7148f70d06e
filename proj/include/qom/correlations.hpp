#pragma once

#include "qom/detection.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace qom {

/// Histogram of dt = t_b - t_a. Bin k (k = -half_bins .. half_bins) covers
/// [(k - 1/2) w, (k + 1/2) w), so bin 0 is centered on zero delay.
struct CoincidenceHistogram {
  double bin_width_ps = 0.0;
  long half_bins = 0;
  std::vector<std::uint64_t> counts;  // index k + half_bins
  double integration_time_s = 0.0;

  std::size_t size() const { return counts.size(); }
  double bin_center_ps(std::size_t i) const {
    return (static_cast<double>(i) - static_cast<double>(half_bins)) * bin_width_ps;
  }
  double lower_edge_ps() const { return (-static_cast<double>(half_bins) - 0.5) * bin_width_ps; }
  double upper_edge_ps() const { return (static_cast<double>(half_bins) + 0.5) * bin_width_ps; }
  std::uint64_t total() const;
};

/// Bin index of a delay; the one place the binning rule lives.
inline long delay_bin(double dt_ps, double bin_width_ps) {
  return static_cast<long>(std::floor(dt_ps / bin_width_ps + 0.5));
}

/// Windowed merge-join histogram, O(n_a + n_b + matches). The histogram has
/// 2 floor(span / (2 w)) + 1 bins; throws std::invalid_argument below 100
/// bins or for unsorted input.
CoincidenceHistogram coincidence_histogram(const TimestampStream& a, const TimestampStream& b,
                                           double bin_width_ps, double span_ps);

/// Number of pairs with t_b - t_a in [lo_ps, hi_ps).
std::uint64_t count_coincidences(const TimestampStream& a, const TimestampStream& b, double lo_ps,
                                 double hi_ps);

/// g2(0) = R_c / (R_s R_i T_c) with the inputs kept for reporting.
struct CorrelationEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double coincidence_rate = 0.0;  // R_c
  double rate_a = 0.0;            // R_s (or first HBT arm)
  double rate_b = 0.0;            // R_i (or second HBT arm)
  double window_s = 0.0;          // T_c
  double integration_time_s = 0.0;
  double peak_offset_ps = 0.0;
  std::uint64_t coincidences = 0;
  std::uint64_t counts_a = 0;
  std::uint64_t counts_b = 0;
  double accidentals_subtracted = 0.0;
};

struct CorrelationOptions {
  double window_ps = 1000.0;  // T_c
  /// Window center; located from the histogram maximum when unset.
  std::optional<double> peak_offset_ps;
  /// Delay range searched for the peak.
  double search_span_ps = 20000.0;
  /// Remove accidentals estimated from off-peak windows of the same width.
  bool subtract_accidentals = false;
};

/// Thrown when an estimate has no defined value (an empty detector channel).
class EstimateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Delay of the coincidence peak, or 0 when no bin stands out by 5 sigma
/// over the flat accidental level.
double locate_peak_ps(const TimestampStream& a, const TimestampStream& b, double window_ps,
                      double search_span_ps);

/// Signal-idler cross-correlation. Errors assume independent Poisson counts.
CorrelationEstimate g2_cross(const TimestampStream& signal, const TimestampStream& idler,
                             const CorrelationOptions& options = {});

/// Autocorrelation from the two outputs of an HBT beam splitter.
CorrelationEstimate g2_auto(const TimestampStream& arm_1, const TimestampStream& arm_2,
                            const CorrelationOptions& options = {});

struct CauchySchwarzResult {
  double lhs = 0.0;  // g_si^2
  double lhs_error = 0.0;
  double rhs = 0.0;  // g_ss g_ii
  double rhs_error = 0.0;
  bool violated = false;
  double sigma_violation = 0.0;
};

/// Classical bound g_si^2 <= g_ss g_ii with first-order error propagation.
CauchySchwarzResult cs_test(const CorrelationEstimate& g_si, const CorrelationEstimate& g_ss,
                            const CorrelationEstimate& g_ii);
CauchySchwarzResult cs_test(double g_si, double sigma_si, double g_ss, double sigma_ss, double g_ii,
                            double sigma_ii);

struct PowerPoint {
  double power_mW = 0.0;
  double g2 = 0.0;
  double std_error = 0.0;  // 0: unweighted
};

struct PowerScanFit {
  // g = offset + amplitude / P
  double offset = 0.0;
  double amplitude = 0.0;
  double offset_error = 0.0;
  double amplitude_error = 0.0;
  double r_squared = 0.0;
  double chi2_per_dof = 0.0;
  // g = 1 + free_amplitude * P^exponent; unset when the data carry no
  // excess over 1 to fit.
  double free_amplitude = 0.0;
  std::optional<double> exponent;
  double exponent_error = 0.0;
};

/// Least-squares power-law fits. Needs at least 4 distinct positive powers,
/// otherwise throws std::invalid_argument.
PowerScanFit power_scan_fit(std::span<const PowerPoint> points);

}  // namespace qom
