#include "qom/correlations.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace qom {

namespace {

void require_sorted(const TimestampStream& s) {
  if (!std::is_sorted(s.t_s.begin(), s.t_s.end())) {
    throw std::invalid_argument("stream '" + s.channel_id + "' is not sorted by time");
  }
}

double integration_time(const TimestampStream& a, const TimestampStream& b) {
  return std::min(a.duration_s, b.duration_s);
}

// Calls visit(bin) for every pair whose delay bin lies in [bin_lo, bin_hi].
template <typename Visit>
void join_bins(const std::vector<double>& ta, const std::vector<double>& tb, double width_ps,
               long bin_lo, long bin_hi, Visit&& visit) {
  // Candidate range padded by one bin on each side; the bin rule decides.
  const double lo_s = (static_cast<double>(bin_lo) - 1.5) * width_ps / kPsPerSecond;
  const double hi_s = (static_cast<double>(bin_hi) + 1.5) * width_ps / kPsPerSecond;
  std::size_t start = 0;
  for (double t : ta) {
    while (start < tb.size() && tb[start] < t + lo_s) ++start;
    for (std::size_t j = start; j < tb.size() && tb[j] < t + hi_s; ++j) {
      const long bin = delay_bin((tb[j] - t) * kPsPerSecond, width_ps);
      if (bin >= bin_lo && bin <= bin_hi) visit(bin);
    }
  }
}

std::vector<std::uint64_t> histogram_counts(const TimestampStream& a, const TimestampStream& b,
                                            double width_ps, long half_bins) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(2 * half_bins + 1), 0);
  join_bins(a.t_s, b.t_s, width_ps, -half_bins, half_bins,
            [&](long bin) { ++counts[static_cast<std::size_t>(bin + half_bins)]; });
  return counts;
}

CorrelationEstimate estimate(const TimestampStream& a, const TimestampStream& b,
                             const CorrelationOptions& options) {
  require_sorted(a);
  require_sorted(b);
  if (!(options.window_ps > 0.0)) throw std::invalid_argument("coincidence window must be positive");
  const double duration = integration_time(a, b);
  if (!(duration > 0.0)) throw EstimateError("streams have no integration time");
  if (a.empty() || b.empty()) {
    throw EstimateError("zero singles rate on '" + (a.empty() ? a.channel_id : b.channel_id) +
                        "': g2 is undefined");
  }

  CorrelationEstimate e;
  e.integration_time_s = duration;
  e.window_s = options.window_ps / kPsPerSecond;
  e.peak_offset_ps = options.peak_offset_ps.value_or(
      locate_peak_ps(a, b, options.window_ps, options.search_span_ps));
  const double half = 0.5 * options.window_ps;
  e.coincidences = count_coincidences(a, b, e.peak_offset_ps - half, e.peak_offset_ps + half);
  e.counts_a = a.size();
  e.counts_b = b.size();

  const double na = static_cast<double>(e.counts_a);
  const double nb = static_cast<double>(e.counts_b);
  double nc = static_cast<double>(e.coincidences);
  double nc_var = std::max(nc, 1.0);
  if (options.subtract_accidentals) {
    constexpr int kSide = 10;
    double side = 0.0;
    for (int k = 5; k < 5 + kSide; ++k) {
      for (double sign : {-1.0, 1.0}) {
        const double c = e.peak_offset_ps + sign * k * options.window_ps;
        side += static_cast<double>(count_coincidences(a, b, c - half, c + half));
      }
    }
    e.accidentals_subtracted = side / (2 * kSide);
    nc -= e.accidentals_subtracted;
    nc_var += e.accidentals_subtracted / (2 * kSide);
  }

  const double norm = duration / (na * nb * e.window_s);
  e.coincidence_rate = nc / duration;
  e.rate_a = na / duration;
  e.rate_b = nb / duration;
  e.value = nc * norm;
  if (!options.subtract_accidentals) e.value = std::max(e.value, 0.0);
  if (e.coincidences > 0) {
    const double rel2 = nc_var / (nc * nc) + 1.0 / na + 1.0 / nb;
    e.std_error = std::abs(e.value) * std::sqrt(rel2);
  } else {
    // No coincidences: quote the one-count scale.
    e.std_error = std::sqrt(nc_var) * norm;
  }
  return e;
}

}  // namespace

std::uint64_t CoincidenceHistogram::total() const {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

CoincidenceHistogram coincidence_histogram(const TimestampStream& a, const TimestampStream& b,
                                           double bin_width_ps, double span_ps) {
  if (!(bin_width_ps > 0.0)) throw std::invalid_argument("histogram bin width must be positive");
  const auto half_bins = static_cast<long>(std::floor(span_ps / (2.0 * bin_width_ps)));
  if (2 * half_bins + 1 < 100) {
    throw std::invalid_argument("histogram span must cover at least 100 bins");
  }
  require_sorted(a);
  require_sorted(b);
  CoincidenceHistogram h;
  h.bin_width_ps = bin_width_ps;
  h.half_bins = half_bins;
  h.integration_time_s = integration_time(a, b);
  h.counts = histogram_counts(a, b, bin_width_ps, half_bins);
  return h;
}

std::uint64_t count_coincidences(const TimestampStream& a, const TimestampStream& b, double lo_ps,
                                 double hi_ps) {
  require_sorted(a);
  require_sorted(b);
  if (!(hi_ps > lo_ps)) return 0;
  std::uint64_t n = 0;
  std::size_t start = 0;
  const auto& tb = b.t_s;
  for (double t : a.t_s) {
    while (start < tb.size() && (tb[start] - t) * kPsPerSecond < lo_ps) ++start;
    for (std::size_t j = start; j < tb.size(); ++j) {
      const double dt = (tb[j] - t) * kPsPerSecond;
      if (dt >= hi_ps) break;
      ++n;
    }
  }
  return n;
}

double locate_peak_ps(const TimestampStream& a, const TimestampStream& b, double window_ps,
                      double search_span_ps) {
  constexpr long kSub = 10;
  const double fine = window_ps / kSub;
  const auto half_bins = static_cast<long>(std::floor(search_span_ps / (2.0 * fine)));
  if (half_bins < 2 * kSub) return 0.0;
  const auto counts = histogram_counts(a, b, fine, half_bins);
  // Boxcar sums over one window width; position p covers bins p .. p+kSub-1.
  const std::size_t positions = counts.size() - kSub + 1;
  std::vector<double> box(positions, 0.0);
  double run = 0.0;
  for (long k = 0; k < kSub; ++k) run += static_cast<double>(counts[k]);
  box[0] = run;
  for (std::size_t p = 1; p < positions; ++p) {
    run += static_cast<double>(counts[p + kSub - 1]) - static_cast<double>(counts[p - 1]);
    box[p] = run;
  }
  const auto best = static_cast<std::size_t>(std::max_element(box.begin(), box.end()) - box.begin());
  // Flat level from the histogram median, robust against the peak itself.
  // Sparse histograms have a zero median, so the off-peak mean backs it up.
  std::vector<std::uint64_t> sorted(counts);
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  const double off_peak = (total - box[best]) / static_cast<double>(counts.size() - kSub) * kSub;
  const double level = std::max(static_cast<double>(sorted[sorted.size() / 2]) * kSub, off_peak);
  if (box[best] <= level + 5.0 * std::sqrt(std::max(level, 1.0))) return 0.0;
  // Window center: middle of the winning run of kSub fine bins.
  const double first_center = (static_cast<double>(best) - static_cast<double>(half_bins)) * fine;
  return first_center + 0.5 * (kSub - 1) * fine;
}

CorrelationEstimate g2_cross(const TimestampStream& signal, const TimestampStream& idler,
                             const CorrelationOptions& options) {
  return estimate(signal, idler, options);
}

CorrelationEstimate g2_auto(const TimestampStream& arm_1, const TimestampStream& arm_2,
                            const CorrelationOptions& options) {
  return estimate(arm_1, arm_2, options);
}

CauchySchwarzResult cs_test(double g_si, double sigma_si, double g_ss, double sigma_ss, double g_ii,
                            double sigma_ii) {
  CauchySchwarzResult r;
  r.lhs = g_si * g_si;
  r.lhs_error = 2.0 * std::abs(g_si) * sigma_si;
  r.rhs = g_ss * g_ii;
  r.rhs_error = std::hypot(g_ii * sigma_ss, g_ss * sigma_ii);
  r.violated = r.lhs > r.rhs;
  const double diff = r.lhs - r.rhs;
  const double sigma = std::hypot(r.lhs_error, r.rhs_error);
  if (sigma > 0.0) {
    r.sigma_violation = diff / sigma;
  } else {
    r.sigma_violation = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  }
  return r;
}

CauchySchwarzResult cs_test(const CorrelationEstimate& g_si, const CorrelationEstimate& g_ss,
                            const CorrelationEstimate& g_ii) {
  return cs_test(g_si.value, g_si.std_error, g_ss.value, g_ss.std_error, g_ii.value, g_ii.std_error);
}

PowerScanFit power_scan_fit(std::span<const PowerPoint> points) {
  std::set<double> distinct;
  for (const auto& p : points) {
    if (!(p.power_mW > 0.0) || !std::isfinite(p.power_mW) || !std::isfinite(p.g2)) {
      throw std::invalid_argument("power_scan_fit: powers must be positive and values finite");
    }
    distinct.insert(p.power_mW);
  }
  if (distinct.size() < 4) {
    throw std::invalid_argument("power_scan_fit: needs at least 4 distinct pump powers");
  }

  const auto n = static_cast<Eigen::Index>(points.size());
  const bool weighted =
      std::all_of(points.begin(), points.end(), [](const PowerPoint& p) { return p.std_error > 0.0; });
  Eigen::VectorXd power(n), g(n), w(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    power(k) = points[k].power_mW;
    g(k) = points[k].g2;
    w(k) = weighted ? 1.0 / (points[k].std_error * points[k].std_error) : 1.0;
  }
  const Eigen::VectorXd sw = w.cwiseSqrt();

  PowerScanFit fit;

  // g = c + a / P, linear in (c, a).
  Eigen::MatrixXd design(n, 2);
  design.col(0).setOnes();
  design.col(1) = power.cwiseInverse();
  const Eigen::MatrixXd wd = sw.asDiagonal() * design;
  const Eigen::VectorXd wg = sw.cwiseProduct(g);
  const Eigen::Vector2d coef = wd.colPivHouseholderQr().solve(wg);
  fit.offset = coef(0);
  fit.amplitude = coef(1);
  const Eigen::VectorXd resid = g - design * coef;
  const double chi2 = resid.cwiseProduct(resid).dot(w);
  const double dof = static_cast<double>(n - 2);
  fit.chi2_per_dof = chi2 / dof;
  const double mean = g.dot(w) / w.sum();
  const double total = (g.array() - mean).square().matrix().dot(w);
  fit.r_squared = total > 0.0 ? 1.0 - chi2 / total : 1.0;
  {
    Eigen::Matrix2d cov = (wd.transpose() * wd).inverse();
    if (!weighted) cov *= fit.chi2_per_dof;
    fit.offset_error = std::sqrt(std::max(cov(0, 0), 0.0));
    fit.amplitude_error = std::sqrt(std::max(cov(1, 1), 0.0));
  }

  // g = 1 + a P^b. Start from a log-log regression of the positive excess.
  const Eigen::VectorXd excess = g.array() - 1.0;
  std::vector<Eigen::Index> positive;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (excess(k) > 1e-12 * std::max(1.0, std::abs(g(k)))) positive.push_back(k);
  }
  std::set<double> positive_powers;
  for (auto k : positive) positive_powers.insert(power(k));
  if (positive_powers.size() < 2) return fit;

  const auto m = static_cast<Eigen::Index>(positive.size());
  Eigen::MatrixXd logx(m, 2);
  Eigen::VectorXd logy(m), lw(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto k = positive[j];
    logx(j, 0) = 1.0;
    logx(j, 1) = std::log(power(k));
    logy(j) = std::log(excess(k));
    lw(j) = std::sqrt(w(k)) * excess(k);  // sigma(log y) = sigma / y
  }
  const Eigen::Vector2d loglin =
      (lw.asDiagonal() * logx).colPivHouseholderQr().solve(lw.cwiseProduct(logy));
  Eigen::Vector2d theta(std::exp(loglin(0)), loglin(1));

  auto residuals = [&](const Eigen::Vector2d& t) {
    Eigen::VectorXd r(n);
    for (Eigen::Index k = 0; k < n; ++k) r(k) = sw(k) * (excess(k) - t(0) * std::pow(power(k), t(1)));
    return r;
  };
  auto jacobian = [&](const Eigen::Vector2d& t) {
    Eigen::MatrixXd j(n, 2);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double pb = std::pow(power(k), t(1));
      j(k, 0) = sw(k) * pb;
      j(k, 1) = sw(k) * t(0) * pb * std::log(power(k));
    }
    return j;
  };

  // Levenberg-Marquardt on the two parameters.
  double lambda = 1e-3;
  Eigen::VectorXd r = residuals(theta);
  double cost = r.squaredNorm();
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::MatrixXd j = jacobian(theta);
    const Eigen::Matrix2d jtj = j.transpose() * j;
    const Eigen::Vector2d grad = j.transpose() * r;
    Eigen::Matrix2d damped = jtj;
    damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
    const Eigen::Vector2d step = damped.ldlt().solve(grad);
    const Eigen::Vector2d trial = theta + step;
    const Eigen::VectorXd rt = residuals(trial);
    const double trial_cost = rt.squaredNorm();
    if (std::isfinite(trial_cost) && trial_cost <= cost) {
      const bool converged = cost - trial_cost <= 1e-15 * std::max(cost, 1e-300) &&
                             step.norm() <= 1e-12 * (theta.norm() + 1e-12);
      theta = trial;
      r = rt;
      cost = trial_cost;
      lambda = std::max(lambda / 10.0, 1e-12);
      if (converged) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }
  fit.free_amplitude = theta(0);
  fit.exponent = theta(1);
  const Eigen::MatrixXd j = jacobian(theta);
  Eigen::Matrix2d cov = (j.transpose() * j).inverse();
  if (!weighted) cov *= cost / dof;
  fit.exponent_error = std::sqrt(std::max(cov(1, 1), 0.0));
  return fit;
}

}  // namespace qom
