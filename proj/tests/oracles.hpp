#pragma once

// Reference implementations kept deliberately naive so they share no code
// with the library beyond the public binning rule.

#include "qom/correlations.hpp"
#include "qom/graph.hpp"

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace oracle {

/// Energy conservation in extended precision.
inline long double idler(long double pump_nm, long double signal_nm) {
  return pump_nm * signal_nm / (signal_nm - pump_nm);
}

/// All-pairs delay histogram, O(n_a n_b).
inline std::vector<std::uint64_t> brute_histogram(const std::vector<double>& ta, const std::vector<double>& tb,
                                                  double width_ps, long half_bins) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(2 * half_bins + 1), 0);
  for (double a : ta) {
    for (double b : tb) {
      const long k = qom::delay_bin((b - a) * qom::kPsPerSecond, width_ps);
      if (k >= -half_bins && k <= half_bins) ++counts[static_cast<std::size_t>(k + half_bins)];
    }
  }
  return counts;
}

/// Solves D L (li - ls) = dt together with 1/ls + 1/li = 1/lp by bisection on ls.
inline std::pair<double, double> bisect_delay(double dt_ps, double dl_ps_per_nm, double pump_nm) {
  const double target = std::abs(dt_ps) / dl_ps_per_nm;
  auto gap = [&](double ls) { return (ls * pump_nm / (ls - pump_nm) - ls) - target; };
  double lo = pump_nm * (1.0 + 1e-9);
  double hi = 2.0 * pump_nm;  // gap(hi) = -target <= 0, gap(lo) -> +inf
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) > 0.0 ? lo : hi) = mid;
  }
  const double ls = 0.5 * (lo + hi);
  return {ls, ls * pump_nm / (ls - pump_nm)};
}

/// FWHM of a sampled single peak by linear interpolation at half maximum.
template <typename X, typename Y>
double sampled_fwhm(const X& x, const Y& y) {
  std::size_t imax = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(y.size()); ++i) {
    if (y[i] > y[imax]) imax = i;
  }
  const double half = 0.5 * y[imax];
  std::size_t l = imax, r = imax;
  while (l > 0 && y[l - 1] >= half) --l;
  while (r + 1 < static_cast<std::size_t>(y.size()) && y[r + 1] >= half) ++r;
  const double xl = l == 0 ? x[0] : x[l - 1] + (half - y[l - 1]) * (x[l] - x[l - 1]) / (y[l] - y[l - 1]);
  const std::size_t last = static_cast<std::size_t>(y.size()) - 1;
  const double xr = r == last ? x[last] : x[r] + (y[r] - half) * (x[r + 1] - x[r]) / (y[r] - y[r + 1]);
  return xr - xl;
}

/// Sorted homogeneous Poisson arrivals on [0, duration).
inline std::vector<double> poisson_times(double rate, double duration, std::mt19937_64& rng) {
  std::exponential_distribution<double> gap(rate);
  std::vector<double> t;
  for (double x = gap(rng); x < duration; x += gap(rng)) t.push_back(x);
  return t;
}

inline qom::TimestampStream stream(std::vector<double> t, double duration, std::string id = "x") {
  return {std::move(id), std::move(t), duration};
}

/// A random target graph the planner can realize: each edge has a resonance
/// endpoint, vertices sit >= 10 nm apart, and no stray emission (another
/// resonance under a planned pump) lands within 5 nm of a target vertex.
struct RandomTarget {
  std::vector<qom::Metasurface> metasurfaces;
  qom::TargetGraph target;
};

inline RandomTarget random_feasible_target(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lam(1250.0, 1700.0), q(300.0, 1000.0), axis(0.0, 180.0);
  std::uniform_int_distribution<int> n_res(1, 3), n_off(1, 3);
  for (;;) {
    RandomTarget out;
    std::vector<double> v;
    auto spaced = [&](double x) {
      for (double y : v) {
        if (std::abs(x - y) < 10.0) return false;
      }
      return true;
    };
    const int nr = n_res(rng), no = n_off(rng);
    qom::Metasurface ms;
    ms.name = "rand";
    while (static_cast<int>(v.size()) < nr) {
      const double x = lam(rng);
      if (!spaced(x)) continue;
      v.push_back(x);
      ms.resonances.push_back({"r" + std::to_string(v.size()), x, q(rng), axis(rng)});
    }
    while (static_cast<int>(v.size()) < nr + no) {
      const double x = lam(rng);
      if (spaced(x)) v.push_back(x);
    }
    const std::size_t n = v.size();
    std::vector<std::pair<std::size_t, std::size_t>> candidates;
    for (std::size_t i = 0; i < static_cast<std::size_t>(nr); ++i) {
      for (std::size_t j = i + 1; j < n; ++j) candidates.push_back({i, j});
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::uniform_int_distribution<std::size_t> n_edges(1, std::min<std::size_t>(candidates.size(), 5));
    candidates.resize(n_edges(rng));

    // Stray emission check with the plain formulas.
    bool clean = true;
    for (auto [i, j] : candidates) {
      const double pump = 1.0 / (1.0 / v[i] + 1.0 / v[j]);
      for (const auto& r : ms.resonances) {
        const double c = r.center_wavelength_nm;
        const double partner = static_cast<double>(idler(pump, c));
        for (double x : v) {
          for (double stray : {c, partner}) {
            const double d = std::abs(stray - x);
            if (d > 1e-6 && d < 5.0) clean = false;
          }
        }
      }
    }
    if (!clean) continue;
    out.metasurfaces.push_back(std::move(ms));
    out.target.vertices_nm = std::move(v);
    out.target.edges = std::move(candidates);
    return out;
  }
}

}  // namespace oracle
