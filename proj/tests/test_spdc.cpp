#include "oracles.hpp"
#include "qom/spdc.hpp"
#include "qom/spectroscopy.hpp"

#include <doctest.h>

#include <map>
#include <random>

using namespace qom;

namespace {

Metasurface surface(std::vector<Resonance> rs) {
  Metasurface m;
  m.name = "ms";
  m.resonances = std::move(rs);
  return m;
}

Metasurface qom_a() { return surface({{"ED", 1446.0, 330.0, 0.0}, {"MD", 1512.0, 1000.0, 90.0}}); }
Metasurface qom_b() { return surface({{"ED", 1391.0, 330.0, 0.0}}); }
Metasurface qom_c() { return surface({{"ED", 1359.0, 330.0, 0.0}, {"MD", 1429.0, 1000.0, 90.0}}); }

PumpConfig pump(double nm, double mW = 9.6, double pol = 0.0) {
  PumpConfig p;
  p.wavelength_nm = nm;
  p.power_mW = mW;
  p.pol_deg = pol;
  return p;
}

std::vector<double> peak_centers(const SpectralDensity& d) {
  std::vector<double> out;
  for (const auto& p : find_peaks(d.lambda_nm, d.density, 0.05)) out.push_back(p.center_nm);
  return out;
}

}  // namespace

TEST_CASE("idler wavelength against the extended-precision oracle") {
  CHECK(idler_wavelength(718.0, 1391.0) == doctest::Approx(1485.0).epsilon(1.0 / 1485.0));
  CHECK(idler_wavelength(723.0, 1446.0) == doctest::Approx(1446.0).epsilon(1e-14));
  CHECK(idler_wavelength(725.0, 1359.0) == doctest::Approx(1554.1).epsilon(0.05 / 1554.1));
  CHECK(idler_wavelength(725.0, 1429.0) == doctest::Approx(1471.6).epsilon(0.05 / 1471.6));
  for (auto [p, s] : {std::pair{718.0, 1391.0}, {725.0, 1359.0}, {725.0, 1429.0}, {532.0, 810.0}}) {
    CHECK(idler_wavelength(p, s) == doctest::Approx(static_cast<double>(oracle::idler(p, s))).epsilon(1e-14));
  }
  CHECK(pump_wavelength_for(1359.0, 1554.1) == doctest::Approx(725.0).epsilon(1e-4));
  CHECK_THROWS_AS(idler_wavelength(723.0, 700.0), std::domain_error);
  CHECK_THROWS_AS(idler_wavelength(-1.0, 700.0), std::domain_error);
}

TEST_CASE("idler map is an involution") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lp(400.0, 1000.0), frac(1.05, 3.0);
  for (int i = 0; i < 100000; ++i) {
    const double p = lp(rng);
    const double s = p * frac(rng);
    const double back = idler_wavelength(p, idler_wavelength(p, s));
    REQUIRE(std::abs(back - s) / s < 1e-9);
  }
}

TEST_CASE("density peaks sit where the configurations put them") {
  const auto a = pair_spectral_density(qom_a(), pump(723.0));
  const auto pa = peak_centers(a);
  REQUIRE(pa.size() == 1);
  CHECK(pa[0] == doctest::Approx(1446.0).epsilon(1e-4));

  const auto b = pair_spectral_density(qom_b(), pump(718.0));
  const auto pb = peak_centers(b);
  REQUIRE(pb.size() == 2);
  CHECK(pb[0] == doctest::Approx(1391.0).epsilon(2e-4));
  CHECK(pb[1] == doctest::Approx(idler_wavelength(718.0, 1391.0)).epsilon(0.1 / 1485.0));
  CHECK(std::abs(pb[1] - 1485.0) < 3.0);

  const auto c = pair_spectral_density(qom_c(), pump(725.0, 9.6, 40.0));
  const auto pc = peak_centers(c);
  REQUIRE(pc.size() == 4);
  const double expected[] = {1359.0, 1429.0, 1471.6, 1554.1};
  for (int i = 0; i < 4; ++i) CHECK(pc[i] == doctest::Approx(expected[i]).epsilon(0.2 / expected[i]));
}

TEST_CASE("degenerate emission width before and after a 3 nm instrument") {
  const auto d = pair_spectral_density(qom_a(), pump(723.0));
  const double raw = oracle::sampled_fwhm(d.lambda_nm, d.density);
  // Squared Lorentzian: sqrt(sqrt(2) - 1) of the resonance width.
  CHECK(raw == doctest::Approx(std::sqrt(std::sqrt(2.0) - 1.0) * 1446.0 / 330.0).epsilon(0.02));

  // Direct convolution with a unit-area Gaussian of 3 nm FWHM.
  const double sigma = 3.0 / 2.3548200450309493;
  const double h = d.lambda_nm(1) - d.lambda_nm(0);
  std::vector<double> x, y;
  for (double c = 1420.0; c <= 1472.0; c += 0.05) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < d.lambda_nm.size(); ++k) {
      const double u = (d.lambda_nm(k) - c) / sigma;
      if (std::abs(u) < 8.0) acc += d.density(k) * std::exp(-0.5 * u * u) * h;
    }
    x.push_back(c);
    y.push_back(acc);
  }
  const double convolved = oracle::sampled_fwhm(x, y);
  CHECK(convolved == doctest::Approx(4.3).epsilon(1.0 / 4.3));
  CHECK(convolved == doctest::Approx(4.44).epsilon(0.03));
}

TEST_CASE("zero pump power gives no density and no events") {
  const auto d = pair_spectral_density(qom_a(), pump(723.0, 0.0));
  CHECK((d.density == 0.0).all());
  CHECK(total_pair_rate(qom_a(), pump(723.0, 0.0)) == 0.0);
  const std::vector<Metasurface> ms{qom_a()};
  const std::vector<PumpConfig> ps{pump(723.0, 0.0)};
  CHECK(generate_events(ms, ps, 10.0, StatsMode::kPoisson, 1).empty());
}

TEST_CASE("rate is linear in pump power") {
  const double r1 = total_pair_rate(qom_b(), pump(718.0, 1.0));
  CHECK(total_pair_rate(qom_b(), pump(718.0, 2.0)) / r1 == doctest::Approx(2.0).epsilon(1e-14));
  for (double p : {0.5, 3.0, 9.6, 100.0}) {
    CHECK(total_pair_rate(qom_b(), pump(718.0, p)) / p == doctest::Approx(r1).epsilon(1e-13));
  }
}

TEST_CASE("signal and idler halves carry the same pairs") {
  const auto d = pair_spectral_density(qom_b(), pump(718.0));
  auto at = [&](double x) {
    const double h = d.lambda_nm(1) - d.lambda_nm(0);
    const auto k = static_cast<Eigen::Index>((x - d.lambda_nm(0)) / h);
    const double f = (x - d.lambda_nm(k)) / h;
    return (1.0 - f) * d.density(k) + f * d.density(k + 1);
  };
  for (double s : {1300.0, 1385.0, 1391.0, 1400.0, 1430.0}) {
    CHECK(at(s) == doctest::Approx(at(idler_wavelength(718.0, s))).epsilon(1e-3));
  }

  const std::vector<Metasurface> ms{qom_b()};
  const std::vector<PumpConfig> ps{pump(718.0, 100.0)};
  const double lo = 1380.0, hi = 1400.0;
  std::size_t in_signal = 0, in_idler = 0;
  for (const auto& e : generate_events(ms, ps, 20.0, StatsMode::kPoisson, 4)) {
    for (double l : {e.lambda_s_nm, e.lambda_i_nm}) {
      if (l >= lo && l < hi) ++in_signal;
      if (l > idler_wavelength(718.0, hi) && l <= idler_wavelength(718.0, lo)) ++in_idler;
    }
  }
  CHECK(in_signal > 500);
  CHECK(in_signal == in_idler);
}

TEST_CASE("metasurface outshines the unpatterned film by three orders") {
  const double ratio = total_pair_rate(qom_a(), pump(723.0)) / unpatterned_pair_rate(qom_a(), pump(723.0));
  CHECK(ratio >= 1e3);
  // An enhancement-free film is the rate-constant baseline whatever the resonances.
  CHECK(unpatterned_pair_rate(qom_a(), pump(723.0)) == doctest::Approx(unpatterned_pair_rate(qom_c(), pump(723.0))));
}

TEST_CASE("event count is Poisson around rate times duration") {
  const std::vector<Metasurface> ms{qom_b()};
  const std::vector<PumpConfig> ps{pump(718.0, 1.0)};
  const double rate = total_pair_rate(ms[0], ps[0]);
  const double duration = 2000.0 / rate;
  const double mean = rate * duration;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto ev = generate_events(ms, ps, duration, StatsMode::kPoisson, seed);
    CHECK(std::abs(static_cast<double>(ev.size()) - mean) < 5.0 * std::sqrt(mean));
  }
}

TEST_CASE("events conserve energy, are time ordered and reproducible") {
  const std::vector<Metasurface> ms{qom_c(), qom_b()};
  const std::vector<PumpConfig> ps{pump(725.0, 10.0, 40.0), pump(718.0, 10.0)};
  const auto ev = generate_events(ms, ps, 5.0, "poisson", 99);
  REQUIRE(!ev.empty());
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto& e = ev[i];
    const double lp = ps[e.pump_index].wavelength_nm;
    const double mismatch = 1.0 / e.lambda_s_nm + 1.0 / e.lambda_i_nm - 1.0 / lp;
    REQUIRE(std::abs(mismatch) * lp < 1e-9);
    REQUIRE(e.lambda_s_nm <= e.lambda_i_nm);
    REQUIRE(e.t_emit_s >= 0.0);
    REQUIRE(e.t_emit_s < 5.0);
    if (i) REQUIRE(ev[i - 1].t_emit_s <= e.t_emit_s);
  }
  CHECK(ev == generate_events(ms, ps, 5.0, "poisson", 99));
  GenerationOptions threaded;
  threaded.threads = 4;
  CHECK(ev == generate_events(ms, ps, 5.0, StatsMode::kPoisson, 99, threaded));
  CHECK(ev != generate_events(ms, ps, 5.0, StatsMode::kPoisson, 100));
}

TEST_CASE("adding a pump leaves the other substreams alone") {
  const std::vector<Metasurface> ms{qom_b()};
  const std::vector<PumpConfig> one{pump(718.0, 5.0)};
  const std::vector<PumpConfig> two{pump(718.0, 5.0), pump(700.0, 5.0)};
  std::vector<PairEvent> kept;
  for (const auto& e : generate_events(ms, two, 3.0, StatsMode::kPoisson, 5)) {
    if (e.pump_index == 0) kept.push_back(e);
  }
  CHECK(kept == generate_events(ms, one, 3.0, StatsMode::kPoisson, 5));
}

TEST_CASE("thermal cells carry Bose-Einstein pair numbers") {
  const std::vector<Metasurface> ms{qom_b()};
  const std::vector<PumpConfig> ps{pump(718.0, 1.0)};
  const double rate = total_pair_rate(ms[0], ps[0]);
  for (double mu : {0.2, 1.0, 3.0}) {
    GenerationOptions opt;
    opt.coherence_time_s = mu / rate;
    const double cells = 200000.0;
    const double duration = cells * *opt.coherence_time_s;
    const auto ev = generate_events(ms, ps, duration, StatsMode::kThermalCell, 3, opt);
    std::vector<double> per_cell(static_cast<std::size_t>(cells), 0.0);
    for (const auto& e : ev) per_cell[static_cast<std::size_t>(e.t_emit_s / *opt.coherence_time_s)] += 1.0;
    double sum = 0.0, sq = 0.0;
    for (double n : per_cell) {
      sum += n;
      sq += n * n;
    }
    const double mean = sum / cells;
    const double var = sq / cells - mean * mean;
    CHECK(mean == doctest::Approx(mu).epsilon(0.02));
    CHECK(var / mean == doctest::Approx(1.0 + mean).epsilon(0.03));
  }
}

TEST_CASE("coherence time follows the emission bandwidth") {
  const auto narrow = pair_spectral_density(surface({{"r", 1446.0, 1000.0, 0.0}}), pump(723.0));
  const auto wide = pair_spectral_density(surface({{"r", 1446.0, 100.0, 0.0}}), pump(723.0));
  CHECK(coherence_time_s(narrow) > coherence_time_s(wide));
  CHECK(coherence_time_s(pair_spectral_density(qom_a(), pump(723.0, 0.0))) == 0.0);
}

TEST_CASE("stats mode names and argument checks") {
  CHECK(parse_stats_mode("poisson") == StatsMode::kPoisson);
  CHECK(parse_stats_mode("thermal-cell") == StatsMode::kThermalCell);
  CHECK(to_string(StatsMode::kThermalCell) == "thermal-cell");
  CHECK_THROWS_AS(parse_stats_mode("laser"), std::invalid_argument);
  const std::vector<Metasurface> ms{qom_a()};
  const std::vector<PumpConfig> ps{pump(723.0)};
  CHECK_THROWS_AS(generate_events(ms, ps, 0.0, StatsMode::kPoisson, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_events(ms, ps, 1.0, "bogus", 1), std::invalid_argument);
}
