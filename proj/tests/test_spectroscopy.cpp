#include "oracles.hpp"
#include "qom/spectroscopy.hpp"

#include <doctest.h>

#include <random>

using namespace qom;

namespace {

const FiberSpec kFiber{3.0, 17.0, 1446.0, 0.0};

// Ideal-timing histogram of pairs whose photons both cross the fiber.
CoincidenceHistogram tof_histogram(const std::vector<std::pair<double, double>>& pairs, double jitter_ps,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jit(0.0, jitter_ps > 0 ? jitter_ps : 1.0);
  std::vector<double> ta, tb;
  double t = 0.0;
  for (auto [ls, li] : pairs) {
    t += 1e-6;
    const double j1 = jitter_ps > 0 ? jit(rng) : 0.0;
    const double j2 = jitter_ps > 0 ? jit(rng) : 0.0;
    // Random arm assignment gives both delay signs.
    const bool swap = rng() & 1;
    ta.push_back(t + (fiber_delay_ps(kFiber, swap ? li : ls) + j1) * 1e-12);
    tb.push_back(t + (fiber_delay_ps(kFiber, swap ? ls : li) + j2) * 1e-12);
  }
  std::sort(ta.begin(), ta.end());
  std::sort(tb.begin(), tb.end());
  return coincidence_histogram(oracle::stream(ta, t + 1e-6), oracle::stream(tb, t + 1e-6), 10.0, 24000.0);
}

}  // namespace

TEST_CASE("delay inversion against a bisection oracle") {
  const auto w = delay_to_wavelength(4794.0, kFiber, 718.0);
  CHECK(w.signal_nm == doctest::Approx(1391.0).epsilon(1.0 / 1391.0));
  CHECK(w.idler_nm == doctest::Approx(1485.0).epsilon(1.0 / 1485.0));
  const auto mirrored = delay_to_wavelength(-4794.0, kFiber, 718.0);
  CHECK(mirrored.signal_nm == w.signal_nm);
  CHECK(mirrored.idler_nm == w.idler_nm);
  const auto zero = delay_to_wavelength(0.0, kFiber, 723.0);
  CHECK(zero.signal_nm == doctest::Approx(1446.0));
  CHECK(zero.idler_nm == doctest::Approx(1446.0));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dt(-15000.0, 15000.0), lp(700.0, 740.0);
  for (int i = 0; i < 500; ++i) {
    const double d = dt(rng), p = lp(rng);
    const auto got = delay_to_wavelength(d, kFiber, p);
    const auto [ls, li] = oracle::bisect_delay(d, kFiber.dispersion_ps_per_nm(), p);
    REQUIRE(got.signal_nm == doctest::Approx(ls).epsilon(1e-9));
    REQUIRE(got.idler_nm == doctest::Approx(li).epsilon(1e-9));
  }
  CHECK_THROWS_AS(delay_to_wavelength(1000.0, FiberSpec{0.0}, 718.0), std::domain_error);
  CHECK_THROWS_AS(delay_to_wavelength(40000.0, kFiber, 718.0, 1800.0), std::domain_error);
}

TEST_CASE("resolution from jitter and dispersion") {
  const double t = timing_fwhm_ps(DetectorSpec{}, DetectorSpec{});
  CHECK(t == doctest::Approx(std::sqrt(2.0) * 2.35482 * 50.0).epsilon(1e-5));
  CHECK(spectral_resolution_nm(t, kFiber) == doctest::Approx(3.27).epsilon(0.01));
  FiberSpec longer = kFiber;
  longer.length_km *= 2;
  CHECK(spectral_resolution_nm(t, longer) == doctest::Approx(spectral_resolution_nm(t, kFiber) / 2));
}

TEST_CASE("flat signal spectrum reconstructs flat") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ls(1300.0, 1420.0);
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < 200000; ++i) {
    const double s = ls(rng);
    pairs.push_back({s, idler_wavelength(718.0, s)});
  }
  const auto h = tof_histogram(pairs, 0.0, 5);
  ReconstructionOptions opt;
  opt.lambda_bin_nm = 5.0;
  const auto s = reconstruct_spectrum(h, kFiber, 718.0, opt);
  std::vector<double> inner;
  for (Eigen::Index i = 0; i < s.lambda_nm.size(); ++i) {
    if (s.lambda_nm(i) > 1340.0 && s.lambda_nm(i) < 1410.0) inner.push_back(s.intensity(i));
  }
  REQUIRE(inner.size() >= 12);
  const double mean = std::accumulate(inner.begin(), inner.end(), 0.0) / static_cast<double>(inner.size());
  for (double v : inner) CHECK(v == doctest::Approx(mean).epsilon(0.05));
  // Two photons per coincidence.
  CHECK(s.intensity.sum() == doctest::Approx(2.0 * static_cast<double>(h.total())).epsilon(1e-6));
}

TEST_CASE("line pairs come back at their wavelengths") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> line(0.0, 1.0);
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < 20000; ++i) {
    const double s = (i % 2 ? 1391.0 : 1359.0) + line(rng);
    pairs.push_back({s, idler_wavelength(i % 2 ? 718.0 : 725.0, s)});
  }
  // Pumps differ per line; reconstruct each line with its own pump.
  std::vector<std::pair<double, double>> b_pairs, c_pairs;
  for (std::size_t i = 0; i < pairs.size(); ++i) (i % 2 ? b_pairs : c_pairs).push_back(pairs[i]);
  ReconstructionOptions opt;
  opt.timing_fwhm_ps = timing_fwhm_ps(DetectorSpec{}, DetectorSpec{});
  opt.lambda_bin_nm = 0.5;
  for (auto [set, pump, lines] :
       {std::tuple{b_pairs, 718.0, std::pair{1391.0, idler_wavelength(718.0, 1391.0)}},
        std::tuple{c_pairs, 725.0, std::pair{1359.0, idler_wavelength(725.0, 1359.0)}}}) {
    const auto s = reconstruct_spectrum(tof_histogram(set, 50.0, 7), kFiber, pump, opt);
    const auto peaks = find_peaks(s.lambda_nm, s.intensity);
    REQUIRE(peaks.size() == 2);
    CHECK(std::abs(peaks[0].center_nm - lines.first) < s.resolution_nm);
    CHECK(std::abs(peaks[1].center_nm - lines.second) < s.resolution_nm);
    CHECK(s.lambda_error_nm() == doctest::Approx(s.resolution_nm / 2.35482).epsilon(1e-5));
  }
}

TEST_CASE("zero-delay offset shifts the fold point") {
  std::vector<std::pair<double, double>> pairs(1000, {1391.0, idler_wavelength(718.0, 1391.0)});
  auto h = tof_histogram(pairs, 0.0, 1);
  ReconstructionOptions opt;
  const auto base = find_peaks(reconstruct_spectrum(h, kFiber, 718.0, opt).lambda_nm,
                               reconstruct_spectrum(h, kFiber, 718.0, opt).intensity);
  REQUIRE(base.size() == 2);
  // Shift the whole histogram by 20 bins and tell the reconstruction.
  std::rotate(h.counts.rbegin(), h.counts.rbegin() + 20, h.counts.rend());
  opt.zero_delay_ps = 200.0;
  const auto s = reconstruct_spectrum(h, kFiber, 718.0, opt);
  const auto shifted = find_peaks(s.lambda_nm, s.intensity);
  REQUIRE(shifted.size() == 2);
  CHECK(shifted[0].center_nm == doctest::Approx(base[0].center_nm).epsilon(1e-3));
}

TEST_CASE("peak finder on sampled Gaussians") {
  const auto x = Eigen::ArrayXd::LinSpaced(2001, 1300.0, 1500.0);
  const double s1 = 2.0 / 2.35482, s2 = 5.0 / 2.35482;
  const Eigen::ArrayXd y = (-0.5 * ((x - 1350.0) / s1).square()).exp() +
                           0.5 * (-0.5 * ((x - 1450.0) / s2).square()).exp() +
                           0.01 * (-0.5 * ((x - 1400.0) / s1).square()).exp();
  const auto peaks = find_peaks(x, y, 0.1);
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0].center_nm == doctest::Approx(1350.0));
  CHECK(peaks[0].fwhm_nm == doctest::Approx(2.0).epsilon(0.01));
  CHECK(peaks[1].center_nm == doctest::Approx(1450.0));
  CHECK(peaks[1].fwhm_nm == doctest::Approx(5.0).epsilon(0.01));
  CHECK(peaks[1].height == doctest::Approx(0.5).epsilon(0.01));
  CHECK(find_peaks(x, Eigen::ArrayXd::Zero(x.size())).empty());
}
