#include <doctest.h>

#include <random>

#include "bragg/analysis.hpp"
#include "bragg/fringe.hpp"
#include "bragg/objectives.hpp"

using namespace bragg;

namespace {

std::vector<double> grid(double lo, double hi, int n) { return linspace(lo, hi, static_cast<std::size_t>(n)); }

// Common chirp axis: two periods of the T = 5 ms fringe below alpha*, 1.6 above.
// The injected linear offset is the same on that axis for every T.
FringeDataset chirp_fringe(double t, double alpha_star, int points, double slope) {
  const double w = 3.0 * t * t;
  const double span = kTwoPi / (3.0 * 25e-6);
  FringeDataset d;
  d.scan_variable = "chirp_rate_rad_s2";
  d.scan_values = grid(alpha_star - 2.0 * span, alpha_star + 1.6 * span, points);
  for (double a : d.scan_values) d.values.push_back(0.9 * std::cos(w * (a - alpha_star)) + slope * (a - alpha_star) / span);
  return d;
}

// Maximum of the fitted cosine nearest to x0.
double nearest_maximum(const SinusoidFit& f, double x0) {
  const double k = std::round((f.frequency * x0 + f.phase) / kTwoPi);
  return (kTwoPi * k - f.phase) / f.frequency;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("exact sinusoid") {
  const auto x = grid(0.0, kTwoPi, 33);
  std::vector<double> y;
  for (double v : x) y.push_back(0.7 * std::cos(3.0 * v + 0.4) + 0.1);
  for (bool fixed : {true, false}) {
    const SinusoidFit f = fit_sinusoid(x, y, fixed ? std::optional<double>(3.0) : std::nullopt, false);
    CHECK(f.amplitude == doctest::Approx(0.7).epsilon(1e-8));
    CHECK(f.frequency == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(f.phase == doctest::Approx(0.4).epsilon(1e-8));
    CHECK(f.offset == doctest::Approx(0.1).epsilon(1e-8));
    CHECK(f.phase_error < 1e-8);
    CHECK(f.frequency_fixed == fixed);
  }
  // Negative amplitude data is reported with A > 0 and the phase moved by pi.
  std::vector<double> neg;
  for (double v : x) neg.push_back(-0.5 * std::cos(3.0 * v));
  const SinusoidFit f = fit_sinusoid(x, neg, 3.0, false);
  CHECK(f.amplitude == doctest::Approx(0.5));
  CHECK(std::abs(std::abs(f.phase) - kPi) < 1e-9);
}

TEST_CASE("trend only") {
  const auto x = grid(-1.0, 1.0, 40);
  std::vector<double> y;
  for (double v : x) y.push_back(0.3 + 0.2 * v);
  const SinusoidFit f = fit_sinusoid(x, y, 5.0, true);
  CHECK(std::abs(f.amplitude) <= 3.0 * f.amplitude_error + 1e-12);
  CHECK(f.slope == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(f.offset == doctest::Approx(0.3).epsilon(1e-9));
  CHECK_FALSE(f.slope_fixed);
}

TEST_CASE("phase coverage and error scaling") {
  std::mt19937_64 rng(12345);
  const double sigma = 0.05, phi = 0.8;
  auto run = [&](int points, int repeats, double& mean_error) {
    const auto x = grid(0.0, kTwoPi * (points - 1) / points, points);
    std::normal_distribution<double> noise(0.0, sigma);
    int inside = 0;
    mean_error = 0.0;
    for (int r = 0; r < repeats; ++r) {
      std::vector<double> y;
      for (double v : x) y.push_back(0.6 * std::cos(3.0 * v + phi) + noise(rng));
      const SinusoidFit f = fit_sinusoid(x, y, 3.0, false);
      if (std::abs(std::remainder(f.phase - phi, kTwoPi)) <= f.phase_error) ++inside;
      mean_error += f.phase_error / repeats;
    }
    return static_cast<double>(inside) / repeats;
  };
  double e1 = 0.0, e4 = 0.0;
  const double coverage = run(33, 1000, e1);
  run(132, 200, e4);
  MESSAGE("coverage " << coverage << ", error ratio " << e1 / e4);
  CHECK(coverage == doctest::Approx(0.6827).epsilon(0.03 / 0.6827));
  CHECK(e1 / e4 == doctest::Approx(2.0).epsilon(0.05));
  // The stated error matches the Cramer-Rao value sigma / (A sqrt(N/2)).
  CHECK(e1 == doctest::Approx(sigma / (0.6 * std::sqrt(33.0 / 2.0))).epsilon(0.05));
}

TEST_CASE("visibility") {
  const auto x = grid(0.0, kTwoPi, 25);
  std::vector<double> y, flat;
  for (double v : x) y.push_back(std::cos(v));
  const SinusoidFit f = fit_sinusoid(x, y, 1.0, false);
  CHECK(visibility(f).value == doctest::Approx(1.0));
  CHECK(visibility(f, FringeQuantity::fraction).value == doctest::Approx(2.0));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.01);
  for (std::size_t k = 0; k < x.size(); ++k) flat.push_back(0.2 + n(rng));
  const Measurement v = visibility(fit_sinusoid(x, flat, 1.0, false));
  CHECK(v.value <= 3.0 * v.error);
}

TEST_CASE("scale factor") {
  const double k = kTwoPi / 780.241209686e-9;
  const double s10 = 6.0 * k * 1e-4;
  CHECK(s10 == doctest::Approx(4.83e3).epsilon(0.01));
  const auto a = grid(-1e-3, 1e-3, 7);
  std::vector<double> phase;
  for (double v : a) phase.push_back(s10 * v);
  const LineFit exact = extract_scale_factor(a, phase);
  CHECK(exact.slope == doctest::Approx(s10).epsilon(1e-12));
  CHECK(exact.slope_error < 1e-9);
  CHECK_FALSE(exact.weighted);

  // Two clusters with mixed precision: weighting at least halves the error.
  std::mt19937_64 rng(99);
  std::vector<double> x, y, err;
  for (double centre : {-1.0, 1.0})
    for (int j = 0; j < 10; ++j) {
      const double e = j % 2 ? 0.05 : 0.5;
      std::normal_distribution<double> n(0.0, e);
      x.push_back(centre + 0.02 * j);
      y.push_back(2.0 * x.back() + 1.0 + n(rng));
      err.push_back(e);
    }
  const LineFit w = extract_scale_factor(x, y, err);
  const LineFit u = extract_scale_factor(x, y);
  CHECK(w.weighted);
  CHECK(w.slope_error <= 0.5 * u.slope_error);
  // Weighted error equals sqrt of the inverse Fisher information.
  double sw = 0, swx = 0, swxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double wi = 1.0 / (err[i] * err[i]);
    sw += wi;
    swx += wi * x[i];
    swxx += wi * x[i] * x[i];
  }
  CHECK(w.slope_error == doctest::Approx(std::sqrt(sw / (sw * swxx - swx * swx))).epsilon(1e-10));
}

TEST_CASE("central fringe") {
  const double k = kTwoPi / 780.241209686e-9;
  const double g = 9.79674;
  const double alpha_star = 2.0 * k * g;
  const std::vector<double> times{5e-3, 7.5e-3, 10e-3};
  std::vector<FringeDataset> fringes;
  for (double t : times) fringes.push_back(chirp_fringe(t, alpha_star, 161, 0.0));
  const CentralFringe c = find_central_fringe(fringes, times, k);
  CHECK(c.alpha_star == doctest::Approx(alpha_star).epsilon(1e-12));
  CHECK(std::abs(c.gravity - g) < 1e-6 * 9.80665);
  CHECK(c.selected.size() == 3);
  CHECK(c.candidates[2].alpha.size() > c.candidates[0].alpha.size());

  CHECK_THROWS_AS(find_central_fringe({fringes[0]}, {5e-3}, k), ConfigError);

  // A linear offset pulls the fitted maximum; the trend term matters more at
  // small T, where a fringe spans fewer periods of the chirp axis per unit slope.
  std::vector<double> shift;
  for (double t : times) {
    const FringeDataset d = chirp_fringe(t, alpha_star, 161, 0.05);
    const double with = nearest_maximum(fit_sinusoid(d, std::nullopt, true), alpha_star);
    const double without = nearest_maximum(fit_sinusoid(d, std::nullopt, false), alpha_star);
    shift.push_back(std::abs(with - without));
  }
  MESSAGE("trend-induced centre shifts: " << shift[0] << ", " << shift[1] << ", " << shift[2]);
  CHECK(shift[0] > shift[1]);
  CHECK(shift[1] > shift[2]);
}

TEST_CASE("fringe files") {
  FringeDataset d;
  d.scan_variable = "readout_phase_rad";
  d.scan_values = {0.0, 0.5, 1.0};
  d.values = {1.0, 0.25, -0.125};
  d.shot_sigma = {0.01, 0.02, 0.0};
  CHECK(dataset_violations(d).empty());
  const std::string csv = fringe_csv(d);
  CHECK(csv.rfind("scan_value,asymmetry,shot_sigma\n", 0) == 0);
  const FringeDataset back = parse_fringe_csv(csv);
  CHECK(back.scan_values == d.scan_values);
  CHECK(back.values == d.values);
  CHECK(back.shot_sigma == d.shot_sigma);
  d.values.pop_back();
  CHECK_FALSE(dataset_violations(d).empty());
  CHECK_THROWS_AS(parse_fringe_csv("a,b\n1,2\n"), ConfigError);

  const auto x = grid(0.0, kTwoPi, 20);
  std::vector<double> y;
  for (double v : x) y.push_back(std::cos(v));
  const auto doc = nlohmann::json::parse(fit_json(fit_sinusoid(x, y, 1.0, false)));
  for (const char* key : {"amplitude", "frequency", "phase", "offset", "slope"}) {
    CHECK(doc[key].contains("value"));
    CHECK(doc[key].contains("error"));
  }
  CHECK(doc.contains("residual_rms"));
  CHECK(doc.contains("condition_number"));
}

}
