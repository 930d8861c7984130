#include <doctest.h>

#include "bragg/interferometer.hpp"
#include "bragg/optimizer.hpp"
#include "support.hpp"

using namespace bragg;

namespace {

const AtomSpecies rb = AtomSpecies::rubidium87();

InterferometerSequence ideal(int order, double t = 5e-3) {
  InterferometerSequence s;
  s.order = order;
  s.interrogation_time = t;
  return s;
}

// Fringe phase from a fixed-frequency fit of a single-atom phase scan.
double fringe_phase(const InterferometerSequence& seq, const BlochBasis& b) {
  const FringeDataset d = phase_scan(seq, phase_grid(16), {}, SourceDistribution::single_atom(), b, rb);
  return fit_sinusoid(d, static_cast<double>(seq.order), false).phase;
}

double wrapped(double x) { return std::remainder(x, kTwoPi); }

}  // namespace

TEST_SUITE("interferometer") {

TEST_CASE("ideal two-level sequence") {
  // Closed form for [[1,-i],[-i,1]]/sqrt2 - (-i swap) - [[1,-i],[-i,1]]/sqrt2
  // acting on |0>: amplitudes (-1, 0), so the atom returns to m = 0.
  const BlochBasis b(1, 0, 1);
  const ArmPopulations p = run_sequence(ideal(1), b, rb);
  CHECK(p.p1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(p.p2) < 1e-12);
  CHECK(std::abs(p.leakage) < 1e-12);
}

TEST_CASE("ideal order-3 fringe versus readout phase") {
  const BlochBasis b = BlochBasis::for_order(3);
  const auto phases = phase_grid(33);
  const FringeDataset d = phase_scan(ideal(3), phases, {}, SourceDistribution::single_atom(), b, rb);
  for (std::size_t k = 0; k < phases.size(); ++k)
    CHECK(d.values[k] == doctest::Approx(std::cos(3.0 * phases[k])).epsilon(1e-9));
  const SinusoidFit fit = fit_sinusoid(d, 3.0, false);
  CHECK(visibility(fit).value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fit.residual_rms < 1e-10);
}

TEST_CASE("acceleration phase") {
  const BlochBasis b = BlochBasis::for_order(3);
  const double t = 5e-3;
  InterferometerSequence s = ideal(3, t);
  const double base = fringe_phase(s, b);
  CHECK(std::abs(base) < 1e-9);
  s.acceleration = kPi / (6.0 * rb.wavenumber() * t * t);
  CHECK(std::abs(wrapped(fringe_phase(s, b) - base - kPi)) < 1e-8);
  // Matched chirp removes the acceleration phase.
  s.chirp_rate = -2.0 * rb.wavenumber() * s.acceleration;
  CHECK(std::abs(wrapped(fringe_phase(s, b) - base)) < 1e-8);
}

TEST_CASE("finite pulses") {
  const BlochBasis b = BlochBasis::for_order(3);
  InterferometerSequence s = ideal(3);
  s.mirror = load_waveform(testing::fixture("robust_mirror.json"));
  s.beamsplitter = load_waveform(testing::fixture("robust_beamsplitter.json"));
  const ArmPopulations p = run_sequence(s, b, rb);
  CHECK(p.p1 + p.p2 + p.leakage == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(p.leakage >= 0.0);
  CHECK(s.warnings().empty());
  CHECK_THROWS_AS(run_sequence(s, b, rb, 0.0), NumericalError);

  s.interrogation_time = 1e-4;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.interrogation_time = 1.5e-3;
  CHECK(s.warnings().size() == 1);  // pulses longer than a tenth of T
}

TEST_CASE("Gauss-Hermite rule") {
  const GaussHermite g = gauss_hermite(8);
  double w = 0, m1 = 0, m2 = 0, m4 = 0, m6 = 0;
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    const double x = g.nodes[k];
    w += g.weights[k];
    m1 += g.weights[k] * x;
    m2 += g.weights[k] * x * x;
    m4 += g.weights[k] * std::pow(x, 4);
    m6 += g.weights[k] * std::pow(x, 6);
  }
  CHECK(w == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(m1) < 1e-13);
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(m6 == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(gauss_hermite(1).nodes.at(0) == 0.0);
}

TEST_CASE("source average against dense momentum integration") {
  // Short T keeps the open-path oscillation in delta_p resolvable by a dense
  // Simpson rule on the coherent single-atom result.
  const BlochBasis b = BlochBasis::for_order(3);
  InterferometerSequence s = ideal(3, 0.65e-3);
  s.mirror = calibrate_gaussian(OptimizationConfig::mirror_defaults());
  s.beamsplitter = calibrate_gaussian(OptimizationConfig::beamsplitter_defaults());
  s.readout_phase = 0.4;
  const double sigma = 0.2;
  const double lo = -7.0 * sigma, hi = 7.0 * sigma;
  auto dense = [&](auto member) {
    return testing::simpson(
        [&](double dp) {
          InterferometerSequence atom = s;
          atom.delta_p = dp;
          const ArmPopulations p = run_sequence(atom, b, rb, 1.0);
          return std::exp(-0.5 * dp * dp / (sigma * sigma)) / (sigma * std::sqrt(kTwoPi)) * p.*member;
        },
        lo, hi, 3000);
  };
  const ArmPopulations gh = run_sequence(s, SourceDistribution{sigma, 64}, b, rb, 1.0);
  const double p1 = dense(&ArmPopulations::p1);
  const double p2 = dense(&ArmPopulations::p2);
  MESSAGE("P1 " << gh.p1 << " vs " << p1 << ", P2 " << gh.p2 << " vs " << p2);
  CHECK(gh.p1 == doctest::Approx(p1).epsilon(1e-6));
  CHECK(gh.p2 == doctest::Approx(p2).epsilon(1e-6));
  CHECK(gh.p1 + gh.p2 + gh.leakage == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("noisy phase scans are reproducible") {
  const BlochBasis b = BlochBasis::for_order(3);
  InterferometerSequence s = ideal(3);
  s.mirror = calibrate_gaussian(OptimizationConfig::mirror_defaults());
  const SourceDistribution src{0.5, 4};
  const ScanNoise noise{0.1, 77, 3};
  const auto phases = phase_grid(8);
  const FringeDataset a = phase_scan(s, phases, noise, src, b, rb);
  const FringeDataset c = phase_scan(s, phases, noise, src, b, rb);
  CHECK(a.values == c.values);
  CHECK(a.shot_sigma == c.shot_sigma);
  for (double e : a.shot_sigma) CHECK(e > 0.0);
  const FringeDataset other = phase_scan(s, phases, {0.1, 78, 3}, src, b, rb);
  CHECK(other.values != a.values);
  CHECK(a.metadata["noise"]["seed"] == 77);
}

TEST_CASE("chirp scans") {
  const BlochBasis b = BlochBasis::for_order(3);
  const double t = 5e-3;
  const double period = kTwoPi / (3.0 * t * t);
  const auto grid = linspace(-2.0 * period, 2.0 * period, 81);
  SUBCASE("no gravity: extremum at zero chirp") {
    const auto fringes = chirp_scan(ideal(3, t), grid, 0.0, {t}, SourceDistribution::single_atom(), b, rb);
    REQUIRE(fringes.size() == 1);
    CHECK(fringes[0].values[40] == doctest::Approx(1.0).epsilon(1e-9));
    const SinusoidFit fit = fit_sinusoid(fringes[0], std::nullopt, false);
    CHECK(fit.frequency == doctest::Approx(3.0 * t * t).epsilon(1e-6));
    CHECK(std::abs(wrapped(fit.phase)) < 1e-6);
  }
  SUBCASE("gravity: shared extremum at the matched chirp") {
    const double g = 9.79674;
    const double alpha = 2.0 * rb.wavenumber() * g;
    const std::vector<double> times{5e-3, 7.5e-3, 10e-3};
    const double step = kTwoPi / (3.0 * 1e-4) / 16.0;
    std::vector<double> chirps;
    for (int k = -40; k <= 40; ++k) chirps.push_back(alpha + k * step);
    const auto fringes = chirp_scan(ideal(3), chirps, g, times, SourceDistribution::single_atom(), b, rb);
    CHECK(fringes.size() == 3);
    for (const auto& f : fringes) CHECK(f.values[40] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("acceleration scan slope") {
  const BlochBasis b = BlochBasis::for_order(3);
  const double t = 5e-3;
  const double expected = 6.0 * rb.wavenumber() * t * t;
  CHECK(expected == doctest::Approx(1.21e3).epsilon(0.01));
  const auto a = linspace(-2e-3, 2e-3, 5);
  const AccelerationScan scan =
      acceleration_scan(ideal(3, t), a, phase_grid(16), {}, SourceDistribution::single_atom(), b, rb);
  CHECK(std::abs(scan.phase[2]) < 1e-9);
  const LineFit line = extract_scale_factor(scan.acceleration, scan.phase);
  CHECK(std::abs(line.slope) == doctest::Approx(expected).epsilon(1e-6));
  CHECK(scan.fringes.size() == 5);
}

TEST_CASE("phase noise study") {
  const BlochBasis b = BlochBasis::for_order(3);
  InterferometerSequence s = ideal(3);
  s.mirror = calibrate_gaussian(OptimizationConfig::mirror_defaults());
  OptimizationConfig bc = OptimizationConfig::beamsplitter_defaults();
  s.beamsplitter = calibrate_gaussian(bc);
  const PhaseNoiseStats none = phase_noise_study(s, 0.0, 100, 1, b, rb);
  CHECK(none.max_abs < 1e-12);
  std::vector<double> stds;
  for (double sigma : {0.05e-3, 0.1e-3, 0.2e-3}) stds.push_back(phase_noise_study(s, sigma, 100, 3, b, rb).std);
  // Same seed: the draws scale exactly, so the response is linear to first order.
  CHECK(stds[1] / stds[0] == doctest::Approx(2.0).epsilon(0.02));
  CHECK(stds[2] / stds[1] == doctest::Approx(2.0).epsilon(0.02));
  CHECK_THROWS_AS(phase_noise_study(s, 0.1e-3, 50, 3, b, rb), ConfigError);
}

}
