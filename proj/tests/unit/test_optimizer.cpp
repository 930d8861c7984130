#include <doctest.h>

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "bragg/optimizer.hpp"
#include "support.hpp"

using namespace bragg;
using cplx = std::complex<double>;

namespace {

const AtomSpecies rb = AtomSpecies::rubidium87();

OptimizationConfig small_mirror() {
  OptimizationConfig c = OptimizationConfig::mirror_defaults();
  c.segments = 40;
  c.batch_size = 4;
  c.validation_size = 4;
  c.iterations = 20;
  return c;
}

OptimizationConfig two_level_toy() {
  OptimizationConfig c = OptimizationConfig::mirror_defaults();
  c.order = 1;
  c.basis = BlochBasis(1, 0, 1);
  c.segments = 20;
  c.sigma_p = 0.0;
  c.beta_min = c.beta_max = 0.0;
  c.batch_size = 4;
  c.validation_size = 4;
  c.optimize_detuning = false;
  c.iterations = 500;
  return c;
}

QuadratureControls random_variables(std::size_t n, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  QuadratureControls v;
  v.dt = 1e-6;
  for (std::size_t j = 0; j < n; ++j) {
    v.r.push_back(g(rng));
    v.i.push_back(g(rng));
    v.delta.push_back(g(rng));
  }
  return v;
}

// Two-level transfer from an independent product of 2x2 exponentials.
double two_level_transfer(const PulseWaveform& w) {
  Eigen::Matrix2cd u = Eigen::Matrix2cd::Identity();
  for (const auto& s : w.samples) {
    Eigen::Matrix2cd h;
    h << 0.0, std::polar(s.rabi, s.phase), std::polar(s.rabi, -s.phase), 0.0;
    const Eigen::Matrix2cd a = cplx(0.0, -w.dt) * h;
    u = a.exp() * u;
  }
  return std::norm(u(1, 0));
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("config parsing") {
  const OptimizationConfig c = parse_optimization_config(
      R"({"role": "mirror", "omega_max_khz": 40, "dt_us": 2, "segments": 50, "adam": {"step": 0.02}})");
  CHECK(c.role == PulseRole::mirror);
  CHECK(c.omega_max == doctest::Approx(kTwoPi * 40e3));
  CHECK(c.dt == doctest::Approx(2e-6));
  CHECK(c.segments == 50);
  CHECK(c.adam.step == 0.02);
  const OptimizationConfig bs = parse_optimization_config(R"({"role": "beamsplitter", "omega_max_khz": 40})");
  CHECK(bs.segments == 110);
  CHECK(bs.filter_cutoff == doctest::Approx(kTwoPi * 95e3));

  auto message = [](const char* text) {
    try {
      parse_optimization_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"role": "mirror"})").find("missing field: omega_max") != std::string::npos);
  CHECK(message(R"({"role": "mirror", "omega_max_khz": 40, "omega_mx": 1})") == "unknown field: omega_mx");
  CHECK(message(R"({"role": "mirror", "omega_max_khz": "fast"})") == "invalid value for field: omega_max_khz");
  CHECK_THROWS_AS(parse_optimization_config("{role"), ParseError);
  CHECK_THROWS_AS(parse_optimization_config(R"({"role": "mirror", "omega_max_khz": -1})"), ConfigError);
}

TEST_CASE("control map") {
  const OptimizationConfig c = small_mirror();
  const ControlMap map(c);
  QuadratureControls v = random_variables(c.segments, 3, 5.0);  // far outside the bounds
  const QuadratureControls p = map.forward(v);
  for (std::size_t j = 0; j < p.size(); ++j) {
    CHECK(std::hypot(p.r[j], p.i[j]) < c.omega_max);
    CHECK(std::abs(p.delta[j]) < c.delta_max);
  }
  CHECK(p.r.front() == 0.0);
  CHECK(p.i.back() == 0.0);
  const PulseWaveform w = map.realize(v);
  CHECK(invariant_violations(w).empty());
  CHECK(w.role == PulseRole::mirror);

  // Backward pass against finite differences of a linear functional of forward().
  v = random_variables(c.segments, 4, 0.8);
  const QuadratureControls weights = random_variables(c.segments, 5, 1.0);
  auto functional = [&](const QuadratureControls& x) {
    const QuadratureControls y = map.forward(x);
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j)
      s += weights.r[j] * y.r[j] + weights.i[j] * y.i[j] + weights.delta[j] * y.delta[j];
    return s;
  };
  const QuadratureControls g = map.backward(v, weights);
  for (std::size_t j : {1, 7, 20, 33}) {
    for (int ch = 0; ch < 3; ++ch) {
      QuadratureControls a = v, b = v;
      auto& ra = ch == 0 ? a.r : ch == 1 ? a.i : a.delta;
      auto& rb2 = ch == 0 ? b.r : ch == 1 ? b.i : b.delta;
      ra[j] += 1e-6;
      rb2[j] -= 1e-6;
      const double fd = (functional(a) - functional(b)) / 2e-6;
      const double an = (ch == 0 ? g.r : ch == 1 ? g.i : g.delta)[j];
      CHECK(an == doctest::Approx(fd).epsilon(1e-5).scale(c.omega_max));
    }
  }
}

TEST_CASE("cost gradient") {
  OptimizationConfig c = small_mirror();
  const NoiseEnsemble e = sample_ensemble(c.sigma_p, c.beta_min, c.beta_max, 3, 7);
  const QuadratureControls v = random_variables(c.segments, 8);
  const CostEvaluation g = cost_gradient(c, v, e);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t j = rng() % c.segments;
    const int ch = static_cast<int>(rng() % 3);
    QuadratureControls a = v, b = v;
    (ch == 0 ? a.r : ch == 1 ? a.i : a.delta)[j] += 1e-6;
    (ch == 0 ? b.r : ch == 1 ? b.i : b.delta)[j] -= 1e-6;
    const double fd = (cost_gradient(c, a, e).cost - cost_gradient(c, b, e).cost) / 2e-6;
    const double an = (ch == 0 ? g.gradient.r : ch == 1 ? g.gradient.i : g.gradient.delta)[j];
    CHECK(std::abs(an - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3));
  }

  c.optimize_detuning = false;
  const CostEvaluation fixed = cost_gradient(c, v, e);
  for (double d : fixed.gradient.delta) CHECK(d == 0.0);

  // All-zero amplitudes: finite gradient.
  QuadratureControls zero = v;
  std::fill(zero.r.begin(), zero.r.end(), 0.0);
  std::fill(zero.i.begin(), zero.i.end(), 0.0);
  const CostEvaluation z = cost_gradient(small_mirror(), zero, e);
  CHECK(z.cost == doctest::Approx(1.0));
  for (double x : z.gradient.r) CHECK(std::isfinite(x));
}

TEST_CASE("two-level toy converges") {
  OptimizationConfig c = two_level_toy();
  c.adam.decay_iterations = 100.0;
  const OptimizationResult r = optimize_pulse(c);
  MESSAGE("toy validation cost " << r.validation_cost);
  CHECK(r.validation_cost < 1e-4);
  CHECK(1.0 - two_level_transfer(r.waveform) < 1e-4);
  CHECK(r.trace.cost.size() == c.iterations);
  // With a decaying step the gradient norm falls by three orders of magnitude.
  CHECK(r.trace.gradient_norm.back() < 1e-3 * r.trace.gradient_norm.front());
  CHECK(r.trace.best_cost.back() <= r.trace.best_cost[10]);
}

TEST_CASE("determinism and trace output") {
  const OptimizationConfig c = small_mirror();
  const OptimizationResult a = optimize_pulse(c);
  const OptimizationResult b = optimize_pulse(c);
  CHECK(trace_csv(a.trace) == trace_csv(b.trace));
  CHECK(a.waveform == b.waveform);
  const std::string csv = trace_csv(a.trace);
  CHECK(csv.rfind("iteration,cost,validation_cost,best_cost\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(c.iterations) + 1);
  CHECK(timing_csv(a.trace).rfind("iteration,wall_ms\n", 0) == 0);
  // Validation cost of the returned waveform is what the trace reports as best.
  CHECK(waveform_cost(c, a.waveform, validation_ensemble(c)) == doctest::Approx(a.validation_cost));
}

TEST_CASE("Gaussian calibration") {
  OptimizationConfig c = OptimizationConfig::mirror_defaults();
  c.order = 1;
  c.basis = BlochBasis(1, 0, 1);
  c.omega_max = kTwoPi * 20e3;
  const PulseWaveform w = calibrate_gaussian(c);
  double area = 0.0;
  for (const auto& s : w.samples) area += s.rabi * w.dt;
  CHECK(area == doctest::Approx(kPi / 2.0).epsilon(1e-6));
  CHECK(invariant_violations(w).empty());
}

TEST_CASE("benchmark report") {
  OptimizationConfig c = OptimizationConfig::mirror_defaults();
  c.validation_size = 8;
  const PulseWaveform robust = load_waveform(testing::fixture("robust_mirror.json"));
  LandscapeGrid grid;
  grid.delta_p = linspace(-0.3, 0.3, 7);
  grid.beta = linspace(-0.3, 0.3, 7);
  const BenchmarkReport r = benchmark_pair(c, robust, grid);
  CHECK(r.optimized_landscape.delta_p == r.gaussian_landscape.delta_p);
  CHECK(r.optimized_landscape.beta == r.gaussian_landscape.beta);
  CHECK(r.optimized_cost < r.gaussian_cost);
  const auto doc = nlohmann::json::parse(benchmark_json(r));
  CHECK(doc["optimized"]["landscape"]["fidelity"].size() == 7);
  CHECK(doc["gaussian"].contains("beta_width_90"));
}

}
