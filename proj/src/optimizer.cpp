#include "bragg/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <nlohmann/json.hpp>

namespace bragg {

using nlohmann::json;

OptimizationConfig OptimizationConfig::mirror_defaults() { return OptimizationConfig{}; }

OptimizationConfig OptimizationConfig::beamsplitter_defaults() {
  OptimizationConfig c;
  c.role = PulseRole::beamsplitter;
  c.segments = 110;
  c.filter_cutoff = kTwoPi * 95e3;
  return c;
}

void OptimizationConfig::validate() const {
  if (role == PulseRole::custom) throw ConfigError("role must be mirror or beamsplitter");
  if (order < 1) throw ConfigError("order must be >= 1");
  if (segments < 3) throw ConfigError("segments must be >= 3");
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(dt, "dt");
  positive(omega_max, "omega_max");
  positive(delta_max, "delta_max");
  positive(filter_cutoff, "filter_cutoff");
  positive(adam.step, "adam.step");
  positive(adam.epsilon, "adam.epsilon");
  positive(bound_sharpness, "bound_sharpness");
  positive(init_fraction, "init_fraction");
  positive(gaussian_sigma_tau, "gaussian_sigma_tau");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("adam.beta1 must be in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("adam.beta2 must be in [0, 1)");
  if (adam.decay_iterations < 0.0) throw ConfigError("adam.decay_iterations must be >= 0");
  if (sigma_p < 0.0) throw ConfigError("sigma_p must be non-negative");
  if (!(beta_min <= beta_max)) throw ConfigError("beta_min must not exceed beta_max");
  if (!(beta_min > -1.0)) throw ConfigError("beta_min must exceed -1");
  if (batch_size < 4) throw ConfigError("batch_size must be >= 4");
  if (validation_size < 1) throw ConfigError("validation_size must be >= 1");
  if (validation_every < 1) throw ConfigError("validation_every must be >= 1");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (gaussian_segments < 3) throw ConfigError("gaussian_segments must be >= 3");
  if (bound_sharpness < 2.0) throw ConfigError("bound_sharpness must be >= 2");
  if (basis && basis->order() != order) throw ConfigError("basis order differs from pulse order");
}

namespace {

double khz(double v) { return kTwoPi * 1e3 * v; }

template <class T>
T field(const json& doc, const char* key, const T& fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("invalid value for field: ") + key);
  }
}

}  // namespace

OptimizationConfig parse_optimization_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("config must be a JSON object");

  static const std::set<std::string> known = {
      "role", "order", "segments", "dt_us", "omega_max_khz", "delta_max_khz",
      "filter_cutoff_khz", "sigma_p_hbar_k", "beta_min", "beta_max", "batch_size",
      "validation_size", "validation_every", "iterations", "resample", "optimize_detuning",
      "seed", "phase_grid", "mirror_phase_rad", "bound_sharpness", "init_fraction",
      "gaussian_sigma_tau_us", "gaussian_segments", "adam", "basis", "comment"};
  for (const auto& item : doc.items())
    if (!known.count(item.key())) throw ConfigError("unknown field: " + item.key());

  if (!doc.contains("role")) throw ConfigError("missing field: role");
  if (!doc.contains("omega_max_khz")) throw ConfigError("missing field: omega_max_khz");
  const PulseRole role = parse_role(field<std::string>(doc, "role", ""));
  OptimizationConfig c = role == PulseRole::beamsplitter ? OptimizationConfig::beamsplitter_defaults()
                                                         : OptimizationConfig::mirror_defaults();
  if (role == PulseRole::custom) throw ConfigError("role must be mirror or beamsplitter");
  c.order = field(doc, "order", c.order);
  c.segments = field(doc, "segments", c.segments);
  c.dt = 1e-6 * field(doc, "dt_us", c.dt * 1e6);
  c.omega_max = khz(field(doc, "omega_max_khz", 0.0));
  c.delta_max = khz(field(doc, "delta_max_khz", c.delta_max / khz(1.0)));
  c.filter_cutoff = khz(field(doc, "filter_cutoff_khz", c.filter_cutoff / khz(1.0)));
  c.sigma_p = field(doc, "sigma_p_hbar_k", c.sigma_p);
  c.beta_min = field(doc, "beta_min", c.beta_min);
  c.beta_max = field(doc, "beta_max", c.beta_max);
  c.batch_size = field(doc, "batch_size", c.batch_size);
  c.validation_size = field(doc, "validation_size", c.validation_size);
  c.validation_every = field(doc, "validation_every", c.validation_every);
  c.iterations = field(doc, "iterations", c.iterations);
  c.resample = field(doc, "resample", c.resample);
  c.optimize_detuning = field(doc, "optimize_detuning", c.optimize_detuning);
  c.seed = field(doc, "seed", c.seed);
  c.phase_grid = field(doc, "phase_grid", c.phase_grid);
  c.mirror_phase = field(doc, "mirror_phase_rad", c.mirror_phase);
  c.bound_sharpness = field(doc, "bound_sharpness", c.bound_sharpness);
  c.init_fraction = field(doc, "init_fraction", c.init_fraction);
  c.gaussian_sigma_tau = 1e-6 * field(doc, "gaussian_sigma_tau_us", c.gaussian_sigma_tau * 1e6);
  c.gaussian_segments = field(doc, "gaussian_segments", c.gaussian_segments);
  if (doc.contains("adam")) {
    const json& a = doc.at("adam");
    if (!a.is_object()) throw ConfigError("invalid value for field: adam");
    c.adam.step = field(a, "step", c.adam.step);
    c.adam.beta1 = field(a, "beta1", c.adam.beta1);
    c.adam.beta2 = field(a, "beta2", c.adam.beta2);
    c.adam.epsilon = field(a, "epsilon", c.adam.epsilon);
    c.adam.decay_iterations = field(a, "decay_iterations", c.adam.decay_iterations);
  }
  if (doc.contains("basis")) {
    const json& b = doc.at("basis");
    if (!b.is_object() || !b.contains("m_min") || !b.contains("m_max"))
      throw ConfigError("invalid value for field: basis (needs m_min and m_max)");
    c.basis = BlochBasis(c.order, field(b, "m_min", 0), field(b, "m_max", 0));
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

namespace {

// Intermediate values of the smooth peak bound for one channel group.
struct Saturation {
  double scale = 1.0;
  double log_sum = 0.0;  // log(1 + sum a_j^p)
  std::vector<double> magnitude;
};

Saturation saturate(const std::vector<double>& x, const std::vector<double>* y, double p) {
  Saturation s;
  s.magnitude.resize(x.size());
  double top = 0.0;  // log-sum-exp over {0} and p log a_j
  for (std::size_t j = 0; j < x.size(); ++j) {
    s.magnitude[j] = y ? std::hypot(x[j], (*y)[j]) : std::abs(x[j]);
    if (s.magnitude[j] > 0.0) top = std::max(top, p * std::log(s.magnitude[j]));
  }
  double acc = std::exp(-top);
  for (double a : s.magnitude)
    if (a > 0.0) acc += std::exp(p * std::log(a) - top);
  s.log_sum = top + std::log(acc);
  s.scale = std::exp(-s.log_sum / p);
  return s;
}

// a^(p-2) / (1 + sum a^p), the common factor of d scale / d x_k.
double saturation_weight(const Saturation& s, std::size_t k, double p) {
  const double a = s.magnitude[k];
  if (a <= 0.0) return 0.0;
  return std::exp((p - 2.0) * std::log(a) - s.log_sum);
}

void zero_ends(std::vector<double>& v) {
  v.front() = 0.0;
  v.back() = 0.0;
}

}  // namespace

ControlMap::ControlMap(const OptimizationConfig& config)
    : config_(config), filter_(config.segments, config.dt, config.filter_cutoff) {
  config_.validate();
}

QuadratureControls ControlMap::forward(const QuadratureControls& v) const {
  if (v.size() != config_.segments) throw ConfigError("variables do not match the config grid");
  const double p = config_.bound_sharpness;
  auto r = filter_.apply(v.r);
  auto i = filter_.apply(v.i);
  zero_ends(r);
  zero_ends(i);
  const Saturation amp = saturate(r, &i, p);

  QuadratureControls out;
  out.dt = config_.dt;
  out.r.resize(r.size());
  out.i.resize(r.size());
  out.delta.assign(r.size(), 0.0);
  for (std::size_t j = 0; j < r.size(); ++j) {
    out.r[j] = config_.omega_max * amp.scale * r[j];
    out.i[j] = config_.omega_max * amp.scale * i[j];
  }
  if (config_.optimize_detuning) {
    const auto d = filter_.apply(v.delta);
    const Saturation det = saturate(d, nullptr, p);
    for (std::size_t j = 0; j < d.size(); ++j) out.delta[j] = config_.delta_max * det.scale * d[j];
  }
  return out;
}

QuadratureControls ControlMap::backward(const QuadratureControls& v,
                                        const QuadratureControls& g) const {
  const double p = config_.bound_sharpness;
  auto r = filter_.apply(v.r);
  auto i = filter_.apply(v.i);
  zero_ends(r);
  zero_ends(i);
  const Saturation amp = saturate(r, &i, p);
  double u = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) u += g.r[j] * r[j] + g.i[j] * i[j];
  std::vector<double> gr(r.size()), gi(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double w = saturation_weight(amp, k, p);
    gr[k] = config_.omega_max * amp.scale * (g.r[k] - u * w * r[k]);
    gi[k] = config_.omega_max * amp.scale * (g.i[k] - u * w * i[k]);
  }
  zero_ends(gr);
  zero_ends(gi);

  QuadratureControls out;
  out.dt = v.dt;
  out.r = filter_.apply_transpose(gr);
  out.i = filter_.apply_transpose(gi);
  out.delta.assign(r.size(), 0.0);
  if (config_.optimize_detuning) {
    const auto d = filter_.apply(v.delta);
    const Saturation det = saturate(d, nullptr, p);
    double ud = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) ud += g.delta[j] * d[j];
    std::vector<double> gd(d.size());
    for (std::size_t k = 0; k < d.size(); ++k)
      gd[k] = config_.delta_max * det.scale * (g.delta[k] - ud * saturation_weight(det, k, p) * d[k]);
    out.delta = filter_.apply_transpose(gd);
  }
  return out;
}

PulseWaveform ControlMap::realize(const QuadratureControls& variables) const {
  PulseWaveform like;
  like.dt = config_.dt;
  like.role = config_.role;
  like.order = config_.order;
  like.omega_max = config_.omega_max;
  like.delta_max = config_.delta_max;
  like.filter_cutoff = config_.filter_cutoff;
  return enforce_bounds(from_quadratures(forward(variables), like), config_.omega_max,
                        config_.delta_max);
}

namespace {

CostEvaluation physical_cost(const OptimizationConfig& config, const QuadratureControls& controls,
                             const NoiseEnsemble& ensemble, bool with_gradient) {
  if (config.role == PulseRole::mirror)
    return evaluate_mirror_cost(controls, config.order, ensemble, config.bloch_basis(),
                                config.species, with_gradient);
  return evaluate_beamsplitter_cost(controls, config.order, ensemble, config.bloch_basis(),
                                    config.species, config.phase_grid, config.mirror_phase,
                                    with_gradient);
}

bool all_finite(const QuadratureControls& g) {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return ok(g.r) && ok(g.i) && ok(g.delta);
}

double norm(const QuadratureControls& g) {
  double s = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) s += g.r[j] * g.r[j] + g.i[j] * g.i[j] + g.delta[j] * g.delta[j];
  return std::sqrt(s);
}

}  // namespace

CostEvaluation cost_gradient(const OptimizationConfig& config, const QuadratureControls& variables,
                             const NoiseEnsemble& ensemble) {
  const ControlMap map(config);
  CostEvaluation e = physical_cost(config, map.forward(variables), ensemble, true);
  e.gradient = map.backward(variables, e.gradient);
  if (!std::isfinite(e.cost) || !all_finite(e.gradient))
    throw NumericalError("non-finite cost or gradient");
  return e;
}

NoiseEnsemble validation_ensemble(const OptimizationConfig& config) {
  return sample_ensemble(config.sigma_p, config.beta_min, config.beta_max, config.validation_size,
                         derive_seed(config.seed, 1));
}

OptimizationResult optimize_pulse(const OptimizationConfig& config) {
  config.validate();
  const ControlMap map(config);
  const std::size_t n = config.segments;
  // Mirror cost is an infidelity; the beamsplitter cost can reach 2 for an
  // inverted fringe.
  const double cost_ceiling = (config.role == PulseRole::mirror ? 1.0 : 2.0) + 1e-9;

  QuadratureControls x;
  x.dt = config.dt;
  {
    std::mt19937_64 engine(derive_seed(config.seed, 0));
    std::uniform_real_distribution<double> init(-config.init_fraction, config.init_fraction);
    for (std::size_t j = 0; j < n; ++j) x.r.push_back(init(engine));
    for (std::size_t j = 0; j < n; ++j) x.i.push_back(init(engine));
    for (std::size_t j = 0; j < n; ++j) x.delta.push_back(init(engine));
    if (!config.optimize_detuning) std::fill(x.delta.begin(), x.delta.end(), 0.0);
  }

  const NoiseEnsemble validation = validation_ensemble(config);
  const NoiseEnsemble fixed = sample_ensemble(config.sigma_p, config.beta_min, config.beta_max,
                                              config.batch_size, derive_seed(config.seed, 2));

  std::vector<double> m1(3 * n, 0.0), m2(3 * n, 0.0);
  auto channel = [&](QuadratureControls& q, std::size_t k) -> double& {
    return k < n ? q.r[k] : k < 2 * n ? q.i[k - n] : q.delta[k - 2 * n];
  };

  OptimizationTrace trace;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < config.iterations; ++t) {
    const auto start = std::chrono::steady_clock::now();
    double validation_cost = std::numeric_limits<double>::quiet_NaN();
    if (t % config.validation_every == 0 || t + 1 == config.iterations) {
      validation_cost = physical_cost(config, map.forward(x), validation, false).cost;
      if (validation_cost < best) {
        best = validation_cost;
        trace.best_iteration = t;
        trace.best_variables = x;
      }
    }

    const NoiseEnsemble batch =
        config.resample ? sample_ensemble(config.sigma_p, config.beta_min, config.beta_max,
                                          config.batch_size, derive_seed(config.seed, 3 + t))
                        : fixed;
    CostEvaluation e;
    try {
      e = cost_gradient(config, x, batch);
    } catch (const NumericalError& err) {
      throw NumericalError("iteration " + std::to_string(t) + ": " + err.what());
    }
    if (e.cost > cost_ceiling)
      throw NumericalError("optimization diverged at iteration " + std::to_string(t));
    if (!config.optimize_detuning) std::fill(e.gradient.delta.begin(), e.gradient.delta.end(), 0.0);

    const double lr = config.adam.decay_iterations > 0.0
                          ? config.adam.step / (1.0 + static_cast<double>(t) / config.adam.decay_iterations)
                          : config.adam.step;
    const double c1 = 1.0 - std::pow(config.adam.beta1, static_cast<double>(t + 1));
    const double c2 = 1.0 - std::pow(config.adam.beta2, static_cast<double>(t + 1));
    for (std::size_t k = 0; k < 3 * n; ++k) {
      const double g = channel(e.gradient, k);
      m1[k] = config.adam.beta1 * m1[k] + (1.0 - config.adam.beta1) * g;
      m2[k] = config.adam.beta2 * m2[k] + (1.0 - config.adam.beta2) * g * g;
      channel(x, k) -= lr * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + config.adam.epsilon);
    }

    trace.cost.push_back(e.cost);
    trace.validation_cost.push_back(validation_cost);
    trace.best_cost.push_back(best);
    trace.gradient_norm.push_back(norm(e.gradient));
    trace.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }

  trace.best = map.realize(trace.best_variables);
  OptimizationResult result;
  result.waveform = trace.best;
  result.validation_cost = best;
  result.trace = std::move(trace);
  return result;
}

std::string trace_csv(const OptimizationTrace& trace) {
  std::ostringstream os;
  os << "iteration,cost,validation_cost,best_cost\n";
  for (std::size_t t = 0; t < trace.cost.size(); ++t) {
    os << t << ',' << json(trace.cost[t]).dump() << ',';
    if (std::isfinite(trace.validation_cost[t])) os << json(trace.validation_cost[t]).dump();
    os << ',' << json(trace.best_cost[t]).dump() << '\n';
  }
  return os.str();
}

std::string timing_csv(const OptimizationTrace& trace) {
  std::ostringstream os;
  os << "iteration,wall_ms\n";
  for (std::size_t t = 0; t < trace.wall_ms.size(); ++t) os << t << ',' << trace.wall_ms[t] << '\n';
  return os.str();
}

double waveform_cost(const OptimizationConfig& config, const PulseWaveform& waveform,
                     const NoiseEnsemble& ensemble) {
  if (config.role == PulseRole::mirror)
    return ensemble_mirror_cost(waveform, ensemble, config.bloch_basis(), config.species);
  return beamsplitter_cost(waveform, ensemble, config.bloch_basis(), config.species,
                           config.phase_grid, config.mirror_phase);
}

// ---------------------------------------------------------------------------

namespace {

PulseWaveform reference_gaussian(const OptimizationConfig& config, double peak) {
  PulseWaveform w = gaussian_pulse(peak, config.gaussian_sigma_tau,
                                   config.dt * static_cast<double>(config.gaussian_segments),
                                   config.dt);
  w.role = config.role;
  w.order = config.order;
  w.omega_max = config.omega_max;
  w.delta_max = config.delta_max;
  return w;
}

// Quantity maximized by the Gaussian calibration.
double calibration_score(const OptimizationConfig& config, double peak) {
  const PulseWaveform w = reference_gaussian(config, peak);
  const BlochBasis basis = config.bloch_basis();
  if (config.role == PulseRole::mirror) {
    const auto u = pulse_propagator(to_segments(w, config.species), 0.0, 0.0, basis, config.species);
    return state_transfer_fidelity(u, 0, config.order);
  }
  NoiseEnsemble ideal;
  ideal.samples.resize(1);
  const auto f = beamsplitter_fringe(w, ideal, basis, config.species, config.phase_grid,
                                     config.mirror_phase);
  // Peak-to-peak size of the order-n harmonic of the fringe.
  std::complex<double> h = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k)
    h += f[k] * std::polar(1.0, -config.order * kTwoPi * static_cast<double>(k) /
                                    static_cast<double>(f.size()));
  return 2.0 * std::abs(h) / static_cast<double>(f.size());
}

}  // namespace

PulseWaveform calibrate_gaussian(const OptimizationConfig& config) {
  config.validate();
  constexpr int kCoarse = 200;
  std::vector<double> score(kCoarse + 2, -1.0);
  for (int k = 1; k <= kCoarse; ++k) score[k] = calibration_score(config, config.omega_max * k / kCoarse);
  // Refine each coarse local maximum. Two-level pulses reach full transfer at
  // every odd multiple of the target area, so ties go to the weakest pulse.
  std::vector<std::pair<double, double>> maxima;  // (peak, score)
  for (int k = 1; k <= kCoarse; ++k) {
    if (score[k] < score[k - 1] || score[k] < score[k + 1]) continue;
    const double lo = config.omega_max * (k - 1) / kCoarse;
    const double hi = config.omega_max * std::min(k + 1, kCoarse) / kCoarse;
    const auto found = boost::math::tools::brent_find_minima(
        [&](double peak) { return -calibration_score(config, peak); }, lo, hi, 40);
    if (-found.second > score[k])
      maxima.emplace_back(found.first, -found.second);
    else
      maxima.emplace_back(config.omega_max * k / kCoarse, score[k]);
  }
  double top = -1.0;
  for (const auto& m : maxima) top = std::max(top, m.second);
  double peak = config.omega_max;
  for (const auto& m : maxima)
    if (m.second >= top - 1e-6) { peak = m.first; break; }
  return reference_gaussian(config, peak);
}

double beta_contour_width(const FidelityLandscape& landscape, double level) {
  std::size_t c = 0;
  for (std::size_t k = 1; k < landscape.delta_p.size(); ++k)
    if (std::abs(landscape.delta_p[k]) < std::abs(landscape.delta_p[c])) c = k;
  std::vector<double> column(landscape.beta.size());
  for (std::size_t r = 0; r < column.size(); ++r)
    column[r] = landscape.fidelity(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return contour_width(landscape.beta, column, level);
}

double delta_p_contour_width(const FidelityLandscape& landscape, double level) {
  std::size_t c = 0;
  for (std::size_t k = 1; k < landscape.beta.size(); ++k)
    if (std::abs(landscape.beta[k]) < std::abs(landscape.beta[c])) c = k;
  std::vector<double> row(landscape.delta_p.size());
  for (std::size_t j = 0; j < row.size(); ++j)
    row[j] = landscape.fidelity(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
  return contour_width(landscape.delta_p, row, level);
}

BenchmarkReport benchmark_pair(const OptimizationConfig& config, const PulseWaveform& optimized,
                               const LandscapeGrid& grid) {
  config.validate();
  const NoiseEnsemble validation = validation_ensemble(config);
  const BlochBasis basis = config.bloch_basis();
  BenchmarkReport r;
  r.optimized = optimized;
  r.gaussian = calibrate_gaussian(config);
  r.optimized_cost = waveform_cost(config, r.optimized, validation);
  r.gaussian_cost = waveform_cost(config, r.gaussian, validation);
  r.optimized_landscape = fidelity_landscape(r.optimized, grid.delta_p, grid.beta, basis, config.species);
  r.gaussian_landscape = fidelity_landscape(r.gaussian, grid.delta_p, grid.beta, basis, config.species);
  r.optimized_beta_width = beta_contour_width(r.optimized_landscape);
  r.gaussian_beta_width = beta_contour_width(r.gaussian_landscape);
  r.optimized_delta_p_width = delta_p_contour_width(r.optimized_landscape);
  r.gaussian_delta_p_width = delta_p_contour_width(r.gaussian_landscape);
  return r;
}

BenchmarkReport benchmark_pair(const OptimizationConfig& config, const LandscapeGrid& grid) {
  return benchmark_pair(config, optimize_pulse(config).waveform, grid);
}

std::string benchmark_json(const BenchmarkReport& r) {
  auto landscape = [](const FidelityLandscape& l) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < l.fidelity.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < l.fidelity.cols(); ++j) row.push_back(l.fidelity(i, j));
      rows.push_back(row);
    }
    return json{{"delta_p", l.delta_p}, {"beta", l.beta}, {"fidelity", rows}};
  };
  json doc;
  doc["optimized"] = {{"ensemble_cost", r.optimized_cost},
                      {"peak_rabi_rad_s", r.optimized.peak_rabi()},
                      {"beta_width_90", r.optimized_beta_width},
                      {"delta_p_width_90", r.optimized_delta_p_width},
                      {"landscape", landscape(r.optimized_landscape)}};
  doc["gaussian"] = {{"ensemble_cost", r.gaussian_cost},
                     {"peak_rabi_rad_s", r.gaussian.peak_rabi()},
                     {"beta_width_90", r.gaussian_beta_width},
                     {"delta_p_width_90", r.gaussian_delta_p_width},
                     {"landscape", landscape(r.gaussian_landscape)}};
  return doc.dump(2) + "\n";
}

}  // namespace bragg
