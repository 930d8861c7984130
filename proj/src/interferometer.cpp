#include "bragg/interferometer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "bragg/objectives.hpp"
#include "bragg/parallel.hpp"

namespace bragg {

namespace {

using cplx = std::complex<double>;

double duration_of(const std::optional<PulseWaveform>& w) { return w ? w->duration() : 0.0; }

struct Timeline {
  double mirror_start = 0.0;
  double last_start = 0.0;
  double gap = 0.0;
};

Timeline timeline(const InterferometerSequence& seq) {
  const double tb = duration_of(seq.beamsplitter);
  const double tm = duration_of(seq.mirror);
  Timeline t;
  const double first_centre = 0.5 * tb;
  t.mirror_start = first_centre + seq.interrogation_time - 0.5 * tm;
  t.last_start = first_centre + 2.0 * seq.interrogation_time - 0.5 * tb;
  t.gap = seq.interrogation_time - 0.5 * tb - 0.5 * tm;
  return t;
}

const std::optional<PulseWaveform>& waveform_of(const InterferometerSequence& seq, int slot) {
  return slot == 1 ? seq.mirror : seq.beamsplitter;
}

CMatrix pulse_matrix(const InterferometerSequence& seq, int slot, double start,
                     const BlochBasis& basis, const AtomSpecies& species) {
  const auto& w = waveform_of(seq, slot);
  if (!w) return slot == 1 ? target_unitary(basis) : ideal_beamsplitter(basis);
  const double rate = species.momentum_rate(seq.acceleration);
  const double base = resonant_detuning(seq.order, 0.0, species) + seq.detuning_offset;
  const auto& noise = seq.phase_noise[static_cast<std::size_t>(slot)];
  std::vector<ControlSegment> segments(w->size());
  std::vector<double> delta_p(w->size());
  for (std::size_t j = 0; j < w->size(); ++j) {
    // Drift and chirp are evaluated at the segment midpoint.
    const double t = seq.time_origin + start + (static_cast<double>(j) + 0.5) * w->dt;
    const auto& s = w->samples[j];
    segments[j] = {w->dt, s.rabi, s.phase + (noise.empty() ? 0.0 : noise[j]),
                   base + s.detuning + seq.chirp_rate * t};
    delta_p[j] = seq.delta_p + rate * t;
  }
  return pulse_propagator(segments, delta_p, seq.intensity[static_cast<std::size_t>(slot)] - 1.0,
                          basis, species)
      .matrix;
}

CMatrix free_matrix(const InterferometerSequence& seq, double start, double duration,
                    const BlochBasis& basis, const AtomSpecies& species) {
  const double t = seq.time_origin + start;
  LinearDrift drift;
  drift.delta_p_rate = species.momentum_rate(seq.acceleration);
  drift.delta_p = seq.delta_p + drift.delta_p_rate * t;
  drift.detuning = resonant_detuning(seq.order, 0.0, species) + seq.detuning_offset + seq.chirp_rate * t;
  drift.chirp_rate = seq.chirp_rate;
  return free_evolution(duration, drift, basis, species).matrix;
}

// Every propagator of one atom's sequence except the readout phase.
struct AtomMatrices {
  BlochBasis basis;
  CMatrix b1, f1, m, f2, b3;
};

AtomMatrices build_atom(const InterferometerSequence& seq, const BlochBasis& basis,
                        const AtomSpecies& species) {
  const Timeline t = timeline(seq);
  const double tb = duration_of(seq.beamsplitter);
  const double tm = duration_of(seq.mirror);
  return {basis,
          pulse_matrix(seq, 0, 0.0, basis, species),
          free_matrix(seq, tb, t.gap, basis, species),
          pulse_matrix(seq, 1, t.mirror_start, basis, species),
          free_matrix(seq, t.mirror_start + tm, t.gap, basis, species),
          pulse_matrix(seq, 2, t.last_start, basis, species)};
}

struct Outcome {
  ArmPopulations pops;
  double edge = 0.0;  // largest population seen on an extremal basis state
};

// Extremal basis states that are not arm states; a reduced basis whose edges
// are the arms themselves has nothing to check.
double edge_population(const CVector& v, const BlochBasis& b) {
  double edge = 0.0;
  if (b.m_min() != 0 && b.m_min() != b.order()) edge = std::norm(v(0));
  if (b.m_max() != 0 && b.m_max() != b.order()) edge = std::max(edge, std::norm(v(v.size() - 1)));
  return edge;
}

// Paths with different momenta during the free gaps end up displaced; their
// delta_p phases differ by 4 omega_R gap (s - s'), s = m1 + m2, so over a
// source of width sigma_p the interference is suppressed by
// exp(-(4 omega_R gap sigma_p ds)^2 / 2). A Gauss-Hermite rule cannot resolve
// that oscillation and aliases it into spurious fringes; with `separate` set,
// classes of equal s are summed coherently and different classes
// incoherently, which is the same average up to that suppression factor.
Outcome evaluate(const AtomMatrices& a, int order, double readout_phase, bool separate = false) {
  const BlochBasis& b = a.basis;
  const int dim = b.dim();
  CVector v = a.b1.col(b.index(0));
  double edge = edge_population(v, b);
  v = a.f1 * v;
  // D M D^dagger with D = diag(exp(-i m theta)), theta = readout / 2.
  const double theta = 0.5 * readout_phase;
  auto mirror = [&](CVector x) {
    for (int k = 0; k < dim; ++k) x(k) *= std::polar(1.0, b.momentum(k) * theta);
    x = a.m * x;
    for (int k = 0; k < dim; ++k) x(k) *= std::polar(1.0, -b.momentum(k) * theta);
    return x;
  };
  Outcome o;
  if (!separate) {
    v = mirror(v);
    edge = std::max(edge, edge_population(v, b));
    v = a.b3 * (a.f2 * v);
    edge = std::max(edge, edge_population(v, b));
    o.pops.p1 = std::norm(v(b.index(0)));
    o.pops.p2 = std::norm(v(b.index(order)));
    o.pops.leakage = v.squaredNorm() - o.pops.p1 - o.pops.p2;
    o.edge = edge;
    return o;
  }
  std::vector<CVector> classes(static_cast<std::size_t>(2 * dim - 1), CVector::Zero(dim));
  CVector after_mirror = CVector::Zero(dim);
  for (int k = 0; k < dim; ++k) {
    if (v(k) == 0.0) continue;
    CVector x = CVector::Zero(dim);
    x(k) = v(k);
    x = mirror(x);
    after_mirror += x;
    x = a.f2 * x;
    for (int j = 0; j < dim; ++j) classes[static_cast<std::size_t>(k + j)](j) += x(j);
  }
  edge = std::max(edge, edge_population(after_mirror, b));
  double total = 0.0;
  for (const CVector& c : classes) {
    const CVector out = a.b3 * c;
    edge = std::max(edge, edge_population(out, b));
    o.pops.p1 += std::norm(out(b.index(0)));
    o.pops.p2 += std::norm(out(b.index(order)));
    total += out.squaredNorm();
  }
  o.pops.leakage = total - o.pops.p1 - o.pops.p2;
  o.edge = edge;
  return o;
}

constexpr int kMaxExtraStates = 3;

ArmPopulations run_atom(const InterferometerSequence& seq, const BlochBasis& basis,
                        const AtomSpecies& species, double tol, int first_extra = 0,
                        bool separate = false) {
  double edge = 0.0;
  for (int extra = first_extra; extra <= kMaxExtraStates; ++extra) {
    const Outcome o = evaluate(build_atom(seq, basis.enlarged(extra), species), seq.order,
                               seq.readout_phase, separate);
    if (o.edge <= tol) {
      ArmPopulations p = o.pops;
      p.extra_states = extra;
      return p;
    }
    edge = o.edge;
  }
  throw NumericalError("basis truncation check failed (edge population " + std::to_string(edge) +
                       " after adding " + std::to_string(kMaxExtraStates) +
                       " states per side); enlarge the Bloch basis");
}

void check_basis(const InterferometerSequence& seq, const BlochBasis& basis) {
  if (basis.order() != seq.order) throw ConfigError("basis order differs from the sequence order");
}

nlohmann::json waveform_summary(const std::optional<PulseWaveform>& w) {
  if (!w) return "ideal";
  return {{"sha256", sha256_hex(serialize(*w))},
          {"segments", w->size()},
          {"dt_s", w->dt},
          {"role", to_string(w->role)}};
}

double wrap(double phi) {
  double w = std::remainder(phi, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

}  // namespace

void InterferometerSequence::validate() const {
  if (order < 1) throw ConfigError("order must be >= 1");
  if (!(interrogation_time > 0.0)) throw ConfigError("interrogation time T must be positive");
  for (double s : intensity)
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("intensity scalings must be positive");
  if (!std::isfinite(acceleration) || !std::isfinite(chirp_rate) || !std::isfinite(readout_phase) ||
      !std::isfinite(delta_p) || !std::isfinite(time_origin) || !std::isfinite(detuning_offset))
    throw ConfigError("sequence parameters must be finite");
  for (int slot = 0; slot < 3; ++slot) {
    const auto& w = waveform_of(*this, slot);
    const auto& noise = phase_noise[static_cast<std::size_t>(slot)];
    if (w) {
      if (w->order != order) throw ConfigError("waveform order differs from the sequence order");
      if (!(w->dt > 0.0) || w->samples.empty()) throw ConfigError("waveform has no segments");
    }
    if (!noise.empty() && (!w || noise.size() != w->size()))
      throw ConfigError("phase noise must have one entry per segment of its pulse");
  }
  if (timeline(*this).gap < 0.0) throw ConfigError("interrogation time is shorter than the pulses");
}

std::vector<std::string> InterferometerSequence::warnings() const {
  std::vector<std::string> out;
  for (const char* name : {"beamsplitter", "mirror"}) {
    const auto& w = std::string(name) == "mirror" ? mirror : beamsplitter;
    if (duration_of(w) > 0.1 * interrogation_time)
      out.push_back(std::string(name) + " duration exceeds 0.1 T");
  }
  return out;
}

CMatrix ideal_beamsplitter(const BlochBasis& basis) {
  const int a = basis.index(0);
  const int b = basis.index(basis.order());
  CMatrix u = CMatrix::Identity(basis.dim(), basis.dim());
  const double r = 1.0 / std::sqrt(2.0);
  u(a, a) = r;
  u(b, b) = r;
  u(a, b) = cplx(0.0, -r);
  u(b, a) = cplx(0.0, -r);
  return u;
}

ArmPopulations run_sequence(const InterferometerSequence& seq, const BlochBasis& basis,
                            const AtomSpecies& species, double truncation_tol) {
  seq.validate();
  check_basis(seq, basis);
  return run_atom(seq, basis, species, truncation_tol);
}

GaussHermite gauss_hermite(int nodes) {
  if (nodes < 1) throw ConfigError("Gauss-Hermite rule needs at least one node");
  GaussHermite g;
  if (nodes == 1) {
    g.nodes = {0.0};
    g.weights = {1.0};
    return g;
  }
  // Golub-Welsch for the probabilists' Hermite polynomials.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(nodes);
  Eigen::VectorXd sub(nodes - 1);
  for (int k = 1; k < nodes; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericalError("Gauss-Hermite eigensolver failed");
  double total = 0.0;
  for (int k = 0; k < nodes; ++k) {
    g.nodes.push_back(solver.eigenvalues()(k));
    g.weights.push_back(std::pow(solver.eigenvectors()(0, k), 2));
    total += g.weights.back();
  }
  for (double& w : g.weights) w /= total;
  return g;
}

namespace {

struct SourceNodes {
  std::vector<double> delta_p;
  std::vector<double> weights;
  double sigma_p = 0.0;

  // Whether paths that do not close can be treated as mutually incoherent.
  bool separate(const InterferometerSequence& seq, const AtomSpecies& species) const {
    constexpr double kSuppression = 8.0;  // exp(-32) ~ 1e-14
    return delta_p.size() > 1 &&
           4.0 * recoil_frequency(species) * timeline(seq).gap * sigma_p >= kSuppression;
  }

  // Per-node truncation tolerance such that the weighted edge population of
  // the whole average stays below tol.
  double tolerance(std::size_t k, double tol) const {
    const double share = static_cast<double>(weights.size()) * weights[k];
    return share > 0.0 ? tol / share : std::numeric_limits<double>::infinity();
  }
};

SourceNodes source_nodes(const SourceDistribution& source, double centre) {
  if (source.sigma_p < 0.0) throw ConfigError("source sigma_p must be non-negative");
  const GaussHermite gh = gauss_hermite(source.sigma_p > 0.0 ? source.nodes : 1);
  SourceNodes s;
  s.sigma_p = source.sigma_p;
  for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
    s.delta_p.push_back(centre + source.sigma_p * gh.nodes[k]);
    s.weights.push_back(gh.weights[k]);
  }
  return s;
}

ArmPopulations average(const InterferometerSequence& seq, const SourceNodes& nodes,
                       const BlochBasis& basis, const AtomSpecies& species, double tol) {
  ArmPopulations out;
  const bool separate = nodes.separate(seq, species);
  for (std::size_t k = 0; k < nodes.delta_p.size(); ++k) {
    InterferometerSequence atom = seq;
    atom.delta_p = nodes.delta_p[k];
    const ArmPopulations p = run_atom(atom, basis, species, nodes.tolerance(k, tol), 0, separate);
    out.p1 += nodes.weights[k] * p.p1;
    out.p2 += nodes.weights[k] * p.p2;
    out.leakage += nodes.weights[k] * p.leakage;
    out.extra_states = std::max(out.extra_states, p.extra_states);
  }
  return out;
}

constexpr double kScanTolerance = 1e-4;

}  // namespace

ArmPopulations run_sequence(const InterferometerSequence& seq, const SourceDistribution& source,
                            const BlochBasis& basis, const AtomSpecies& species,
                            double truncation_tol) {
  seq.validate();
  check_basis(seq, basis);
  return average(seq, source_nodes(source, seq.delta_p), basis, species, truncation_tol);
}

std::vector<double> phase_grid(int points) {
  if (points < 1) throw ConfigError("phase grid needs at least one point");
  std::vector<double> out(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) out[static_cast<std::size_t>(k)] = kTwoPi * k / points;
  return out;
}

nlohmann::json sequence_metadata(const InterferometerSequence& seq) {
  return {{"order", seq.order},
          {"interrogation_time_s", seq.interrogation_time},
          {"acceleration_m_s2", seq.acceleration},
          {"chirp_rate_rad_s2", seq.chirp_rate},
          {"readout_phase_rad", seq.readout_phase},
          {"intensity", seq.intensity},
          {"delta_p", seq.delta_p},
          {"time_origin_s", seq.time_origin},
          {"detuning_offset_rad_s", seq.detuning_offset},
          {"beamsplitter", waveform_summary(seq.beamsplitter)},
          {"mirror", waveform_summary(seq.mirror)}};
}

FringeDataset phase_scan(const InterferometerSequence& tmpl, const std::vector<double>& phases,
                         const ScanNoise& noise, const SourceDistribution& source,
                         const BlochBasis& basis, const AtomSpecies& species) {
  tmpl.validate();
  check_basis(tmpl, basis);
  if (phases.empty()) throw ConfigError("phase scan grid is empty");
  if (noise.shots < 1) throw ConfigError("shots per point must be >= 1");
  if (!(noise.sigma_beta >= 0.0)) throw ConfigError("sigma_beta must be non-negative");
  const SourceNodes nodes = source_nodes(source, tmpl.delta_p);

  FringeDataset d;
  d.scan_variable = "readout_phase_rad";
  d.scan_values = phases;
  d.values.assign(phases.size(), 0.0);
  d.shot_sigma.assign(phases.size(), 0.0);

  if (noise.sigma_beta == 0.0) {
    const bool separate = nodes.separate(tmpl, species);
    // Identical shots: build each atom once and vary only the readout phase.
    std::vector<AtomMatrices> atoms;
    atoms.reserve(nodes.delta_p.size());
    for (std::size_t k = 0; k < nodes.delta_p.size(); ++k) atoms.push_back({basis, {}, {}, {}, {}, {}});
    parallel_for(nodes.delta_p.size(), [&](std::size_t k) {
      InterferometerSequence atom = tmpl;
      atom.delta_p = nodes.delta_p[k];
      atoms[k] = build_atom(atom, basis, species);
    });
    parallel_for(phases.size(), [&](std::size_t i) {
      double value = 0.0;
      for (std::size_t k = 0; k < atoms.size(); ++k) {
        Outcome o = evaluate(atoms[k], tmpl.order, phases[i], separate);
        const double tol = nodes.tolerance(k, kScanTolerance);
        if (o.edge > tol) {
          InterferometerSequence atom = tmpl;
          atom.delta_p = nodes.delta_p[k];
          atom.readout_phase = phases[i];
          o.pops = run_atom(atom, basis, species, tol, 1, separate);
        }
        value += nodes.weights[k] * (o.pops.p1 - o.pops.p2);
      }
      d.values[i] = value;
    });
  } else {
    parallel_for(phases.size(), [&](std::size_t i) {
      std::mt19937_64 engine(derive_seed(noise.seed, i));
      std::normal_distribution<double> draw(1.0, noise.sigma_beta);
      std::vector<double> shots;
      for (int s = 0; s < noise.shots; ++s) {
        InterferometerSequence seq = tmpl;
        seq.readout_phase = phases[i];
        for (double& scale : seq.intensity) scale *= std::max(draw(engine), 1e-3);
        const ArmPopulations p = average(seq, nodes, basis, species, kScanTolerance);
        shots.push_back(p.p1 - p.p2);
      }
      double mean = 0.0;
      for (double v : shots) mean += v / static_cast<double>(shots.size());
      double var = 0.0;
      for (double v : shots) var += (v - mean) * (v - mean);
      d.values[i] = mean;
      d.shot_sigma[i] = shots.size() > 1
                            ? std::sqrt(var / static_cast<double>(shots.size() - 1) /
                                        static_cast<double>(shots.size()))
                            : 0.0;
    });
  }
  d.metadata = {{"sequence", sequence_metadata(tmpl)},
                {"noise", {{"sigma_beta", noise.sigma_beta}, {"seed", noise.seed}, {"shots", noise.shots}}},
                {"source", {{"sigma_p", source.sigma_p}, {"nodes", nodes.delta_p.size()}}}};
  return d;
}

double aligned_readout_phase(const InterferometerSequence& tmpl, const SourceDistribution& source,
                             const BlochBasis& basis, const AtomSpecies& species) {
  InterferometerSequence seq = tmpl;
  seq.acceleration = 0.0;
  seq.chirp_rate = 0.0;
  seq.readout_phase = 0.0;
  const FringeDataset d = phase_scan(seq, phase_grid(16), {}, source, basis, species);
  const double order = static_cast<double>(tmpl.order);
  return -fit_sinusoid(d, order, false).phase / order;
}

std::vector<FringeDataset> chirp_scan(const InterferometerSequence& tmpl,
                                      const std::vector<double>& chirp_rates, double gravity,
                                      const std::vector<double>& times,
                                      const SourceDistribution& source, const BlochBasis& basis,
                                      const AtomSpecies& species) {
  if (chirp_rates.empty()) throw ConfigError("chirp scan grid is empty");
  if (times.empty()) throw ConfigError("chirp scan needs at least one interrogation time");
  check_basis(tmpl, basis);
  const SourceNodes nodes = source_nodes(source, tmpl.delta_p);
  std::vector<FringeDataset> out;
  for (double t : times) {
    InterferometerSequence seq = tmpl;
    seq.interrogation_time = t;
    seq.acceleration = -gravity;
    seq.validate();
    FringeDataset d;
    d.scan_variable = "chirp_rate_rad_s2";
    d.scan_values = chirp_rates;
    d.values.assign(chirp_rates.size(), 0.0);
    d.shot_sigma.assign(chirp_rates.size(), 0.0);
    parallel_for(chirp_rates.size(), [&](std::size_t i) {
      InterferometerSequence point = seq;
      point.chirp_rate = chirp_rates[i];
      const ArmPopulations p = average(point, nodes, basis, species, kScanTolerance);
      d.values[i] = p.p1 - p.p2;
    });
    d.metadata = {{"sequence", sequence_metadata(seq)},
                  {"gravity_m_s2", gravity},
                  {"source", {{"sigma_p", source.sigma_p}, {"nodes", nodes.delta_p.size()}}}};
    out.push_back(std::move(d));
  }
  return out;
}

AccelerationScan acceleration_scan(const InterferometerSequence& tmpl,
                                   const std::vector<double>& accelerations,
                                   const std::vector<double>& phases, const ScanNoise& noise,
                                   const SourceDistribution& source, const BlochBasis& basis,
                                   const AtomSpecies& species) {
  if (accelerations.empty()) throw ConfigError("acceleration grid is empty");
  AccelerationScan out;
  for (std::size_t i = 0; i < accelerations.size(); ++i) {
    InterferometerSequence seq = tmpl;
    seq.acceleration = accelerations[i];
    ScanNoise point_noise = noise;
    point_noise.seed = derive_seed(noise.seed, i);
    FringeDataset d = phase_scan(seq, phases, point_noise, source, basis, species);
    d.metadata["acceleration_m_s2"] = accelerations[i];
    const SinusoidFit fit = fit_sinusoid(d, static_cast<double>(tmpl.order), false);
    double phase = fit.phase;
    if (!out.phase.empty()) phase += kTwoPi * std::round((out.phase.back() - phase) / kTwoPi);
    out.acceleration.push_back(accelerations[i]);
    out.phase.push_back(phase);
    out.phase_error.push_back(fit.phase_error);
    out.visibility.push_back(visibility(fit).value);
    out.fits.push_back(fit);
    out.fringes.push_back(std::move(d));
  }
  return out;
}

PhaseNoiseStats phase_noise_study(const InterferometerSequence& tmpl, double sigma_phi, int trials,
                                  std::uint64_t seed, const BlochBasis& basis,
                                  const AtomSpecies& species, int phase_points) {
  tmpl.validate();
  check_basis(tmpl, basis);
  if (trials < 100) throw ConfigError("phase noise study needs at least 100 trials");
  if (!(sigma_phi >= 0.0)) throw ConfigError("sigma_phi must be non-negative");
  const std::vector<double> grid = phase_grid(phase_points);
  const double freq = static_cast<double>(tmpl.order);

  auto fringe_phase = [&](const InterferometerSequence& seq) {
    const AtomMatrices atom = build_atom(seq, basis, species);
    std::vector<double> f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      Outcome o = evaluate(atom, seq.order, grid[i]);
      if (o.edge > kScanTolerance) {
        InterferometerSequence s = seq;
        s.readout_phase = grid[i];
        o.pops = run_atom(s, basis, species, kScanTolerance, 1);
      }
      f[i] = o.pops.p1 - o.pops.p2;
    }
    return fit_sinusoid(grid, f, freq, false).phase;
  };

  InterferometerSequence clean = tmpl;
  for (auto& n : clean.phase_noise) n.clear();
  const double reference = fringe_phase(clean);

  PhaseNoiseStats stats;
  stats.errors.assign(static_cast<std::size_t>(trials), 0.0);
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    std::mt19937_64 engine(derive_seed(seed, t));
    std::normal_distribution<double> draw(0.0, 1.0);
    InterferometerSequence seq = clean;
    for (int slot = 0; slot < 3; ++slot) {
      const auto& w = waveform_of(seq, slot);
      if (!w) continue;
      auto& noise = seq.phase_noise[static_cast<std::size_t>(slot)];
      noise.resize(w->size());
      for (double& v : noise) v = sigma_phi * draw(engine);
    }
    stats.errors[t] = wrap(fringe_phase(seq) - reference);
  });
  for (double e : stats.errors) {
    stats.mean += e / trials;
    stats.max_abs = std::max(stats.max_abs, std::abs(e));
  }
  double var = 0.0;
  for (double e : stats.errors) var += (e - stats.mean) * (e - stats.mean);
  stats.std = std::sqrt(var / (trials - 1));
  return stats;
}

}  // namespace bragg
