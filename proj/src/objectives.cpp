#include "bragg/objectives.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bragg/parallel.hpp"

namespace bragg {

namespace {

using cplx = std::complex<double>;

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

QuadratureSegments make_segments(const QuadratureControls& controls, int order, double delta_p,
                                 const AtomSpecies& species) {
  QuadratureSegments s;
  s.dt = controls.dt;
  s.r = controls.r;
  s.i = controls.i;
  const double base = resonant_detuning(order, 0.0, species);
  s.detuning.resize(controls.size());
  for (std::size_t j = 0; j < controls.size(); ++j) s.detuning[j] = base + controls.delta[j];
  s.delta_p.assign(controls.size(), delta_p);
  return s;
}

QuadratureControls zero_like(const QuadratureControls& c) {
  QuadratureControls g;
  g.dt = c.dt;
  g.r.assign(c.size(), 0.0);
  g.i.assign(c.size(), 0.0);
  g.delta.assign(c.size(), 0.0);
  return g;
}

void check_ensemble(const NoiseEnsemble& e) {
  if (e.samples.empty()) throw ConfigError("noise ensemble is empty");
}

void check_controls(const QuadratureControls& c) {
  if (c.size() == 0) throw ConfigError("waveform has no segments");
  if (c.i.size() != c.size() || c.delta.size() != c.size())
    throw ConfigError("control channel length mismatch");
}

// Mirror with its laser phase offset by `phase`: D U_pi D^dagger.
CMatrix phased_target(const BlochBasis& basis, double phase) {
  CMatrix t = target_unitary(basis);
  apply_phase_offset(t, basis, phase);
  return t;
}

}  // namespace

NoiseEnsemble sample_ensemble(double sigma_p, double beta_min, double beta_max, std::size_t size,
                              std::uint64_t seed) {
  if (size < 1) throw ConfigError("ensemble size must be >= 1");
  if (!(sigma_p >= 0.0)) throw ConfigError("sigma_p must be non-negative");
  if (!(beta_min <= beta_max)) throw ConfigError("beta_min must not exceed beta_max");
  if (!(beta_min > -1.0)) throw ConfigError("beta_min must exceed -1 so that 1 + beta > 0");
  NoiseEnsemble e;
  e.seed = seed;
  e.sigma_p = sigma_p;
  e.beta_min = beta_min;
  e.beta_max = beta_max;
  e.samples.resize(size);
  auto engine = make_engine(seed);
  std::normal_distribution<double> momentum(0.0, sigma_p > 0.0 ? sigma_p : 1.0);
  std::uniform_real_distribution<double> amplitude(beta_min, beta_max);
  for (auto& s : e.samples) {
    const double dp = momentum(engine);
    s.delta_p = sigma_p > 0.0 ? dp : 0.0;
    for (auto& b : s.beta) {
      const double draw = amplitude(engine);
      b = beta_max > beta_min ? draw : beta_min;
    }
  }
  return e;
}

CMatrix target_unitary(const BlochBasis& basis, TargetConvention convention) {
  const int d = basis.dim();
  const int a = basis.index(0);
  const int b = basis.index(basis.order());
  CMatrix u = CMatrix::Identity(d, d);
  if (convention == TargetConvention::swap) {
    u(a, a) = 0.0;
    u(b, b) = 0.0;
  }
  u(a, b) = cplx(0.0, -1.0);
  u(b, a) = cplx(0.0, -1.0);
  return u;
}

CMatrix subspace_projector(const BlochBasis& basis, TargetConvention convention) {
  const int d = basis.dim();
  const int a = basis.index(0);
  const int b = basis.index(basis.order());
  CMatrix p = CMatrix::Zero(d, d);
  p(a, a) = 1.0;
  p(b, b) = 1.0;
  if (convention == TargetConvention::literal) {
    p(a, b) = 1.0;
    p(b, a) = 1.0;
  }
  return p;
}

double mirror_cost(const CMatrix& u, const BlochBasis& basis, TargetConvention convention) {
  const CMatrix p = subspace_projector(basis, convention);
  const CMatrix a = p * target_unitary(basis, convention);
  const cplx norm = (a.adjoint() * a).trace();
  const cplx overlap = (a.adjoint() * (p * u)).trace();
  return 1.0 - std::norm(overlap / norm);
}

CostEvaluation evaluate_mirror_cost(const QuadratureControls& controls, int order,
                                    const NoiseEnsemble& ensemble, const BlochBasis& basis,
                                    const AtomSpecies& species, bool with_gradient) {
  check_ensemble(ensemble);
  check_controls(controls);
  const CMatrix p = subspace_projector(basis);
  const CMatrix a = p * target_unitary(basis);
  const double norm = (a.adjoint() * a).trace().real();
  const CMatrix m = a.adjoint() * p;  // overlap z = Tr(M U)

  const std::size_t count = ensemble.samples.size();
  std::vector<double> costs(count);
  std::vector<QuadratureControls> grads(with_gradient ? count : 0);
  parallel_for(count, [&](std::size_t s) {
    const auto& sample = ensemble.samples[s];
    const PropagationTape tape(make_segments(controls, order, sample.delta_p, species),
                               sample.beta[1], basis, species);
    const cplx z = (m * tape.propagator()).trace();
    costs[s] = 1.0 - std::norm(z) / (norm * norm);
    if (with_gradient) {
      grads[s] = zero_like(controls);
      const CMatrix c = (-2.0 * std::conj(z) / (norm * norm)) * m;
      tape.accumulate_gradient(c, grads[s].r, grads[s].i, grads[s].delta);
    }
  });

  CostEvaluation out;
  const double inv = 1.0 / static_cast<double>(count);
  for (double c : costs) out.cost += c;
  out.cost *= inv;
  if (with_gradient) {
    out.gradient = zero_like(controls);
    for (const auto& g : grads) {
      for (std::size_t j = 0; j < controls.size(); ++j) {
        out.gradient.r[j] += g.r[j] * inv;
        out.gradient.i[j] += g.i[j] * inv;
        out.gradient.delta[j] += g.delta[j] * inv;
      }
    }
  }
  return out;
}

namespace {

struct FringeGrid {
  std::vector<double> phases;
  std::vector<double> target;  // cos(n phi)
  double target_norm = 0.0;     // sum of target^2
  std::vector<CMatrix> mirrors;
};

FringeGrid make_grid(const BlochBasis& basis, int phase_grid, double mirror_phase) {
  if (phase_grid < 8) throw ConfigError("beamsplitter phase grid needs at least 8 points");
  FringeGrid g;
  const int n = basis.order();
  for (int k = 0; k < phase_grid; ++k) {
    const double phi = kTwoPi * k / phase_grid;
    g.phases.push_back(phi);
    g.target.push_back(std::cos(n * phi));
    g.target_norm += g.target.back() * g.target.back();
    g.mirrors.push_back(phased_target(basis, 0.5 * phi + mirror_phase));
  }
  return g;
}

}  // namespace

CostEvaluation evaluate_beamsplitter_cost(const QuadratureControls& controls, int order,
                                          const NoiseEnsemble& ensemble, const BlochBasis& basis,
                                          const AtomSpecies& species, int phase_grid,
                                          double mirror_phase, bool with_gradient) {
  check_ensemble(ensemble);
  check_controls(controls);
  const FringeGrid grid = make_grid(basis, phase_grid, mirror_phase);
  const int i0 = basis.index(0);
  const int in = basis.index(basis.order());
  const int d = basis.dim();
  const std::size_t count = ensemble.samples.size();
  const auto k_count = grid.phases.size();

  std::vector<double> costs(count);
  std::vector<QuadratureControls> grads(with_gradient ? count : 0);
  parallel_for(count, [&](std::size_t s) {
    const auto& sample = ensemble.samples[s];
    const auto segs = make_segments(controls, order, sample.delta_p, species);
    const PropagationTape first(segs, sample.beta[0], basis, species);
    const PropagationTape last(segs, sample.beta[2], basis, species);
    const CMatrix& b1 = first.propagator();
    const CMatrix& b3 = last.propagator();
    const CVector v1 = b1.col(i0);
    double cost = 1.0;
    Eigen::RowVectorXcd row_sum = Eigen::RowVectorXcd::Zero(d);
    CMatrix c3 = CMatrix::Zero(d, d);
    for (std::size_t k = 0; k < k_count; ++k) {
      const CVector mid = grid.mirrors[k] * v1;
      const CVector psi = b3 * mid;
      const double diff = std::norm(psi(i0)) - std::norm(psi(in));
      const double h = -grid.target[k] / grid.target_norm;  // d cost / d diff
      cost += h * diff;
      if (with_gradient) {
        // d diff = 2 Re(psi^dagger Z dpsi)
        Eigen::RowVectorXcd zpsi = Eigen::RowVectorXcd::Zero(d);
        zpsi(i0) = std::conj(psi(i0));
        zpsi(in) = -std::conj(psi(in));
        row_sum += (2.0 * h) * (zpsi * b3 * grid.mirrors[k]);
        c3 += (2.0 * h) * (mid * zpsi);
      }
    }
    costs[s] = cost;
    if (with_gradient) {
      grads[s] = zero_like(controls);
      // Re(r dB1 e0) = Re Tr(C dB1) with row i0 of C equal to r
      CMatrix c1 = CMatrix::Zero(d, d);
      c1.row(i0) = row_sum;
      first.accumulate_gradient(c1, grads[s].r, grads[s].i, grads[s].delta);
      last.accumulate_gradient(c3, grads[s].r, grads[s].i, grads[s].delta);
    }
  });

  CostEvaluation out;
  const double inv = 1.0 / static_cast<double>(count);
  for (double c : costs) out.cost += c;
  out.cost *= inv;
  if (with_gradient) {
    out.gradient = zero_like(controls);
    for (const auto& g : grads) {
      for (std::size_t j = 0; j < controls.size(); ++j) {
        out.gradient.r[j] += g.r[j] * inv;
        out.gradient.i[j] += g.i[j] * inv;
        out.gradient.delta[j] += g.delta[j] * inv;
      }
    }
  }
  return out;
}

double ensemble_mirror_cost(const PulseWaveform& waveform, const NoiseEnsemble& ensemble,
                            const BlochBasis& basis, const AtomSpecies& species) {
  return evaluate_mirror_cost(to_quadratures(waveform), waveform.order, ensemble, basis, species,
                              false)
      .cost;
}

double beamsplitter_cost(const PulseWaveform& waveform, const NoiseEnsemble& ensemble,
                         const BlochBasis& basis, const AtomSpecies& species, int phase_grid,
                         double mirror_phase) {
  return evaluate_beamsplitter_cost(to_quadratures(waveform), waveform.order, ensemble, basis,
                                    species, phase_grid, mirror_phase, false)
      .cost;
}

std::vector<double> beamsplitter_fringe(const PulseWaveform& waveform, const NoiseEnsemble& ensemble,
                                        const BlochBasis& basis, const AtomSpecies& species,
                                        int phase_grid, double mirror_phase) {
  check_ensemble(ensemble);
  const FringeGrid grid = make_grid(basis, phase_grid, mirror_phase);
  const int i0 = basis.index(0);
  const int in = basis.index(basis.order());
  const auto segments = to_segments(waveform, species);
  const std::size_t count = ensemble.samples.size();
  std::vector<std::vector<double>> per(count);
  parallel_for(count, [&](std::size_t s) {
    const auto& sample = ensemble.samples[s];
    const CMatrix b1 = pulse_propagator(segments, sample.delta_p, sample.beta[0], basis, species).matrix;
    const CMatrix b3 = pulse_propagator(segments, sample.delta_p, sample.beta[2], basis, species).matrix;
    const CVector v1 = b1.col(i0);
    for (const auto& mirror : grid.mirrors) {
      const CVector psi = b3 * (mirror * v1);
      per[s].push_back(std::norm(psi(i0)) - std::norm(psi(in)));
    }
  });
  std::vector<double> fringe(grid.phases.size(), 0.0);
  for (const auto& f : per)
    for (std::size_t k = 0; k < f.size(); ++k) fringe[k] += f[k] / static_cast<double>(count);
  return fringe;
}

FidelityLandscape fidelity_landscape(const PulseWaveform& waveform,
                                     std::span<const double> delta_p_grid,
                                     std::span<const double> beta_grid, const BlochBasis& basis,
                                     const AtomSpecies& species) {
  auto monotone = [](std::span<const double> g) {
    for (std::size_t k = 1; k < g.size(); ++k)
      if (!(g[k] > g[k - 1])) return false;
    return !g.empty();
  };
  if (!monotone(delta_p_grid) || !monotone(beta_grid))
    throw ConfigError("landscape grids must be non-empty and strictly increasing");
  FidelityLandscape out;
  out.delta_p.assign(delta_p_grid.begin(), delta_p_grid.end());
  out.beta.assign(beta_grid.begin(), beta_grid.end());
  out.fidelity.resize(static_cast<Eigen::Index>(beta_grid.size()),
                      static_cast<Eigen::Index>(delta_p_grid.size()));
  const auto segments = to_segments(waveform, species);
  const std::size_t cols = delta_p_grid.size();
  parallel_for(beta_grid.size() * cols, [&](std::size_t idx) {
    const std::size_t row = idx / cols;
    const std::size_t col = idx % cols;
    const auto u = pulse_propagator(segments, delta_p_grid[col], beta_grid[row], basis, species);
    out.fidelity(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
        state_transfer_fidelity(u, 0, basis.order());
  });
  return out;
}

std::string landscape_csv(const FidelityLandscape& landscape) {
  std::ostringstream os;
  os << "beta\\delta_p";
  for (double dp : landscape.delta_p) os << ',' << nlohmann::json(dp).dump();
  os << '\n';
  for (std::size_t r = 0; r < landscape.beta.size(); ++r) {
    os << nlohmann::json(landscape.beta[r]).dump();
    for (std::size_t c = 0; c < landscape.delta_p.size(); ++c)
      os << ','
         << nlohmann::json(landscape.fidelity(static_cast<Eigen::Index>(r),
                                              static_cast<Eigen::Index>(c)))
                .dump();
    os << '\n';
  }
  return os.str();
}

double contour_width(std::span<const double> axis, std::span<const double> values, double level) {
  if (axis.size() != values.size() || axis.empty())
    throw ConfigError("contour_width: axis and values must have equal, non-zero length");
  std::size_t c = 0;
  for (std::size_t k = 1; k < axis.size(); ++k)
    if (std::abs(axis[k]) < std::abs(axis[c])) c = k;
  if (values[c] < level) return 0.0;
  auto crossing = [&](std::size_t inside, std::size_t outside) {
    const double t = (values[inside] - level) / (values[inside] - values[outside]);
    return axis[inside] + t * (axis[outside] - axis[inside]);
  };
  std::size_t hi = c;
  while (hi + 1 < axis.size() && values[hi + 1] >= level) ++hi;
  const double right = hi + 1 < axis.size() ? crossing(hi, hi + 1) : axis[hi];
  std::size_t lo = c;
  while (lo > 0 && values[lo - 1] >= level) --lo;
  const double left = lo > 0 ? crossing(lo, lo - 1) : axis[lo];
  return right - left;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t k = 0; k < count; ++k)
    out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  return out;
}

}  // namespace bragg
