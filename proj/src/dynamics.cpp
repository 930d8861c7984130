#include "bragg/dynamics.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace bragg {

namespace {

using cplx = std::complex<double>;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ConfigError(std::string("non-finite ") + what);
}

// sinc-type divided difference (e^{-ia t} - e^{-ib t}) / (a - b), stable for a ~ b.
cplx exp_divided_difference(double a, double b, double t) {
  const double half = 0.5 * (a - b) * t;
  const double sinc = std::abs(half) < 1e-6 ? 1.0 - half * half / 6.0 : std::sin(half) / half;
  return cplx(0.0, -t) * std::polar(1.0, -0.5 * (a + b) * t) * sinc;
}

}  // namespace

namespace detail {

void tridiagonal_eigensystem(const Eigen::VectorXd& diagonal, const CVector& upper,
                             Eigen::VectorXd& values, CMatrix& vectors) {
  const Eigen::Index d = diagonal.size();
  // H = D T D^dagger with T real symmetric tridiagonal and D a diagonal of phases.
  Eigen::VectorXd sub(d > 1 ? d - 1 : 0);
  CVector gauge(d);
  gauge(0) = 1.0;
  for (Eigen::Index m = 0; m + 1 < d; ++m) {
    const double mag = std::abs(upper(m));
    sub(m) = mag;
    const cplx unit = mag > 0.0 ? upper(m) / mag : cplx(1.0, 0.0);
    gauge(m + 1) = gauge(m) * std::conj(unit);
  }
  if (d == 1) {
    values = diagonal;
    vectors = CMatrix::Identity(1, 1);
    return;
  }
  // The QL iteration in computeFromTridiagonal works on the unscaled matrix
  // and can stall on exactly degenerate ladders; normalize first.
  const double scale = std::max(diagonal.cwiseAbs().maxCoeff(), sub.cwiseAbs().maxCoeff());
  if (!(scale > 0.0)) {
    values = Eigen::VectorXd::Zero(d);
    vectors = gauge.asDiagonal();
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diagonal / scale, sub / scale, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericalError("tridiagonal eigensolver failed");
  values = scale * solver.eigenvalues();
  vectors = gauge.asDiagonal() * solver.eigenvectors().cast<cplx>();
}

CMatrix exp_from_eigensystem(const Eigen::VectorXd& values, const CMatrix& vectors, double dt) {
  CVector phases(values.size());
  for (Eigen::Index k = 0; k < values.size(); ++k) phases(k) = std::polar(1.0, -values(k) * dt);
  return vectors * phases.asDiagonal() * vectors.adjoint();
}

}  // namespace detail

CMatrix build_hamiltonian(const ControlSegment& segment, double delta_p, double beta,
                          const BlochBasis& basis, const AtomSpecies& species) {
  require_finite(segment.rabi, "Rabi frequency");
  require_finite(segment.phase, "laser phase");
  require_finite(segment.detuning, "detuning");
  require_finite(delta_p, "momentum detuning");
  require_finite(beta, "amplitude error");
  if (!(1.0 + beta > 0.0)) throw ConfigError("amplitude error requires 1 + beta > 0");
  const int d = basis.dim();
  CMatrix h = CMatrix::Zero(d, d);
  const cplx coupling = (1.0 + beta) * std::polar(segment.rabi, segment.phase);
  for (int k = 0; k < d; ++k) {
    h(k, k) = generalized_detuning(basis.momentum(k), delta_p, segment.detuning, species);
    if (k + 1 < d) {
      h(k, k + 1) = coupling;
      h(k + 1, k) = std::conj(coupling);
    }
  }
  return h;
}

CMatrix segment_propagator(const CMatrix& hamiltonian, double dt) {
  const double scale = std::max(1.0, hamiltonian.cwiseAbs().maxCoeff());
  if ((hamiltonian - hamiltonian.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw NumericalError("segment_propagator: Hamiltonian is not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(hamiltonian);
  if (solver.info() != Eigen::Success) throw NumericalError("eigensolver failed");
  CMatrix u = detail::exp_from_eigensystem(solver.eigenvalues(), solver.eigenvectors(), dt);
  if (unitarity_error(u) > 1e-10) throw NumericalError("segment propagator is not unitary");
  return u;
}

Propagator pulse_propagator(std::span<const ControlSegment> segments, double delta_p, double beta,
                            const BlochBasis& basis, const AtomSpecies& species) {
  const std::vector<double> per_segment(segments.size(), delta_p);
  return pulse_propagator(segments, per_segment, beta, basis, species);
}

Propagator pulse_propagator(std::span<const ControlSegment> segments,
                            std::span<const double> delta_p, double beta, const BlochBasis& basis,
                            const AtomSpecies& species) {
  if (segments.empty()) throw ConfigError("pulse_propagator: empty waveform");
  if (delta_p.size() != segments.size())
    throw ConfigError("pulse_propagator: one momentum detuning per segment is required");
  const int d = basis.dim();
  Propagator out{basis, CMatrix::Identity(d, d)};
  Eigen::VectorXd diagonal(d);
  CVector upper(std::max(d - 1, 0));
  Eigen::VectorXd values;
  CMatrix vectors;
  for (std::size_t j = 0; j < segments.size(); ++j) {
    const auto& seg = segments[j];
    if (!(seg.duration >= 0.0)) throw ConfigError("segment duration must be non-negative");
    const CMatrix h = build_hamiltonian(seg, delta_p[j], beta, basis, species);
    diagonal = h.diagonal().real();
    for (int k = 0; k + 1 < d; ++k) upper(k) = h(k, k + 1);
    detail::tridiagonal_eigensystem(diagonal, upper, values, vectors);
    out.matrix = detail::exp_from_eigensystem(values, vectors, seg.duration) * out.matrix;
  }
  if (unitarity_error(out.matrix) > 1e-10) throw NumericalError("pulse propagator lost unitarity");
  return out;
}

Propagator free_evolution(double duration, const LinearDrift& drift, const BlochBasis& basis,
                          const AtomSpecies& species) {
  if (!(duration >= 0.0)) throw ConfigError("free evolution time must be non-negative");
  const double wr = recoil_frequency(species);
  const double x0 = drift.delta_p + drift.detuning / (4.0 * wr);
  const double rate = drift.delta_p_rate + drift.chirp_rate / (4.0 * wr);
  const double t = duration;
  const int d = basis.dim();
  CVector phases(d);
  for (int k = 0; k < d; ++k) {
    const double c = 2.0 * basis.momentum(k) + x0;
    // integral of wr (c + rate t')^2 over [0, t]
    const double theta = wr * t * (c * c + c * rate * t + rate * rate * t * t / 3.0);
    phases(k) = std::polar(1.0, -theta);
  }
  return Propagator{basis, phases.asDiagonal().toDenseMatrix()};
}

double state_transfer_fidelity(const Propagator& u, int from_m, int to_m) {
  return std::norm(u.at(to_m, from_m));
}

TruncationCheck validate_truncation(const Propagator& u, int initial_m, double tol) {
  const auto& b = u.basis;
  double leak = std::norm(u.at(b.m_min(), initial_m));
  if (b.m_max() != b.m_min()) leak += std::norm(u.at(b.m_max(), initial_m));
  return TruncationCheck{leak <= tol, leak};
}

double unitarity_error(const CMatrix& u) {
  const CMatrix e = u.adjoint() * u - CMatrix::Identity(u.rows(), u.cols());
  return e.cwiseAbs().maxCoeff();
}

void apply_phase_offset(CMatrix& u, const BlochBasis& basis, double phase) {
  const int d = basis.dim();
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      const int dm = basis.momentum(r) - basis.momentum(c);
      if (dm != 0) u(r, c) *= std::polar(1.0, -dm * phase);
    }
  }
}

Propagator with_phase_offset(const Propagator& u, double phase) {
  Propagator out = u;
  apply_phase_offset(out.matrix, out.basis, phase);
  return out;
}

PropagationTape::PropagationTape(const QuadratureSegments& segments, double beta,
                                 const BlochBasis& basis, const AtomSpecies& species)
    : basis_(basis), dt_(segments.dt), coupling_scale_(1.0 + beta) {
  const std::size_t n = segments.size();
  if (n == 0) throw ConfigError("PropagationTape: empty waveform");
  if (segments.i.size() != n || segments.detuning.size() != n || segments.delta_p.size() != n)
    throw ConfigError("PropagationTape: channel length mismatch");
  if (!(coupling_scale_ > 0.0)) throw ConfigError("amplitude error requires 1 + beta > 0");
  const int d = basis.dim();
  const double wr = recoil_frequency(species);
  steps_.resize(n);
  prefix_.reserve(n + 1);
  prefix_.push_back(CMatrix::Identity(d, d));
  Eigen::VectorXd diagonal(d);
  CVector upper(std::max(d - 1, 0));
  for (std::size_t j = 0; j < n; ++j) {
    Step& s = steps_[j];
    s.x = segments.delta_p[j] + segments.detuning[j] / (4.0 * wr);
    if (!std::isfinite(s.x) || !std::isfinite(segments.r[j]) || !std::isfinite(segments.i[j]))
      throw NumericalError("non-finite control value at segment " + std::to_string(j));
    for (int k = 0; k < d; ++k) {
      const double arg = 2.0 * basis.momentum(k) + s.x;
      diagonal(k) = wr * arg * arg;
    }
    upper.setConstant(coupling_scale_ * cplx(segments.r[j], segments.i[j]));
    detail::tridiagonal_eigensystem(diagonal, upper, s.values, s.vectors);
    s.unitary = detail::exp_from_eigensystem(s.values, s.vectors, dt_);
    prefix_.push_back(s.unitary * prefix_.back());
  }
}

void PropagationTape::accumulate_gradient(const CMatrix& c, std::span<double> grad_r,
                                          std::span<double> grad_i,
                                          std::span<double> grad_delta) const {
  const std::size_t n = steps_.size();
  const int d = basis_.dim();
  // suffix = C U_N ... U_{j+1}
  CMatrix suffix = c;
  CMatrix g(d, d);
  for (std::size_t jj = n; jj-- > 0;) {
    const Step& s = steps_[jj];
    // Tr(X dU_j) with X = U_{j-1}..U_1 C U_N..U_{j+1}
    const CMatrix xt = s.vectors.adjoint() * prefix_[jj] * suffix * s.vectors;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) g(a, b) = exp_divided_difference(s.values(a), s.values(b), dt_);
    // K_ab = Xt_ba G_ab ; Y = V K^T V^dagger
    const CMatrix kt = (xt.array() * g.transpose().array()).matrix();
    const CMatrix w = s.vectors * kt;
    double dr = 0.0;
    double di = 0.0;
    double dd = 0.0;
    // Y_pq = sum_b W_pb conj(V_qb); only the tridiagonal band of Y is needed.
    for (int m = 0; m < d; ++m) {
      const cplx ymm = (s.vectors.row(m).conjugate().array() * w.row(m).array()).sum();
      dd += ymm.real() * 0.5 * (2.0 * basis_.momentum(m) + s.x);
      if (m + 1 < d) {
        const cplx y_lo = (s.vectors.row(m).conjugate().array() * w.row(m + 1).array()).sum();
        const cplx y_hi = (s.vectors.row(m + 1).conjugate().array() * w.row(m).array()).sum();
        // dH[m][m+1] = scale (1, i); dH[m+1][m] = scale (1, -i); Tr(Y dH) = sum Y_qp dH_pq
        dr += coupling_scale_ * (y_lo + y_hi).real();
        di += coupling_scale_ * (cplx(0.0, 1.0) * (y_lo - y_hi)).real();
      }
    }
    grad_r[jj] += dr;
    grad_i[jj] += di;
    grad_delta[jj] += dd;
    suffix = suffix * s.unitary;
  }
}

}  // namespace bragg
