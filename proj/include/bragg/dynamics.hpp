#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bragg/core.hpp"

namespace bragg {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// One piecewise-constant interval of the Bragg control fields. `detuning` is
/// the absolute two-photon detuning delta entering delta_m.
struct ControlSegment {
  double duration = 0.0;
  double rabi = 0.0;
  double phase = 0.0;
  double detuning = 0.0;
};

struct Propagator {
  BlochBasis basis;
  CMatrix matrix;

  const std::complex<double>& at(int to_m, int from_m) const {
    return matrix(basis.index(to_m), basis.index(from_m));
  }
};

/// Tridiagonal Bragg Hamiltonian in the Bloch-band basis. The coupling between
/// m and m+1 is (1 + beta) Omega_R e^{+i phi_L} above the diagonal and its
/// conjugate below.
CMatrix build_hamiltonian(const ControlSegment& segment, double delta_p, double beta,
                          const BlochBasis& basis, const AtomSpecies& species);

/// exp(-i H dt) for Hermitian H via eigendecomposition.
CMatrix segment_propagator(const CMatrix& hamiltonian, double dt);

/// Ordered product of segment propagators, last segment leftmost.
Propagator pulse_propagator(std::span<const ControlSegment> segments, double delta_p, double beta,
                            const BlochBasis& basis, const AtomSpecies& species);
/// Same, with a momentum detuning per segment (e.g. drifting under acceleration).
Propagator pulse_propagator(std::span<const ControlSegment> segments,
                            std::span<const double> delta_p, double beta, const BlochBasis& basis,
                            const AtomSpecies& species);

/// Linear-in-time momentum detuning and laser detuning, referenced to t = 0 of
/// the interval they describe.
struct LinearDrift {
  double delta_p = 0.0;       // dimensionless, at t = 0
  double delta_p_rate = 0.0;  // 1/s, M a / (hbar k)
  double detuning = 0.0;      // absolute two-photon detuning at t = 0, rad/s
  double chirp_rate = 0.0;    // rad/s^2
};

/// Diagonal propagator for coupling-free evolution over `duration`, with the
/// phase integral of delta_m(t) evaluated in closed form.
Propagator free_evolution(double duration, const LinearDrift& drift, const BlochBasis& basis,
                          const AtomSpecies& species);

/// |<to|U|from>|^2 with from/to given as momentum indices m.
double state_transfer_fidelity(const Propagator& u, int from_m, int to_m);

struct TruncationCheck {
  bool pass = false;
  double leakage = 0.0;
};

/// Population that reaches the two extremal basis states from `initial_m`.
TruncationCheck validate_truncation(const Propagator& u, int initial_m, double tol);

/// max |U^dagger U - I|.
double unitarity_error(const CMatrix& u);

/// Propagator of the same pulse with every laser phase shifted by `phase`:
/// D U D^dagger with D = diag(e^{-i m phase}).
Propagator with_phase_offset(const Propagator& u, double phase);
void apply_phase_offset(CMatrix& u, const BlochBasis& basis, double phase);

/// Per-segment inputs of a differentiable propagation, in quadrature form.
struct QuadratureSegments {
  double dt = 0.0;
  std::vector<double> r;         // Omega_R cos(phi_L), rad/s
  std::vector<double> i;         // Omega_R sin(phi_L), rad/s
  std::vector<double> detuning;  // absolute delta, rad/s
  std::vector<double> delta_p;   // momentum detuning seen by each segment
  std::size_t size() const { return r.size(); }
};

/// Stores the spectral factorization of every segment so that derivatives of
/// Re Tr(C U) with respect to each segment's (R, I, delta) can be taken by a
/// single backward sweep.
class PropagationTape {
 public:
  PropagationTape(const QuadratureSegments& segments, double beta, const BlochBasis& basis,
                  const AtomSpecies& species);

  const CMatrix& propagator() const { return prefix_.back(); }
  const BlochBasis& basis() const { return basis_; }
  std::size_t size() const { return steps_.size(); }

  /// Adds d Re Tr(C U) / d(R_j, I_j, delta_j) into the three gradient arrays.
  void accumulate_gradient(const CMatrix& c, std::span<double> grad_r, std::span<double> grad_i,
                           std::span<double> grad_delta) const;

 private:
  struct Step {
    CMatrix vectors;
    Eigen::VectorXd values;
    CMatrix unitary;
    double x = 0.0;  // 2m-independent part of the detuning argument
  };

  BlochBasis basis_;
  double dt_;
  double coupling_scale_;
  std::vector<Step> steps_;
  std::vector<CMatrix> prefix_;  // prefix_[j] = U_j ... U_1, prefix_[0] = I
};

namespace detail {

/// Eigendecomposition of a Hermitian tridiagonal matrix given its real
/// diagonal and complex superdiagonal.
void tridiagonal_eigensystem(const Eigen::VectorXd& diagonal, const CVector& upper,
                             Eigen::VectorXd& values, CMatrix& vectors);

CMatrix exp_from_eigensystem(const Eigen::VectorXd& values, const CMatrix& vectors, double dt);

}  // namespace detail

}  // namespace bragg
