#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "bragg/dynamics.hpp"
#include "bragg/optimizer.hpp"
#include "bragg/waveforms.hpp"
#include "support.hpp"

using namespace bragg;
using cplx = std::complex<double>;

namespace {

const AtomSpecies rb = AtomSpecies::rubidium87();

// Reference exponential through Eigen's Pade-based matrix exponential.
CMatrix reference_exp(const CMatrix& h, double dt) {
  const CMatrix a = cplx(0.0, -dt) * h;
  return a.exp();
}

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("Hamiltonian structure") {
  const BlochBasis b(1, -2, 2);
  const ControlSegment seg{1e-6, kTwoPi * 20e3, 0.7, resonant_detuning(1, 0.0, rb)};
  const double beta = 0.12;
  const CMatrix h = build_hamiltonian(seg, 0.1, beta, b, rb);
  CHECK(h(2, 3) == std::conj(h(3, 2)));
  CHECK(std::abs(h(2, 3)) == doctest::Approx((1.0 + beta) * seg.rabi));
  CHECK(max_abs(h - h.adjoint()) == 0.0);
  for (int k = 0; k < b.dim(); ++k)
    CHECK(h(k, k).real() == doctest::Approx(generalized_detuning(b.momentum(k), 0.1, seg.detuning, rb)));

  const CMatrix zero = build_hamiltonian({1e-6, 0.0, 0.0, 1e5}, 0.2, 0.0, b, rb);
  CHECK(max_abs(zero - CMatrix(zero.diagonal().asDiagonal())) == 0.0);

  const CMatrix real = build_hamiltonian({1e-6, 3e4, 0.0, 1e5}, 0.0, 0.0, b, rb);
  CHECK(real.imag().cwiseAbs().maxCoeff() == 0.0);
  CHECK(real(0, 1).real() == doctest::Approx(3e4));
  CHECK_THROWS_AS(build_hamiltonian({1e-6, 1.0, 0.0, 0.0}, 0.0, -1.5, b, rb), ConfigError);
}

TEST_CASE("segment propagator") {
  const BlochBasis b = BlochBasis::for_order(3);
  const CMatrix h = build_hamiltonian({1e-6, kTwoPi * 30e3, 1.1, -2e5}, 0.05, 0.1, b, rb);
  CHECK(max_abs(segment_propagator(h, 0.0) - CMatrix::Identity(b.dim(), b.dim())) < 1e-14);
  CHECK(max_abs(segment_propagator(h, 1e-6) - reference_exp(h, 1e-6)) < 1e-12);
  CHECK(max_abs(segment_propagator(h, 4e-5) - reference_exp(h, 4e-5)) < 1e-10);

  // Diagonal H gives diagonal phases.
  Eigen::VectorXd d(3);
  d << 1.0e5, -3.0e4, 7.0e3;
  const CMatrix u = segment_propagator(CMatrix(d.cast<cplx>().asDiagonal()), 2e-5);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(u(k, k) - std::polar(1.0, -d(k) * 2e-5)) < 1e-13);
  CHECK(std::abs(u(0, 1)) == 0.0);

  // Two-level closed form: transfer probability sin^2(Omega t).
  const double omega = 1.3e4;
  CMatrix h2(2, 2);
  h2 << 0.0, omega, omega, 0.0;
  for (double area : {0.3, kPi / 4, kPi / 2, 2.0}) {
    const CMatrix u2 = segment_propagator(h2, area / omega);
    CHECK(std::norm(u2(1, 0)) == doctest::Approx(std::pow(std::sin(area), 2)).epsilon(1e-12));
  }
  CMatrix bad = h2;
  bad(0, 1) = 2.0 * omega;
  CHECK_THROWS_AS(segment_propagator(bad, 1e-6), NumericalError);
}

TEST_CASE("pulse propagator") {
  const BlochBasis b = BlochBasis::for_order(3);
  SUBCASE("zero amplitude is free evolution") {
    std::vector<ControlSegment> segs(12, ControlSegment{1e-6, 0.0, 0.0, 3e4});
    const Propagator u = pulse_propagator(segs, 0.2, 0.0, b, rb);
    for (int m = b.m_min(); m <= b.m_max(); ++m) {
      const double theta = generalized_detuning(m, 0.2, 3e4, rb) * 12e-6;
      CHECK(std::abs(u.at(m, m) - std::polar(1.0, -theta)) < 1e-12);
    }
    CHECK(max_abs(u.matrix - CMatrix(u.matrix.diagonal().asDiagonal())) == 0.0);
  }
  SUBCASE("one segment matches the general exponential") {
    const ControlSegment seg{2e-6, kTwoPi * 35e3, -0.4, resonant_detuning(3, 0.0, rb) + 1e4};
    const Propagator u = pulse_propagator(std::span(&seg, 1), 0.1, -0.05, b, rb);
    CHECK(max_abs(u.matrix - segment_propagator(build_hamiltonian(seg, 0.1, -0.05, b, rb), 2e-6)) <
          1e-12);
  }
  SUBCASE("ordering and unitarity on random pulses") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const PulseWaveform w = testing::random_waveform(40, 1e-6, 3, kTwoPi * 40e3, kTwoPi * 200e3, seed);
      const auto segs = to_segments(w, rb);
      const Propagator u = pulse_propagator(segs, 0.07, 0.1, b, rb);
      CMatrix ref = CMatrix::Identity(b.dim(), b.dim());
      for (const auto& s : segs) ref = reference_exp(build_hamiltonian(s, 0.07, 0.1, b, rb), s.duration) * ref;
      CHECK(max_abs(u.matrix - ref) < 1e-10);
      CHECK(unitarity_error(u.matrix) < 1e-12);
    }
  }
  SUBCASE("order-1 Gaussian pi pulse against a sub-stepped reference") {
    const BlochBasis b1 = BlochBasis::for_order(1);
    OptimizationConfig c = OptimizationConfig::mirror_defaults();
    c.order = 1;
    c.omega_max = kTwoPi * 10e3;
    const PulseWaveform w = calibrate_gaussian(c);
    const auto segs = to_segments(w, rb);
    std::vector<ControlSegment> fine;
    for (const auto& s : segs)
      for (int k = 0; k < 16; ++k) fine.push_back({s.duration / 16, s.rabi, s.phase, s.detuning});
    const Propagator coarse = pulse_propagator(segs, 0.0, 0.0, b1, rb);
    const Propagator sub = pulse_propagator(fine, 0.0, 0.0, b1, rb);
    CHECK(max_abs(coarse.matrix - sub.matrix) < 1e-8);
    const double transfer = state_transfer_fidelity(coarse, 0, 1);
    MESSAGE("order-1 Gaussian pi pulse transfer: " << transfer);
    CHECK(transfer > 0.99);
  }
  CHECK_THROWS_AS(pulse_propagator(std::span<const ControlSegment>(), 0.0, 0.0, b, rb), ConfigError);
}

TEST_CASE("free evolution") {
  const BlochBasis b = BlochBasis::for_order(3);
  SUBCASE("zero duration") {
    const Propagator u = free_evolution(0.0, {0.3, 10.0, 1e5, 1e6}, b, rb);
    CHECK(max_abs(u.matrix - CMatrix::Identity(b.dim(), b.dim())) < 1e-15);
  }
  SUBCASE("constant integrand") {
    const double t = 3e-3;
    const Propagator u = free_evolution(t, {0.1, 0.0, -1e5, 0.0}, b, rb);
    for (int m = b.m_min(); m <= b.m_max(); ++m)
      CHECK(std::arg(u.at(m, m) * std::polar(1.0, generalized_detuning(m, 0.1, -1e5, rb) * t)) ==
            doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("drifting integrand against quadrature") {
    const double t = 1e-3;
    const LinearDrift drift{0.2, rb.momentum_rate(-9.8), resonant_detuning(3, 0.0, rb), 1.5e8};
    const Propagator u = free_evolution(t, drift, b, rb);
    for (int m : {0, 3}) {
      const double theta = testing::simpson(
          [&](double s) {
            return generalized_detuning(m, drift.delta_p + drift.delta_p_rate * s,
                                        drift.detuning + drift.chirp_rate * s, rb);
          },
          0.0, t, 20000);
      const cplx expected = std::polar(1.0, -theta);
      CHECK(std::abs(std::arg(u.at(m, m) / expected)) < 1e-7);
    }
  }
  SUBCASE("matched chirp cancels the Doppler drift") {
    const double a = -9.79674, t = 4e-3;
    const double alpha = -2.0 * rb.wavenumber() * a;
    const LinearDrift still{0.0, 0.0, resonant_detuning(3, 0.0, rb), 0.0};
    const LinearDrift moving{0.0, rb.momentum_rate(a), resonant_detuning(3, 0.0, rb), alpha};
    const Propagator u0 = free_evolution(t, still, b, rb);
    const Propagator u1 = free_evolution(t, moving, b, rb);
    const cplx d0 = u0.at(0, 0) * std::conj(u0.at(3, 3));
    const cplx d1 = u1.at(0, 0) * std::conj(u1.at(3, 3));
    CHECK(std::abs(std::arg(d1 / d0)) < 1e-9);
  }
}

TEST_CASE("fidelity and truncation") {
  const BlochBasis b = BlochBasis::for_order(3);
  const Propagator id{b, CMatrix::Identity(b.dim(), b.dim())};
  CHECK(state_transfer_fidelity(id, 0, 3) == 0.0);
  CHECK(state_transfer_fidelity(id, 0, 0) == 1.0);
  const TruncationCheck interior = validate_truncation(id, 0, 1e-12);
  CHECK(interior.pass);
  CHECK(interior.leakage == 0.0);

  OptimizationConfig c = OptimizationConfig::mirror_defaults();
  const PulseWaveform pi = calibrate_gaussian(c);
  const auto segs = to_segments(pi, rb);
  CHECK_FALSE(validate_truncation(pulse_propagator(segs, 0.0, 0.0, b, rb), 0, 0.0).pass);

  // Convergence study: once the edge test passes at 1e-6, two more states per
  // side change the arm populations by less than 1e-6.
  int extra = 0;
  while (!validate_truncation(pulse_propagator(segs, 0.0, 0.0, b.enlarged(extra), rb), 0, 1e-6).pass) {
    ++extra;
    REQUIRE(extra < 6);
  }
  const Propagator small = pulse_propagator(segs, 0.0, 0.0, b.enlarged(extra), rb);
  const Propagator large = pulse_propagator(segs, 0.0, 0.0, b.enlarged(extra + 2), rb);
  MESSAGE("basis enlargement needed at 1e-6: " << extra);
  for (int m : {0, 3})
    CHECK(std::abs(state_transfer_fidelity(small, 0, m) - state_transfer_fidelity(large, 0, m)) < 1e-6);
}

TEST_CASE("laser phase offset") {
  const BlochBasis b = BlochBasis::for_order(3);
  PulseWaveform w = testing::random_waveform(30, 1e-6, 3, kTwoPi * 40e3, kTwoPi * 100e3, 11);
  const Propagator u = pulse_propagator(to_segments(w, rb), 0.0, 0.0, b, rb);
  for (auto& s : w.samples) s.phase += 0.37;
  const Propagator shifted = pulse_propagator(to_segments(w, rb), 0.0, 0.0, b, rb);
  CHECK(max_abs(with_phase_offset(u, 0.37).matrix - shifted.matrix) < 1e-11);
}

}
