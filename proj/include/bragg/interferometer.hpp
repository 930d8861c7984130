#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bragg/analysis.hpp"
#include "bragg/core.hpp"
#include "bragg/dynamics.hpp"
#include "bragg/fringe.hpp"
#include "bragg/waveforms.hpp"

namespace bragg {

/// Beamsplitter - T - mirror - T - beamsplitter. A missing waveform stands for
/// the ideal instantaneous pulse (target unitary) of that role.
struct InterferometerSequence {
  std::optional<PulseWaveform> beamsplitter;
  std::optional<PulseWaveform> mirror;
  int order = 3;
  double interrogation_time = 5e-3;  // s, centre to centre
  double acceleration = 0.0;         // m/s^2 along the beam axis
  double chirp_rate = 0.0;           // rad/s^2, sweep rate of delta
  double readout_phase = 0.0;        // phi_BS; the mirror phase is offset by phi_BS / 2
  std::array<double, 3> intensity{1.0, 1.0, 1.0};  // per-pulse intensity scalings
  double delta_p = 0.0;              // atom momentum detuning at t = 0
  // Global time reference for the Doppler drift and the chirp, and a constant
  // offset of delta; together they allow re-referencing the clock.
  double time_origin = 0.0;
  double detuning_offset = 0.0;
  // Extra laser phase per segment for each pulse (empty = none).
  std::array<std::vector<double>, 3> phase_noise;

  void validate() const;
  std::vector<std::string> warnings() const;
};

/// Instantaneous 50/50 beamsplitter on {0, n}: (1/sqrt 2)[[1, -i], [-i, 1]].
CMatrix ideal_beamsplitter(const BlochBasis& basis);

struct ArmPopulations {
  double p1 = 0.0;  // m = 0
  double p2 = 0.0;  // m = n
  double leakage = 0.0;
  int extra_states = 0;  // basis states added per side to pass the truncation check
};

/// Single atom with momentum detuning seq.delta_p. The basis is enlarged by up
/// to three states per side when population reaches its edges (above
/// truncation_tol); beyond that a NumericalError advises a larger basis.
ArmPopulations run_sequence(const InterferometerSequence& seq, const BlochBasis& basis,
                            const AtomSpecies& species, double truncation_tol = 1e-4);

/// Nodes and weights (summing to one) for averaging over a normal distribution.
struct GaussHermite {
  std::vector<double> nodes;  // standard-normal abscissae
  std::vector<double> weights;
};
GaussHermite gauss_hermite(int nodes);

/// Momentum spread of the source; sigma_p in hbar k units. nodes = 1 means the
/// template atom only.
struct SourceDistribution {
  double sigma_p = 0.8;  // 1.6 hbar k full 2-sigma width
  int nodes = 64;
  static SourceDistribution single_atom() { return {0.0, 1}; }
};

/// Source average. When 4 omega_R gap sigma_p >= 8, paths that do not close
/// (different momenta in the gaps) are added incoherently: their interference
/// is suppressed below 1e-14 over the source, and a quadrature rule would
/// alias it instead.
ArmPopulations run_sequence(const InterferometerSequence& seq, const SourceDistribution& source,
                            const BlochBasis& basis, const AtomSpecies& species,
                            double truncation_tol = 1e-4);

struct ScanNoise {
  double sigma_beta = 0.0;  // pulse intensity scalings ~ Normal(1, sigma_beta)
  std::uint64_t seed = 0;
  int shots = 1;
};

/// Uniform grid of `points` readout phases over [0, 2 pi).
std::vector<double> phase_grid(int points = 33);

FringeDataset phase_scan(const InterferometerSequence& tmpl, const std::vector<double>& phases,
                         const ScanNoise& noise, const SourceDistribution& source,
                         const BlochBasis& basis, const AtomSpecies& species);

/// Readout phase that puts the a = 0, alpha = 0 fringe on its maximum: real
/// pulses add a fixed phase psi_0 to cos(n phi_BS + psi_0); returns -psi_0 / n.
double aligned_readout_phase(const InterferometerSequence& tmpl, const SourceDistribution& source,
                             const BlochBasis& basis, const AtomSpecies& species);

/// Fringes against the chirp rate at a = -gravity, one per interrogation time.
std::vector<FringeDataset> chirp_scan(const InterferometerSequence& tmpl,
                                      const std::vector<double>& chirp_rates, double gravity,
                                      const std::vector<double>& interrogation_times,
                                      const SourceDistribution& source, const BlochBasis& basis,
                                      const AtomSpecies& species);

struct AccelerationScan {
  std::vector<double> acceleration;
  std::vector<double> phase;  // unwrapped along the scan
  std::vector<double> phase_error;
  std::vector<double> visibility;
  std::vector<SinusoidFit> fits;
  std::vector<FringeDataset> fringes;
};

/// phase_scan at every acceleration, fitted with the fringe period fixed to 2 pi / n.
AccelerationScan acceleration_scan(const InterferometerSequence& tmpl,
                                   const std::vector<double>& accelerations,
                                   const std::vector<double>& phases, const ScanNoise& noise,
                                   const SourceDistribution& source, const BlochBasis& basis,
                                   const AtomSpecies& species);

struct PhaseNoiseStats {
  std::vector<double> errors;  // per-trial phase minus the noiseless phase, rad
  double mean = 0.0;
  double std = 0.0;
  double max_abs = 0.0;
};

/// Independent Normal(0, sigma_phi) laser-phase noise on every segment of every
/// pulse, per trial; the template atom's fringe phase is read from a
/// fixed-period fit over `phase_points` readout phases.
PhaseNoiseStats phase_noise_study(const InterferometerSequence& tmpl, double sigma_phi, int trials,
                                  std::uint64_t seed, const BlochBasis& basis,
                                  const AtomSpecies& species, int phase_points = 16);

/// Sequence parameters and waveform hashes for a fringe sidecar.
nlohmann::json sequence_metadata(const InterferometerSequence& seq);

}  // namespace bragg
