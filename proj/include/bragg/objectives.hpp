#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bragg/core.hpp"
#include "bragg/dynamics.hpp"
#include "bragg/waveforms.hpp"

namespace bragg {

/// One atom's draw from the noise model: a momentum detuning shared by all
/// pulses and an amplitude error for each of the three pulse slots.
struct NoiseSample {
  double delta_p = 0.0;
  std::array<double, 3> beta{0.0, 0.0, 0.0};
};

struct NoiseEnsemble {
  std::vector<NoiseSample> samples;
  std::uint64_t seed = 0;
  double sigma_p = 0.0;
  double beta_min = 0.0;
  double beta_max = 0.0;
};

/// delta_p ~ Normal(0, sigma_p) (sigma_p in units of hbar k), each beta slot
/// ~ Uniform[beta_min, beta_max]. Reproducible from (seed, parameters).
NoiseEnsemble sample_ensemble(double sigma_p, double beta_min, double beta_max, std::size_t size,
                              std::uint64_t seed);

/// `swap` is identity off the arm subspace and a -i swap on {0, n}, with the
/// projector diagonal onto {0, n}. `literal` keeps unit diagonal entries on the
/// arms and off-diagonal projector entries, as written in the original cost.
enum class TargetConvention { swap, literal };

CMatrix target_unitary(const BlochBasis& basis, TargetConvention convention = TargetConvention::swap);
CMatrix subspace_projector(const BlochBasis& basis,
                           TargetConvention convention = TargetConvention::swap);

/// 1 - |Tr((P U_pi)^dagger (P U)) / Tr((P U_pi)^dagger (P U_pi))|^2.
double mirror_cost(const CMatrix& u, const BlochBasis& basis,
                   TargetConvention convention = TargetConvention::swap);

/// A cost value and, optionally, its gradient with respect to the physical
/// controls (R, I, delta) of each segment.
struct CostEvaluation {
  double cost = 0.0;
  QuadratureControls gradient;
};

/// Mean mirror cost over the ensemble; the mirror sees the slot-2 amplitude error.
CostEvaluation evaluate_mirror_cost(const QuadratureControls& controls, int order,
                                    const NoiseEnsemble& ensemble, const BlochBasis& basis,
                                    const AtomSpecies& species, bool with_gradient);

/// Beamsplitter cost: BS - ideal mirror (laser phase phi/2 + mirror_phase) - BS,
/// ensemble-averaged fringe f(phi) = <P1 - P2> on a uniform phi grid, and
/// cost = 1 - <f, cos(n phi)> / <cos(n phi), cos(n phi)>.
CostEvaluation evaluate_beamsplitter_cost(const QuadratureControls& controls, int order,
                                          const NoiseEnsemble& ensemble, const BlochBasis& basis,
                                          const AtomSpecies& species, int phase_grid,
                                          double mirror_phase, bool with_gradient);

double ensemble_mirror_cost(const PulseWaveform& waveform, const NoiseEnsemble& ensemble,
                            const BlochBasis& basis, const AtomSpecies& species);

inline constexpr int kDefaultPhaseGrid = 16;

double beamsplitter_cost(const PulseWaveform& waveform, const NoiseEnsemble& ensemble,
                         const BlochBasis& basis, const AtomSpecies& species,
                         int phase_grid = kDefaultPhaseGrid, double mirror_phase = 0.0);

/// Ensemble-averaged P1 - P2 on the beamsplitter-cost phase grid.
std::vector<double> beamsplitter_fringe(const PulseWaveform& waveform, const NoiseEnsemble& ensemble,
                                        const BlochBasis& basis, const AtomSpecies& species,
                                        int phase_grid = kDefaultPhaseGrid,
                                        double mirror_phase = 0.0);

/// State-transfer fidelity 0 -> n on a (beta, delta_p) grid.
struct FidelityLandscape {
  std::vector<double> delta_p;
  std::vector<double> beta;
  Eigen::MatrixXd fidelity;  // rows: beta, columns: delta_p
};

FidelityLandscape fidelity_landscape(const PulseWaveform& waveform,
                                     std::span<const double> delta_p_grid,
                                     std::span<const double> beta_grid, const BlochBasis& basis,
                                     const AtomSpecies& species);

/// CSV grid: header "beta\\delta_p,<delta_p values...>", one row per beta.
std::string landscape_csv(const FidelityLandscape& landscape);

/// Width of the contiguous interval around the grid point nearest zero where
/// `values` stays >= level, with linear interpolation of the crossings. Zero
/// when the centre itself is below the level.
double contour_width(std::span<const double> axis, std::span<const double> values, double level);

std::vector<double> linspace(double lo, double hi, std::size_t count);

}  // namespace bragg
