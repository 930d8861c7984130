#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bragg/core.hpp"
#include "bragg/objectives.hpp"
#include "bragg/waveforms.hpp"

namespace bragg {

struct AdamParams {
  double step = 1e-2;  // in units of omega_max for R, I and delta_max for delta
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Step size is step / (1 + iteration / decay_iterations); 0 disables decay.
  double decay_iterations = 0.0;
};

struct OptimizationConfig {
  PulseRole role = PulseRole::mirror;
  int order = 3;
  std::size_t segments = 220;
  double dt = 1e-6;
  double omega_max = kTwoPi * 40e3;       // peak two-photon Rabi frequency
  double delta_max = kTwoPi * 200e3;      // detuning excursion bound
  double filter_cutoff = kTwoPi * 80e3;   // sinc filter omega_max
  double sigma_p = 0.15;
  double beta_min = -0.15;
  double beta_max = 0.15;
  std::size_t batch_size = 32;
  std::size_t validation_size = 64;
  std::size_t validation_every = 10;
  AdamParams adam;
  std::size_t iterations = 2000;
  bool resample = true;
  bool optimize_detuning = true;
  std::uint64_t seed = 1;
  int phase_grid = kDefaultPhaseGrid;
  double mirror_phase = 0.0;
  // Exponent of the smooth peak bound; larger is closer to a hard maximum.
  double bound_sharpness = 64.0;
  // Initial variables are uniform in +-init_fraction of their bounds.
  double init_fraction = 0.1;
  // Gaussian reference pulse used by benchmark_pair.
  double gaussian_sigma_tau = 25e-6;
  std::size_t gaussian_segments = 220;
  // Overrides BlochBasis::for_order(order), e.g. for the two-level reduction.
  std::optional<BlochBasis> basis;
  AtomSpecies species = AtomSpecies::rubidium87();

  static OptimizationConfig mirror_defaults();
  static OptimizationConfig beamsplitter_defaults();

  BlochBasis bloch_basis() const { return basis ? *basis : BlochBasis::for_order(order); }
  void validate() const;
};

/// Reads a JSON optimization config. Physical fields carry their unit in the
/// key (dt_us, omega_max_khz, ...); kHz values are cyclic and converted to rad/s.
OptimizationConfig parse_optimization_config(std::string_view json_text);

/// Unconstrained variables -> filtered, bounded physical controls.
/// Variables are dimensionless: R and I in units of omega_max, delta in units
/// of delta_max. The map is filter -> zero endpoint amplitudes -> global smooth
/// rescale (separately for amplitude and detuning) so that the peak stays
/// strictly below its bound without leaving the filter's band.
class ControlMap {
 public:
  explicit ControlMap(const OptimizationConfig& config);

  QuadratureControls forward(const QuadratureControls& variables) const;
  /// Gradient with respect to the variables given the gradient with respect
  /// to the physical controls produced by forward(variables).
  QuadratureControls backward(const QuadratureControls& variables,
                              const QuadratureControls& physical_gradient) const;
  /// forward() converted to a waveform, with exact bounds enforcement.
  PulseWaveform realize(const QuadratureControls& variables) const;

 private:
  OptimizationConfig config_;
  SincFilter filter_;
};

/// Ensemble cost of the filtered, bounded image of `variables`, and its
/// gradient with respect to the variables.
CostEvaluation cost_gradient(const OptimizationConfig& config, const QuadratureControls& variables,
                             const NoiseEnsemble& ensemble);

struct OptimizationTrace {
  std::vector<double> cost;             // batch cost per iteration
  std::vector<double> validation_cost;  // NaN where not evaluated
  std::vector<double> best_cost;        // running minimum of validation_cost
  std::vector<double> wall_ms;
  std::vector<double> gradient_norm;
  std::size_t best_iteration = 0;
  PulseWaveform best;
  QuadratureControls best_variables;
};

struct OptimizationResult {
  PulseWaveform waveform;
  double validation_cost = 0.0;
  OptimizationTrace trace;
};

OptimizationResult optimize_pulse(const OptimizationConfig& config);

/// Deterministic columns: iteration,cost,validation_cost,best_cost.
std::string trace_csv(const OptimizationTrace& trace);
/// Timing is kept apart so that the trace file is reproducible: iteration,wall_ms.
std::string timing_csv(const OptimizationTrace& trace);

/// The fixed validation ensemble used to select the returned waveform.
NoiseEnsemble validation_ensemble(const OptimizationConfig& config);

/// Role-specific ensemble cost of a finished waveform.
double waveform_cost(const OptimizationConfig& config, const PulseWaveform& waveform,
                     const NoiseEnsemble& ensemble);

/// Gaussian reference (sigma_tau and segment count from the config) with its
/// peak Rabi frequency chosen in (0, omega_max] to maximize on-resonance
/// transfer (mirror) or ideal-atom fringe visibility (beamsplitter).
PulseWaveform calibrate_gaussian(const OptimizationConfig& config);

struct LandscapeGrid {
  std::vector<double> delta_p = linspace(-0.5, 0.5, 41);
  std::vector<double> beta = linspace(-0.6, 0.6, 61);
};

struct BenchmarkReport {
  PulseWaveform optimized;
  PulseWaveform gaussian;
  double optimized_cost = 0.0;
  double gaussian_cost = 0.0;
  FidelityLandscape optimized_landscape;
  FidelityLandscape gaussian_landscape;
  // 90% contour widths through the grid point nearest the origin.
  double optimized_beta_width = 0.0;
  double gaussian_beta_width = 0.0;
  double optimized_delta_p_width = 0.0;
  double gaussian_delta_p_width = 0.0;
};

BenchmarkReport benchmark_pair(const OptimizationConfig& config, const PulseWaveform& optimized,
                               const LandscapeGrid& grid = {});
BenchmarkReport benchmark_pair(const OptimizationConfig& config, const LandscapeGrid& grid = {});

/// Widths of the 90% contour of a landscape along beta (at delta_p nearest 0)
/// and along delta_p (at beta nearest 0).
double beta_contour_width(const FidelityLandscape& landscape, double level = 0.9);
double delta_p_contour_width(const FidelityLandscape& landscape, double level = 0.9);

std::string benchmark_json(const BenchmarkReport& report);

}  // namespace bragg
