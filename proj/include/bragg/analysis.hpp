#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bragg/fringe.hpp"

namespace bragg {

/// y = A cos(omega x + phase) + offset + slope x, with standard errors.
struct SinusoidFit {
  double amplitude = 0.0;
  double frequency = 0.0;
  double phase = 0.0;  // (-pi, pi]
  double offset = 0.0;
  double slope = 0.0;
  double amplitude_error = 0.0;
  double frequency_error = 0.0;
  double phase_error = 0.0;
  double offset_error = 0.0;
  double slope_error = 0.0;
  double residual_rms = 0.0;
  double condition_number = 1.0;
  bool frequency_fixed = false;
  bool slope_fixed = true;
  std::size_t points = 0;

  double evaluate(double x) const;
  /// Phase uncertainty of a single shot: phase_error * sqrt(points).
  double single_shot_phase_error() const;
};

SinusoidFit fit_sinusoid(const std::vector<double>& x, const std::vector<double>& y,
                         std::optional<double> fixed_frequency, bool include_linear_trend);
SinusoidFit fit_sinusoid(const FringeDataset& data, std::optional<double> fixed_frequency,
                         bool include_linear_trend = false);

std::string fit_json(const SinusoidFit& fit);

struct Measurement {
  double value = 0.0;
  double error = 0.0;
};

/// Peak-to-peak size of the fringe in units of the full signal range: A for
/// P1 - P2 data (range 2), 2A for fraction data (range 1).
Measurement visibility(const SinusoidFit& fit, FringeQuantity quantity = FringeQuantity::asymmetry);

struct LineFit {
  double slope = 0.0;
  double slope_error = 0.0;
  double intercept = 0.0;
  double intercept_error = 0.0;
  bool weighted = false;
};

/// Linear regression of phase on acceleration; inverse-variance weighted when
/// every phase error is positive, ordinary least squares otherwise.
LineFit extract_scale_factor(const std::vector<double>& acceleration,
                             const std::vector<double>& phase,
                             const std::vector<double>& phase_error = {});

struct FringeCenterCandidates {
  double interrogation_time = 0.0;
  std::vector<double> alpha;  // extrema of the fitted cosine inside the scan
};

struct CentralFringe {
  double alpha_star = 0.0;   // rad/s^2
  double alpha_error = 0.0;  // statistical, from the fits
  double alpha_spread = 0.0; // max - min of the selected per-T extrema
  double gravity = 0.0;      // alpha_star / (2 k)
  double gravity_error = 0.0;
  double gravity_spread = 0.0;
  std::vector<double> selected;  // chosen extremum per fringe
  std::vector<FringeCenterCandidates> candidates;
  std::vector<SinusoidFit> fits;
};

enum class FringeExtremum { maximum, minimum };

/// Chirp-rate fringes at several interrogation times; each is fitted with a
/// free frequency, the extrema of the cosine term are enumerated and the
/// combination with the smallest spread is the common centre.
CentralFringe find_central_fringe(const std::vector<FringeDataset>& fringes,
                                  const std::vector<double>& interrogation_times,
                                  double wavenumber,
                                  FringeExtremum extremum = FringeExtremum::maximum,
                                  bool include_linear_trend = true);

}  // namespace bragg
