#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bragg/core.hpp"
#include "bragg/dynamics.hpp"

namespace bragg {

enum class PulseRole { mirror, beamsplitter, custom };

std::string to_string(PulseRole role);
PulseRole parse_role(std::string_view text);

/// One sample of a piecewise-constant waveform. `detuning` is the two-photon
/// detuning relative to the order-n resonance of a delta_p = 0 atom.
struct WaveformSample {
  double rabi = 0.0;
  double phase = 0.0;
  double detuning = 0.0;

  bool operator==(const WaveformSample&) const = default;
};

struct PulseWaveform {
  double dt = 0.0;
  std::vector<WaveformSample> samples;
  PulseRole role = PulseRole::custom;
  int order = 1;
  // Design metadata in rad/s; zero means "not specified".
  double omega_max = 0.0;
  double delta_max = 0.0;
  double filter_cutoff = 0.0;

  std::size_t size() const { return samples.size(); }
  double duration() const { return dt * static_cast<double>(samples.size()); }
  double peak_rabi() const;
  bool operator==(const PulseWaveform&) const = default;
};

/// R = Omega cos(phi), I = Omega sin(phi), delta, on the waveform's grid.
struct QuadratureControls {
  double dt = 0.0;
  std::vector<double> r;
  std::vector<double> i;
  std::vector<double> delta;

  std::size_t size() const { return r.size(); }
};

QuadratureControls to_quadratures(const PulseWaveform& waveform);
/// Replaces the samples of `like` with the given controls; metadata is kept.
PulseWaveform from_quadratures(const QuadratureControls& controls, const PulseWaveform& like);

/// Omega_max exp[-t^2 / (2 sigma_tau)^2].
double gaussian_envelope(double t, double omega_max, double sigma_tau);

/// Gaussian envelope sampled at segment midpoints, centred on the waveform
/// midpoint, with the first and last segment forced to zero amplitude.
PulseWaveform gaussian_pulse(double omega_max, double sigma_tau, double duration, double dt,
                             double detuning = 0.0, double phase = 0.0);

/// Ideal low-pass (sinc) convolution of a piecewise-constant channel that is
/// zero outside the pulse window, sampled back onto the segment midpoints.
/// The operator is linear, so it is stored as a dense N x N matrix.
class SincFilter {
 public:
  SincFilter(std::size_t size, double dt, double cutoff);

  std::vector<double> apply(std::span<const double> channel) const;
  /// out = K^T in, for back-propagating gradients through the filter.
  std::vector<double> apply_transpose(std::span<const double> in) const;
  const Eigen::MatrixXd& matrix() const { return kernel_; }
  double cutoff() const { return cutoff_; }

 private:
  double cutoff_;
  Eigen::MatrixXd kernel_;
};

QuadratureControls sinc_filter(const QuadratureControls& controls, double cutoff);

/// Clips Omega_R into [0, omega_max] and delta into [-delta_max, delta_max]
/// and zeroes the endpoint amplitudes. Idempotent.
PulseWaveform enforce_bounds(const PulseWaveform& waveform, double omega_max, double delta_max);

/// Human-readable description of every violated waveform invariant.
std::vector<std::string> invariant_violations(const PulseWaveform& waveform);

/// Absolute-detuning control segments for the dynamics module.
std::vector<ControlSegment> to_segments(const PulseWaveform& waveform, const AtomSpecies& species,
                                        double detuning_offset = 0.0);

/// Largest spectral magnitude at |omega| >= from_frequency relative to the
/// spectral peak, from a Kaiser-windowed, zero-padded DFT of the samples.
double stopband_level(std::span<const double> channel, double dt, double from_frequency);

inline constexpr int kWaveformSchemaVersion = 1;

std::string serialize(const PulseWaveform& waveform);
PulseWaveform deserialize(std::string_view text);
/// Columns t_s,omega_r_rad_s,phi_l_rad,delta_rad_s (t at segment start).
std::string to_csv(const PulseWaveform& waveform);

PulseWaveform load_waveform(const std::string& path);
void save_waveform(const PulseWaveform& waveform, const std::string& path);

}  // namespace bragg
