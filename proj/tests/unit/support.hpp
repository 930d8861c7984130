#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

#include "bragg/core.hpp"
#include "bragg/waveforms.hpp"

namespace testing {

inline std::string fixture(const std::string& name) {
  return std::string(BRAGG_SOURCE_DIR) + "/fixtures/" + name;
}

// Composite Simpson rule with n (even) panels.
template <class F>
double simpson(F&& f, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Sine integral by quadrature of sin(t)/t.
inline double sine_integral(double x) {
  if (x == 0.0) return 0.0;
  const int panels = 2 * std::max(200, static_cast<int>(std::abs(x) * 40.0));
  return simpson([](double t) { return t == 0.0 ? 1.0 : std::sin(t) / t; }, 0.0, x, panels);
}

// Amplitude of the tone exp(i w t) in samples y_j taken at t_j = (j + 0.5) dt,
// j in [from, to): least-squares projection onto cos and sin.
inline double tone_amplitude(const std::vector<double>& y, double dt, double w, std::size_t from,
                             std::size_t to) {
  double cc = 0, ss = 0, cs = 0, yc = 0, ys = 0;
  for (std::size_t j = from; j < to; ++j) {
    const double t = (static_cast<double>(j) + 0.5) * dt;
    const double c = std::cos(w * t), s = std::sin(w * t);
    cc += c * c;
    ss += s * s;
    cs += c * s;
    yc += y[j] * c;
    ys += y[j] * s;
  }
  const double det = cc * ss - cs * cs;
  const double a = (yc * ss - ys * cs) / det;
  const double b = (ys * cc - yc * cs) / det;
  return std::hypot(a, b);
}

// Random feasible waveform: amplitudes in [0, omega_max] with zero ends.
inline bragg::PulseWaveform random_waveform(std::size_t n, double dt, int order, double omega_max,
                                            double delta_max, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bragg::PulseWaveform w;
  w.dt = dt;
  w.order = order;
  w.role = bragg::PulseRole::mirror;
  w.omega_max = omega_max;
  w.delta_max = delta_max;
  for (std::size_t j = 0; j < n; ++j) {
    bragg::WaveformSample s;
    s.rabi = (j == 0 || j + 1 == n) ? 0.0 : omega_max * u(rng);
    s.phase = bragg::kTwoPi * u(rng);
    s.detuning = delta_max * (2.0 * u(rng) - 1.0);
    w.samples.push_back(s);
  }
  return w;
}

}  // namespace testing
