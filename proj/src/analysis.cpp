#include "bragg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "bragg/core.hpp"

namespace bragg {

namespace {

constexpr int kA = 0, kW = 1, kPhi = 2, kC = 3, kS = 4;

double wrap_phase(double phi) {
  double w = std::remainder(phi, kTwoPi);  // [-pi, pi]
  if (w <= -kPi) w += kTwoPi;
  return w;
}

// Fit carried out on u = (x - center) / half; parameters ordered (A, w, phi, c, s).
struct ScaledFit {
  double center = 0.0;
  double half = 1.0;
  Eigen::Matrix<double, 5, 1> p = Eigen::Matrix<double, 5, 1>::Zero();
  Eigen::Matrix<double, 5, 5> cov = Eigen::Matrix<double, 5, 5>::Zero();
  double rss = 0.0;
  double condition = 1.0;
  std::size_t n = 0;
  bool frequency_fixed = false;
  bool slope_fixed = true;
};

struct Scaled {
  Eigen::VectorXd u;
  Eigen::VectorXd y;
  double center;
  double half;
};

Scaled rescale(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ConfigError("fit: x and y lengths differ");
  if (x.size() < 5) throw ConfigError("fit: at least 5 points are required");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ConfigError("fit: non-finite data");
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  Scaled s;
  s.center = 0.5 * (*lo + *hi);
  s.half = 0.5 * (*hi - *lo);
  if (!(s.half > 0.0)) throw ConfigError("fit: scan values are all equal");
  s.u.resize(static_cast<Eigen::Index>(x.size()));
  s.y.resize(s.u.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.u(static_cast<Eigen::Index>(i)) = (x[i] - s.center) / s.half;
    s.y(static_cast<Eigen::Index>(i)) = y[i];
  }
  const double mean = s.y.mean();
  if ((s.y.array() - mean).abs().maxCoeff() == 0.0)
    throw ConfigError("fit: degenerate data (zero variance)");
  return s;
}

double condition_of(const Eigen::MatrixXd& j) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  return smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
}

// Linear least squares at a known frequency: y = a cos + b sin + c (+ s u).
ScaledFit linear_fit(const Scaled& d, double w, bool trend) {
  const Eigen::Index n = d.u.size();
  const Eigen::Index cols = trend ? 4 : 3;
  Eigen::MatrixXd x(n, cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = std::cos(w * d.u(i));
    x(i, 1) = std::sin(w * d.u(i));
    x(i, 2) = 1.0;
    if (trend) x(i, 3) = d.u(i);
  }
  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(d.y);
  ScaledFit f;
  f.center = d.center;
  f.half = d.half;
  f.n = static_cast<std::size_t>(n);
  f.frequency_fixed = true;
  f.slope_fixed = !trend;
  f.rss = (x * beta - d.y).squaredNorm();
  f.condition = condition_of(x);
  const double a = beta(0), b = beta(1);
  const double amp = std::hypot(a, b);
  f.p(kA) = amp;
  f.p(kW) = w;
  f.p(kPhi) = std::atan2(-b, a);
  f.p(kC) = beta(2);
  f.p(kS) = trend ? beta(3) : 0.0;

  const double dof = static_cast<double>(n - cols);
  if (dof > 0.0 && std::isfinite(f.condition)) {
    const Eigen::MatrixXd cab = (f.rss / dof) * ldlt.solve(Eigen::MatrixXd::Identity(cols, cols));
    // (a, b, c, s) -> (A, w, phi, c, s)
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(5, cols);
    if (amp > 0.0) {
      jac(kA, 0) = a / amp;
      jac(kA, 1) = b / amp;
      jac(kPhi, 0) = b / (amp * amp);
      jac(kPhi, 1) = -a / (amp * amp);
    }
    jac(kC, 2) = 1.0;
    if (trend) jac(kS, 3) = 1.0;
    f.cov = jac * cab * jac.transpose();
    if (!(amp > 0.0)) f.cov(kPhi, kPhi) = std::numeric_limits<double>::infinity();
  }
  return f;
}

struct SineResidual : Eigen::DenseFunctor<double> {
  const Scaled& d;
  bool trend;
  SineResidual(const Scaled& data, bool with_trend)
      : DenseFunctor<double>(with_trend ? 5 : 4, static_cast<int>(data.u.size())),
        d(data),
        trend(with_trend) {}

  int operator()(const InputType& p, ValueType& r) const {
    for (Eigen::Index i = 0; i < d.u.size(); ++i) {
      r(i) = p(kA) * std::cos(p(kW) * d.u(i) + p(kPhi)) + p(kC) - d.y(i);
      if (trend) r(i) += p(kS) * d.u(i);
    }
    return 0;
  }
  int df(const InputType& p, JacobianType& j) const {
    for (Eigen::Index i = 0; i < d.u.size(); ++i) {
      const double th = p(kW) * d.u(i) + p(kPhi);
      j(i, kA) = std::cos(th);
      j(i, kW) = -p(kA) * d.u(i) * std::sin(th);
      j(i, kPhi) = -p(kA) * std::sin(th);
      j(i, kC) = 1.0;
      if (trend) j(i, kS) = d.u(i);
    }
    return 0;
  }
};

ScaledFit free_fit(const Scaled& d, bool trend) {
  const Eigen::Index n = d.u.size();
  // Periodogram: best linear fit over a frequency grid from one period across
  // the scan up to the Nyquist limit of the smallest spacing.
  std::vector<double> sorted(d.u.data(), d.u.data() + n);
  std::sort(sorted.begin(), sorted.end());
  double min_step = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i] > sorted[i - 1]) min_step = std::min(min_step, sorted[i] - sorted[i - 1]);
  const double w_lo = kPi / 2.0;  // one period across u in [-1, 1] is w = pi
  const double w_hi = kPi / min_step;
  const double dw = kPi / 16.0;
  double w0 = w_lo;
  double best_rss = std::numeric_limits<double>::infinity();
  for (double w = w_lo; w <= w_hi; w += dw) {
    const ScaledFit lf = linear_fit(d, w, trend);
    if (lf.rss < best_rss) {
      best_rss = lf.rss;
      w0 = w;
    }
  }
  const ScaledFit seed = linear_fit(d, w0, trend);

  const int np = trend ? 5 : 4;
  ScaledFit best;
  bool have = false;
  double fallback_rss = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 8; ++k) {
    Eigen::VectorXd p(np);
    p(kA) = std::max(seed.p(kA), 1e-12);
    p(kW) = w0;
    p(kPhi) = -kPi + kTwoPi * k / 8.0;
    p(kC) = seed.p(kC);
    if (trend) p(kS) = seed.p(kS);
    SineResidual functor(d, trend);
    Eigen::LevenbergMarquardt<SineResidual> lm(functor);
    lm.setMaxfev(2000);
    const auto status = lm.minimize(p);
    Eigen::VectorXd r(n);
    functor(p, r);
    const double rss = r.squaredNorm();
    fallback_rss = std::min(fallback_rss, rss);
    const bool ok = status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
                    status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation &&
                    std::isfinite(rss);
    if (!ok) continue;
    if (p(kA) < 0.0) {
      p(kA) = -p(kA);
      p(kPhi) += kPi;
    }
    if (p(kW) < 0.0) {
      p(kW) = -p(kW);
      p(kPhi) = -p(kPhi);
    }
    p(kPhi) = wrap_phase(p(kPhi));
    const double tie = 1e-12 * std::max(1.0, rss);
    const bool better = !have || rss < best.rss - tie ||
                        (std::abs(rss - best.rss) <= tie && std::abs(p(kPhi)) < std::abs(best.p(kPhi)));
    if (!better) continue;
    have = true;
    best.p.setZero();
    best.p.head(np) = p;
    best.rss = rss;
  }
  if (!have) {
    std::ostringstream os;
    os << "sinusoid fit did not converge (best residual sum of squares " << fallback_rss << ")";
    throw NumericalError(os.str());
  }
  best.center = d.center;
  best.half = d.half;
  best.n = static_cast<std::size_t>(n);
  best.frequency_fixed = false;
  best.slope_fixed = !trend;

  SineResidual functor(d, trend);
  Eigen::MatrixXd j(n, np);
  Eigen::VectorXd p = best.p.head(np);
  functor.df(p, j);
  best.condition = condition_of(j);
  const double dof = static_cast<double>(n - np);
  if (dof > 0.0 && std::isfinite(best.condition)) {
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::MatrixXd c = (best.rss / dof) * jtj.ldlt().solve(Eigen::MatrixXd::Identity(np, np));
    best.cov.topLeftCorner(np, np) = c;
  }
  if (best.p(kW) * 2.0 / kTwoPi < 1.5)
    throw ConfigError("fit: a free-frequency fit needs at least 1.5 periods across the scan");
  return best;
}

ScaledFit scaled_fit(const std::vector<double>& x, const std::vector<double>& y,
                     std::optional<double> fixed_frequency, bool trend) {
  const Scaled d = rescale(x, y);
  if (fixed_frequency) {
    if (!(*fixed_frequency > 0.0)) throw ConfigError("fit: fixed frequency must be positive");
    ScaledFit f = linear_fit(d, *fixed_frequency * d.half, trend);
    f.p(kPhi) = wrap_phase(f.p(kPhi));
    return f;
  }
  return free_fit(d, trend);
}

double safe_sqrt(double v) { return v > 0.0 ? std::sqrt(v) : 0.0; }

SinusoidFit to_public(const ScaledFit& f) {
  SinusoidFit out;
  const double m = f.center / f.half;  // phase shift per unit w_u
  out.amplitude = f.p(kA);
  out.frequency = f.p(kW) / f.half;
  out.phase = wrap_phase(f.p(kPhi) - f.p(kW) * m);
  out.offset = f.p(kC) - f.p(kS) * m;
  out.slope = f.p(kS) / f.half;
  out.amplitude_error = safe_sqrt(f.cov(kA, kA));
  out.frequency_error = safe_sqrt(f.cov(kW, kW)) / f.half;
  out.phase_error = safe_sqrt(f.cov(kPhi, kPhi) + m * m * f.cov(kW, kW) - 2.0 * m * f.cov(kPhi, kW));
  if (std::isinf(f.cov(kPhi, kPhi))) out.phase_error = std::numeric_limits<double>::infinity();
  out.offset_error = safe_sqrt(f.cov(kC, kC) + m * m * f.cov(kS, kS) - 2.0 * m * f.cov(kC, kS));
  out.slope_error = safe_sqrt(f.cov(kS, kS)) / f.half;
  out.residual_rms = std::sqrt(f.rss / static_cast<double>(f.n));
  out.condition_number = f.condition;
  out.frequency_fixed = f.frequency_fixed;
  out.slope_fixed = f.slope_fixed;
  out.points = f.n;
  return out;
}

}  // namespace

double SinusoidFit::evaluate(double x) const {
  return amplitude * std::cos(frequency * x + phase) + offset + slope * x;
}

double SinusoidFit::single_shot_phase_error() const {
  return phase_error * std::sqrt(static_cast<double>(points));
}

SinusoidFit fit_sinusoid(const std::vector<double>& x, const std::vector<double>& y,
                         std::optional<double> fixed_frequency, bool include_linear_trend) {
  return to_public(scaled_fit(x, y, fixed_frequency, include_linear_trend));
}

SinusoidFit fit_sinusoid(const FringeDataset& data, std::optional<double> fixed_frequency,
                         bool include_linear_trend) {
  return fit_sinusoid(data.scan_values, data.values, fixed_frequency, include_linear_trend);
}

std::string fit_json(const SinusoidFit& f) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json doc;
  doc["model"] = "A cos(omega x + phase) + offset + slope x";
  doc["amplitude"] = {{"value", num(f.amplitude)}, {"error", num(f.amplitude_error)}};
  doc["frequency"] = {{"value", num(f.frequency)}, {"error", num(f.frequency_error)}, {"fixed", f.frequency_fixed}};
  doc["phase"] = {{"value", num(f.phase)}, {"error", num(f.phase_error)}};
  doc["offset"] = {{"value", num(f.offset)}, {"error", num(f.offset_error)}};
  doc["slope"] = {{"value", num(f.slope)}, {"error", num(f.slope_error)}, {"fixed", f.slope_fixed}};
  doc["residual_rms"] = num(f.residual_rms);
  doc["condition_number"] = num(f.condition_number);
  doc["points"] = f.points;
  doc["single_shot_phase_error"] = num(f.single_shot_phase_error());
  return doc.dump(2) + "\n";
}

Measurement visibility(const SinusoidFit& fit, FringeQuantity quantity) {
  const double factor = quantity == FringeQuantity::asymmetry ? 1.0 : 2.0;
  return {factor * fit.amplitude, factor * fit.amplitude_error};
}

LineFit extract_scale_factor(const std::vector<double>& a, const std::vector<double>& phase,
                             const std::vector<double>& phase_error) {
  if (a.size() != phase.size()) throw ConfigError("scale factor: length mismatch");
  if (a.size() < 3) throw ConfigError("scale factor: at least 3 points are required");
  if (!phase_error.empty() && phase_error.size() != a.size())
    throw ConfigError("scale factor: phase errors must match the points");
  const bool weighted = !phase_error.empty() &&
                        std::all_of(phase_error.begin(), phase_error.end(),
                                    [](double e) { return e > 0.0 && std::isfinite(e); });
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = a[static_cast<std::size_t>(i)];
    y(i) = phase[static_cast<std::size_t>(i)];
    w(i) = weighted ? 1.0 / std::pow(phase_error[static_cast<std::size_t>(i)], 2) : 1.0;
  }
  const Eigen::Matrix2d xtwx = x.transpose() * w.asDiagonal() * x;
  const double spread = x.col(1).maxCoeff() - x.col(1).minCoeff();
  if (!(spread > 0.0) || std::abs(xtwx.determinant()) <= 1e-300)
    throw ConfigError("scale factor: singular design (all accelerations equal)");
  const Eigen::Matrix2d inv = xtwx.inverse();
  const Eigen::Vector2d beta = inv * (x.transpose() * w.asDiagonal() * y);
  Eigen::Matrix2d cov = inv;
  if (!weighted) cov *= (x * beta - y).squaredNorm() / static_cast<double>(n - 2);
  LineFit out;
  out.weighted = weighted;
  out.intercept = beta(0);
  out.slope = beta(1);
  out.intercept_error = safe_sqrt(cov(0, 0));
  out.slope_error = safe_sqrt(cov(1, 1));
  return out;
}

CentralFringe find_central_fringe(const std::vector<FringeDataset>& fringes,
                                  const std::vector<double>& times, double wavenumber,
                                  FringeExtremum extremum, bool include_linear_trend) {
  if (fringes.size() != times.size()) throw ConfigError("one interrogation time per fringe is required");
  std::vector<double> distinct(times);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2)
    throw ConfigError("central fringe needs at least two distinct interrogation times");
  if (!(wavenumber > 0.0)) throw ConfigError("wavenumber must be positive");

  const double target = extremum == FringeExtremum::maximum ? 0.0 : kPi;
  CentralFringe out;
  struct Candidate {
    double alpha;
    double variance;
  };
  std::vector<std::vector<Candidate>> cands(fringes.size());
  double min_period = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < fringes.size(); ++f) {
    const ScaledFit fit =
        scaled_fit(fringes[f].scan_values, fringes[f].values, std::nullopt, include_linear_trend);
    out.fits.push_back(to_public(fit));
    const double w = fit.p(kW), phi = fit.p(kPhi);
    min_period = std::min(min_period, kTwoPi * fit.half / w);
    FringeCenterCandidates list;
    list.interrogation_time = times[f];
    const auto k_lo = static_cast<long>(std::ceil((-w + phi - target) / kTwoPi));
    const auto k_hi = static_cast<long>(std::floor((w + phi - target) / kTwoPi));
    for (long k = k_lo; k <= k_hi; ++k) {
      const double u = (target + kTwoPi * static_cast<double>(k) - phi) / w;
      const double da_dphi = -fit.half / w;
      const double da_dw = -fit.half * u / w;
      const double var = da_dphi * da_dphi * fit.cov(kPhi, kPhi) + da_dw * da_dw * fit.cov(kW, kW) +
                         2.0 * da_dphi * da_dw * fit.cov(kPhi, kW);
      cands[f].push_back({fit.center + fit.half * u, std::max(var, 0.0)});
      list.alpha.push_back(cands[f].back().alpha);
    }
    out.candidates.push_back(list);
  }

  auto describe = [&] {
    std::ostringstream os;
    for (const auto& c : out.candidates) {
      os << " T=" << c.interrogation_time << ":";
      for (double a : c.alpha) os << ' ' << a;
      if (c.alpha.empty()) os << " none";
    }
    return os.str();
  };
  for (const auto& c : cands)
    if (c.empty()) throw NumericalError("no common fringe extremum inside the scan; candidates:" + describe());

  double best_spread = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_pick;
  for (std::size_t anchor = 0; anchor < cands.size(); ++anchor) {
    for (const auto& a : cands[anchor]) {
      std::vector<std::size_t> pick(cands.size());
      double lo = a.alpha, hi = a.alpha;
      for (std::size_t f = 0; f < cands.size(); ++f) {
        std::size_t nearest = 0;
        for (std::size_t k = 1; k < cands[f].size(); ++k)
          if (std::abs(cands[f][k].alpha - a.alpha) < std::abs(cands[f][nearest].alpha - a.alpha))
            nearest = k;
        pick[f] = nearest;
        lo = std::min(lo, cands[f][nearest].alpha);
        hi = std::max(hi, cands[f][nearest].alpha);
      }
      if (hi - lo < best_spread) {
        best_spread = hi - lo;
        best_pick = pick;
      }
    }
  }
  if (!(best_spread <= 0.25 * min_period))
    throw NumericalError("no common fringe extremum inside the scan; candidates:" + describe());

  bool weighted = true;
  for (std::size_t f = 0; f < cands.size(); ++f)
    if (!(cands[f][best_pick[f]].variance > 0.0)) weighted = false;
  double sw = 0.0, swa = 0.0;
  for (std::size_t f = 0; f < cands.size(); ++f) {
    const Candidate& c = cands[f][best_pick[f]];
    const double w = weighted ? 1.0 / c.variance : 1.0;
    sw += w;
    swa += w * c.alpha;
    out.selected.push_back(c.alpha);
  }
  out.alpha_star = swa / sw;
  out.alpha_error = weighted ? std::sqrt(1.0 / sw) : 0.0;
  out.alpha_spread = best_spread;
  out.gravity = out.alpha_star / (2.0 * wavenumber);
  out.gravity_error = out.alpha_error / (2.0 * wavenumber);
  out.gravity_spread = best_spread / (2.0 * wavenumber);
  return out;
}

}  // namespace bragg
