#include "bragg/waveforms.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <nlohmann/json.hpp>

namespace bragg {

namespace {

using nlohmann::json;

// Kaiser shape parameter for the stop-band measurement: ~70 dB side lobes with a
// main lobe of about 2.4 DFT bins half-width.
constexpr double kKaiserBeta = 8.0;

std::size_t segment_count(double duration, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");
  const double n = duration / dt;
  const double rounded = std::round(n);
  if (std::abs(n - rounded) > 1e-9 * std::max(1.0, n))
    throw ConfigError("dt must divide the pulse duration");
  return static_cast<std::size_t>(rounded);
}

// Line number (1-based) of byte offset `pos`.
std::size_t line_of(std::string_view text, std::size_t pos) {
  pos = std::min(pos, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + pos, '\n'));
}

// Offset of the `index`-th object inside the top-level "segments" array, or npos.
std::size_t locate_segment(std::string_view text, std::size_t index) {
  const auto key = text.find("\"segments\"");
  if (key == std::string_view::npos) return key;
  const auto open = text.find('[', key);
  if (open == std::string_view::npos) return open;
  int depth = 0;
  bool in_string = false;
  std::size_t seen = 0;
  for (std::size_t p = open + 1; p < text.size(); ++p) {
    const char ch = text[p];
    if (in_string) {
      if (ch == '\\') ++p;
      else if (ch == '"') in_string = false;
      continue;
    }
    if (ch == '"') in_string = true;
    else if (ch == '{') {
      if (depth == 0 && seen++ == index) return p;
      ++depth;
    } else if (ch == '}') --depth;
    else if (ch == ']' && depth == 0) break;
  }
  return std::string_view::npos;
}

double read_number(const json& obj, const char* field, std::string_view text, std::size_t where,
                   const std::string& path) {
  auto fail = [&](const std::string& what) {
    std::string msg = what;
    if (where != std::string_view::npos) msg += " (line " + std::to_string(line_of(text, where)) + ")";
    throw ParseError(msg);
  };
  const auto it = obj.find(field);
  if (it == obj.end()) fail("missing field: " + path + field);
  if (!it->is_number()) fail("field " + path + field + " must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) fail("field " + path + field + " is not finite");
  return v;
}

}  // namespace

std::string to_string(PulseRole role) {
  switch (role) {
    case PulseRole::mirror: return "mirror";
    case PulseRole::beamsplitter: return "beamsplitter";
    case PulseRole::custom: return "custom";
  }
  return "custom";
}

PulseRole parse_role(std::string_view text) {
  if (text == "mirror") return PulseRole::mirror;
  if (text == "beamsplitter") return PulseRole::beamsplitter;
  if (text == "custom") return PulseRole::custom;
  throw ConfigError("unknown pulse role: " + std::string(text));
}

double PulseWaveform::peak_rabi() const {
  double peak = 0.0;
  for (const auto& s : samples) peak = std::max(peak, s.rabi);
  return peak;
}

QuadratureControls to_quadratures(const PulseWaveform& waveform) {
  QuadratureControls q;
  q.dt = waveform.dt;
  const auto n = waveform.size();
  q.r.resize(n);
  q.i.resize(n);
  q.delta.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& s = waveform.samples[j];
    q.r[j] = s.rabi * std::cos(s.phase);
    q.i[j] = s.rabi * std::sin(s.phase);
    q.delta[j] = s.detuning;
  }
  return q;
}

PulseWaveform from_quadratures(const QuadratureControls& controls, const PulseWaveform& like) {
  PulseWaveform w = like;
  w.dt = controls.dt;
  const auto n = controls.size();
  w.samples.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double amp = std::hypot(controls.r[j], controls.i[j]);
    w.samples[j].rabi = amp;
    w.samples[j].phase = amp > 0.0 ? std::atan2(controls.i[j], controls.r[j]) : 0.0;
    w.samples[j].detuning = controls.delta[j];
  }
  return w;
}

double gaussian_envelope(double t, double omega_max, double sigma_tau) {
  const double s = 2.0 * sigma_tau;
  return omega_max * std::exp(-(t * t) / (s * s));
}

PulseWaveform gaussian_pulse(double omega_max, double sigma_tau, double duration, double dt,
                             double detuning, double phase) {
  if (!(sigma_tau > 0.0)) throw ConfigError("gaussian_pulse: sigma_tau must be positive");
  if (!(omega_max >= 0.0)) throw ConfigError("gaussian_pulse: omega_max must be non-negative");
  const std::size_t n = segment_count(duration, dt);
  PulseWaveform w;
  w.dt = dt;
  w.samples.resize(n);
  w.omega_max = omega_max;
  for (std::size_t j = 0; j < n; ++j) {
    const double t = (static_cast<double>(j) + 0.5) * dt - 0.5 * duration;
    w.samples[j] = WaveformSample{gaussian_envelope(t, omega_max, sigma_tau), phase, detuning};
  }
  w.samples.front().rabi = 0.0;
  w.samples.back().rabi = 0.0;
  return w;
}

SincFilter::SincFilter(std::size_t size, double dt, double cutoff) : cutoff_(cutoff) {
  if (!(cutoff > 0.0)) throw ConfigError("sinc filter cut-off must be positive");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  const auto n = static_cast<Eigen::Index>(size);
  // Output sample i (midpoint t_i) from input segment j: the kernel integrated
  // over the segment depends only on k = i - j:
  //   (1/pi) * integral_{(k-1/2)dt}^{(k+1/2)dt} sin(cutoff u) / u du.
  auto sinc = [cutoff](double u) {
    const double x = cutoff * u;
    return std::abs(x) < 1e-8 ? cutoff : std::sin(x) / u;
  };
  std::vector<double> taps(2 * size + 1);
  for (Eigen::Index k = -n; k <= n; ++k) {
    const double a = (static_cast<double>(k) - 0.5) * dt;
    const double b = (static_cast<double>(k) + 0.5) * dt;
    taps[static_cast<std::size_t>(k + n)] =
        boost::math::quadrature::gauss<double, 20>::integrate(sinc, a, b) / kPi;
  }
  kernel_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kernel_(i, j) = taps[static_cast<std::size_t>(i - j + n)];
}

std::vector<double> SincFilter::apply(std::span<const double> channel) const {
  if (static_cast<Eigen::Index>(channel.size()) != kernel_.cols())
    throw ConfigError("sinc filter: channel length mismatch");
  Eigen::Map<const Eigen::VectorXd> in(channel.data(), kernel_.cols());
  std::vector<double> out(channel.size());
  Eigen::Map<Eigen::VectorXd>(out.data(), kernel_.rows()) = kernel_ * in;
  return out;
}

std::vector<double> SincFilter::apply_transpose(std::span<const double> in) const {
  if (static_cast<Eigen::Index>(in.size()) != kernel_.rows())
    throw ConfigError("sinc filter: gradient length mismatch");
  Eigen::Map<const Eigen::VectorXd> g(in.data(), kernel_.rows());
  std::vector<double> out(in.size());
  Eigen::Map<Eigen::VectorXd>(out.data(), kernel_.cols()) = kernel_.transpose() * g;
  return out;
}

QuadratureControls sinc_filter(const QuadratureControls& controls, double cutoff) {
  const SincFilter filter(controls.size(), controls.dt, cutoff);
  QuadratureControls out;
  out.dt = controls.dt;
  out.r = filter.apply(controls.r);
  out.i = filter.apply(controls.i);
  out.delta = filter.apply(controls.delta);
  return out;
}

PulseWaveform enforce_bounds(const PulseWaveform& waveform, double omega_max, double delta_max) {
  PulseWaveform w = waveform;
  for (auto& s : w.samples) {
    s.rabi = std::clamp(s.rabi, 0.0, omega_max);
    s.detuning = std::clamp(s.detuning, -delta_max, delta_max);
  }
  if (!w.samples.empty()) {
    w.samples.front().rabi = 0.0;
    w.samples.back().rabi = 0.0;
  }
  return w;
}

std::vector<std::string> invariant_violations(const PulseWaveform& w) {
  std::vector<std::string> out;
  if (!(w.dt > 0.0)) out.push_back("dt must be positive");
  if (w.samples.empty()) out.push_back("waveform has no segments");
  if (w.order < 1) out.push_back("order must be >= 1");
  if (!w.samples.empty()) {
    if (w.samples.front().rabi != 0.0) out.push_back("first segment amplitude is not zero");
    if (w.samples.back().rabi != 0.0) out.push_back("last segment amplitude is not zero");
  }
  for (std::size_t j = 0; j < w.samples.size(); ++j) {
    const auto& s = w.samples[j];
    if (!std::isfinite(s.rabi) || !std::isfinite(s.phase) || !std::isfinite(s.detuning)) {
      out.push_back("segment " + std::to_string(j) + " is not finite");
    } else if (s.rabi < 0.0) {
      out.push_back("segment " + std::to_string(j) + " has negative amplitude");
    } else if (w.omega_max > 0.0 && s.rabi > w.omega_max) {
      out.push_back("segment " + std::to_string(j) + " exceeds omega_max");
    } else if (w.delta_max > 0.0 && std::abs(s.detuning) > w.delta_max) {
      out.push_back("segment " + std::to_string(j) + " exceeds delta_max");
    }
  }
  return out;
}

std::vector<ControlSegment> to_segments(const PulseWaveform& waveform, const AtomSpecies& species,
                                        double detuning_offset) {
  const double base = resonant_detuning(waveform.order, 0.0, species) + detuning_offset;
  std::vector<ControlSegment> out;
  out.reserve(waveform.size());
  for (const auto& s : waveform.samples)
    out.push_back(ControlSegment{waveform.dt, s.rabi, s.phase, base + s.detuning});
  return out;
}

double stopband_level(std::span<const double> channel, double dt, double from_frequency) {
  const std::size_t n = channel.size();
  if (n < 2) return 0.0;
  std::vector<double> windowed(n);
  const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
  for (std::size_t j = 0; j < n; ++j) {
    const double r = 2.0 * static_cast<double>(j) / static_cast<double>(n - 1) - 1.0;
    windowed[j] = channel[j] * std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / norm;
  }
  const std::size_t grid = 32 * n;
  const double nyquist = kPi / dt;
  double peak = 0.0;
  double stop = 0.0;
  for (std::size_t f = 0; f <= grid; ++f) {
    const double omega = nyquist * static_cast<double>(f) / static_cast<double>(grid);
    std::complex<double> acc = 0.0;
    const std::complex<double> step = std::polar(1.0, -omega * dt);
    std::complex<double> rot = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += windowed[j] * rot;
      rot *= step;
    }
    const double mag = std::abs(acc);
    peak = std::max(peak, mag);
    if (omega >= from_frequency) stop = std::max(stop, mag);
  }
  return peak > 0.0 ? stop / peak : 0.0;
}

std::string serialize(const PulseWaveform& w) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"format\": \"bragg-forge-waveform\",\n";
  os << "  \"version\": " << kWaveformSchemaVersion << ",\n";
  os << "  \"role\": " << json(to_string(w.role)).dump() << ",\n";
  os << "  \"order\": " << w.order << ",\n";
  os << "  \"units\": {\"dt\": \"s\", \"omega_r\": \"rad/s\", \"phi_l\": \"rad\", "
        "\"delta\": \"rad/s relative to the order-n resonance\"},\n";
  os << "  \"dt\": " << json(w.dt).dump() << ",\n";
  os << "  \"design\": {\"omega_max\": " << json(w.omega_max).dump()
     << ", \"delta_max\": " << json(w.delta_max).dump()
     << ", \"filter_cutoff\": " << json(w.filter_cutoff).dump() << "},\n";
  os << "  \"segments\": [\n";
  for (std::size_t j = 0; j < w.samples.size(); ++j) {
    const auto& s = w.samples[j];
    os << "    {\"omega_r\": " << json(s.rabi).dump() << ", \"phi_l\": " << json(s.phase).dump()
       << ", \"delta\": " << json(s.detuning).dump() << "}"
       << (j + 1 < w.samples.size() ? ",\n" : "\n");
  }
  os << "  ]\n}\n";
  return os.str();
}

PulseWaveform deserialize(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError("malformed waveform document (line " + std::to_string(line_of(text, e.byte)) +
                     "): " + e.what());
  }
  if (!doc.is_object()) throw ParseError("waveform document must be a JSON object (line 1)");
  auto key_pos = [&](const char* key) { return text.find("\"" + std::string(key) + "\""); };
  if (auto it = doc.find("format"); it != doc.end() && *it != "bragg-forge-waveform")
    throw ParseError("field format: not a bragg-forge waveform (line " +
                     std::to_string(line_of(text, key_pos("format"))) + ")");
  const auto version = doc.find("version");
  if (version == doc.end()) throw ParseError("missing field: version");
  if (!version->is_number_integer() || version->get<int>() != kWaveformSchemaVersion)
    throw ParseError("field version: unsupported schema version (line " +
                     std::to_string(line_of(text, key_pos("version"))) + ")");

  PulseWaveform w;
  w.dt = read_number(doc, "dt", text, key_pos("dt"), "");
  if (!(w.dt > 0.0))
    throw ParseError("field dt must be positive (line " + std::to_string(line_of(text, key_pos("dt"))) + ")");
  if (auto it = doc.find("role"); it != doc.end()) {
    if (!it->is_string()) throw ParseError("field role must be a string");
    try {
      w.role = parse_role(it->get<std::string>());
    } catch (const ConfigError&) {
      throw ParseError("field role: unknown value (line " +
                       std::to_string(line_of(text, key_pos("role"))) + ")");
    }
  }
  if (auto it = doc.find("order"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<int>() < 1)
      throw ParseError("field order must be a positive integer (line " +
                       std::to_string(line_of(text, key_pos("order"))) + ")");
    w.order = it->get<int>();
  }
  if (auto it = doc.find("design"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("field design must be an object");
    const auto where = key_pos("design");
    if (it->contains("omega_max")) w.omega_max = read_number(*it, "omega_max", text, where, "design.");
    if (it->contains("delta_max")) w.delta_max = read_number(*it, "delta_max", text, where, "design.");
    if (it->contains("filter_cutoff"))
      w.filter_cutoff = read_number(*it, "filter_cutoff", text, where, "design.");
  }
  const auto segs = doc.find("segments");
  if (segs == doc.end()) throw ParseError("missing field: segments");
  if (!segs->is_array() || segs->empty())
    throw ParseError("field segments must be a non-empty array (line " +
                     std::to_string(line_of(text, key_pos("segments"))) + ")");
  w.samples.reserve(segs->size());
  for (std::size_t j = 0; j < segs->size(); ++j) {
    const auto& s = (*segs)[j];
    const auto where = locate_segment(text, j);
    const std::string path = "segments[" + std::to_string(j) + "].";
    if (!s.is_object())
      throw ParseError("field " + path.substr(0, path.size() - 1) + " must be an object (line " +
                       std::to_string(line_of(text, where)) + ")");
    WaveformSample sample;
    sample.rabi = read_number(s, "omega_r", text, where, path);
    sample.phase = s.contains("phi_l") ? read_number(s, "phi_l", text, where, path) : 0.0;
    sample.detuning = s.contains("delta") ? read_number(s, "delta", text, where, path) : 0.0;
    if (sample.rabi < 0.0)
      throw ParseError("field " + path + "omega_r must be non-negative (line " +
                       std::to_string(line_of(text, where)) + ")");
    w.samples.push_back(sample);
  }
  return w;
}

std::string to_csv(const PulseWaveform& w) {
  std::ostringstream os;
  os << "t_s,omega_r_rad_s,phi_l_rad,delta_rad_s\n";
  for (std::size_t j = 0; j < w.samples.size(); ++j) {
    const auto& s = w.samples[j];
    os << json(static_cast<double>(j) * w.dt).dump() << ',' << json(s.rabi).dump() << ','
       << json(s.phase).dump() << ',' << json(s.detuning).dump() << '\n';
  }
  return os.str();
}

PulseWaveform load_waveform(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open waveform file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_waveform(const PulseWaveform& waveform, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write waveform file: " + path);
  out << serialize(waveform);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace bragg
