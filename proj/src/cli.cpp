#include "bragg/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "bragg/analysis.hpp"
#include "bragg/core.hpp"
#include "bragg/fringe.hpp"
#include "bragg/interferometer.hpp"
#include "bragg/objectives.hpp"
#include "bragg/optimizer.hpp"
#include "bragg/parallel.hpp"
#include "bragg/waveforms.hpp"

namespace bragg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

fs::path prepare_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) throw ConfigError("missing option: --out");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir);
  return fs::path(out_dir);
}

// Records every file written so the manifest can list it.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}
  void write(const std::string& name, const std::string& text) {
    write_file(dir_ / name, text);
    names_.push_back(name);
  }
  const std::vector<std::string>& names() const { return names_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + " is not valid JSON: " + e.what());
  }
}

void reject_unknown(const json& doc, const std::set<std::string>& known, const std::string& prefix) {
  for (const auto& item : doc.items())
    if (!known.count(item.key())) throw ConfigError("unknown field: " + prefix + item.key());
}

template <class T>
T get_field(const json& doc, const std::string& key, const T& fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value for field: " + key);
  }
}

// Scalar or list of numbers.
std::vector<double> number_list(const json& doc, const std::string& key, std::vector<double> fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  try {
    if (v.is_number()) return {v.get<double>()};
    return v.get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value for field: " + key);
  }
}

// {"min": ..., "max": ..., "points": ...}
std::vector<double> grid_field(const json& doc, const std::string& key) {
  if (!doc.contains(key)) throw ConfigError("missing field: " + key);
  const json& g = doc.at(key);
  if (!g.is_object() || !g.contains("min") || !g.contains("max") || !g.contains("points"))
    throw ConfigError("invalid value for field: " + key + " (needs min, max, points)");
  reject_unknown(g, {"min", "max", "points"}, key + ".");
  const auto points = get_field<std::size_t>(g, "points", 0);
  if (points < 2) throw ConfigError("invalid value for field: " + key + ".points (needs >= 2)");
  return linspace(get_field(g, "min", 0.0), get_field(g, "max", 0.0), points);
}

double khz(double v) { return kTwoPi * 1e3 * v; }

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void log(const CommonOptions& o, const std::string& line) {
  if (o.verbose) std::cerr << line << '\n';
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Fringe configs

// Waveform entry in a fringe config: a path (relative to the config file),
// "ideal", or {"gaussian": {...}}.
std::optional<PulseWaveform> resolve_waveform(const json& spec, PulseRole role, int order,
                                              const fs::path& base, const std::string& key) {
  if (spec.is_string()) {
    const auto text = spec.get<std::string>();
    if (text == "ideal") return std::nullopt;
    const fs::path p = fs::path(text).is_absolute() ? fs::path(text) : base / text;
    PulseWaveform w = load_waveform(p.string());
    if (w.order != order)
      throw ConfigError("waveform " + text + " is for order " + std::to_string(w.order) +
                        ", config order is " + std::to_string(order));
    return w;
  }
  if (spec.is_object() && spec.contains("gaussian")) {
    reject_unknown(spec, {"gaussian"}, key + ".");
    const json& g = spec.at("gaussian");
    reject_unknown(g, {"peak_khz", "omega_max_khz", "sigma_tau_us", "segments", "dt_us"},
                   key + ".gaussian.");
    OptimizationConfig c = role == PulseRole::beamsplitter ? OptimizationConfig::beamsplitter_defaults()
                                                           : OptimizationConfig::mirror_defaults();
    c.order = order;
    c.gaussian_sigma_tau = 1e-6 * get_field(g, "sigma_tau_us", c.gaussian_sigma_tau * 1e6);
    c.gaussian_segments = get_field(g, "segments", c.gaussian_segments);
    c.dt = 1e-6 * get_field(g, "dt_us", c.dt * 1e6);
    c.omega_max = khz(get_field(g, "omega_max_khz", c.omega_max / khz(1.0)));
    if (g.contains("peak_khz")) {
      const double peak = khz(get_field(g, "peak_khz", 0.0));
      if (!(peak > 0.0)) throw ConfigError("invalid value for field: " + key + ".gaussian.peak_khz");
      PulseWaveform w = gaussian_pulse(peak, c.gaussian_sigma_tau,
                                       c.dt * static_cast<double>(c.gaussian_segments), c.dt);
      w.role = role;
      w.order = order;
      w.omega_max = std::max(peak, c.omega_max);
      return w;
    }
    return calibrate_gaussian(c);
  }
  throw ConfigError("invalid value for field: " + key +
                    " (expected a waveform path, \"ideal\" or {\"gaussian\": {...}})");
}

struct Family {
  std::string name;
  std::optional<PulseWaveform> beamsplitter;
  std::optional<PulseWaveform> mirror;
};

struct FringeConfig {
  std::string scan;
  int order = 3;
  std::vector<Family> families;
  std::vector<double> times;  // s
  double acceleration = 0.0;
  double chirp_rate = 0.0;
  double readout_phase = 0.0;
  bool align_readout = false;
  double gravity = 9.79674;
  std::vector<double> chirp_grid;
  std::vector<double> acceleration_grid;
  int phase_points = 33;
  std::vector<double> sigma_beta{0.0};
  int shots = 1;
  std::uint64_t seed = 1;
  SourceDistribution source;
  double delta_p = 0.0;
  std::optional<BlochBasis> basis;
};

FringeConfig parse_fringe_config(const std::string& text, const fs::path& base) {
  const json doc = parse_json(text, "config");
  if (!doc.is_object()) throw ParseError("config must be a JSON object");
  reject_unknown(doc,
                 {"scan", "order", "families", "beamsplitter", "mirror", "T_ms",
                  "acceleration_m_s2", "acceleration_ug", "chirp_mhz_per_s", "readout_phase_rad",
                  "align_readout", "gravity_m_s2", "phase_points", "sigma_beta", "shots", "seed",
                  "source", "delta_p_hbar_k", "basis", "comment"},
                 "");
  if (!doc.contains("scan")) throw ConfigError("missing field: scan");
  FringeConfig c;
  c.scan = get_field<std::string>(doc, "scan", "");
  if (c.scan != "phase" && c.scan != "chirp" && c.scan != "acceleration")
    throw ConfigError("unknown scan type: " + c.scan + " (expected phase, chirp or acceleration)");
  c.order = get_field(doc, "order", c.order);
  if (c.order < 1) throw ConfigError("invalid value for field: order");

  if (!doc.contains("T_ms")) throw ConfigError("missing field: T_ms");
  for (double t : number_list(doc, "T_ms", {})) c.times.push_back(1e-3 * t);
  if (c.times.empty()) throw ConfigError("invalid value for field: T_ms");

  c.gravity = get_field(doc, "gravity_m_s2", c.gravity);
  c.readout_phase = get_field(doc, "readout_phase_rad", c.readout_phase);
  c.align_readout = get_field(doc, "align_readout", c.scan == "chirp");
  c.phase_points = get_field(doc, "phase_points", c.phase_points);
  c.sigma_beta = number_list(doc, "sigma_beta", c.sigma_beta);
  c.shots = get_field(doc, "shots", c.shots);
  c.seed = get_field(doc, "seed", c.seed);
  c.delta_p = get_field(doc, "delta_p_hbar_k", c.delta_p);
  if (c.sigma_beta.empty()) throw ConfigError("invalid value for field: sigma_beta");
  for (double s : c.sigma_beta)
    if (!(s >= 0.0)) throw ConfigError("invalid value for field: sigma_beta (must be >= 0)");

  if (c.scan == "chirp") {
    if (doc.contains("acceleration_m_s2") || doc.contains("acceleration_ug"))
      throw ConfigError("chirp scans run at a = -gravity_m_s2; remove the acceleration field");
    c.chirp_grid = grid_field(doc, "chirp_mhz_per_s");
    for (double& a : c.chirp_grid) a *= kTwoPi * 1e6;
  } else {
    if (doc.contains("chirp_mhz_per_s"))
      c.chirp_rate = kTwoPi * 1e6 * get_field(doc, "chirp_mhz_per_s", 0.0);
    if (c.scan == "acceleration") {
      if (doc.contains("acceleration_m_s2"))
        throw ConfigError("acceleration scans take acceleration_ug {min, max, points}");
      c.acceleration_grid = grid_field(doc, "acceleration_ug");
      for (double& a : c.acceleration_grid) a *= 1e-6 * kStandardGravity;
    } else {
      if (doc.contains("acceleration_ug"))
        c.acceleration = 1e-6 * kStandardGravity * get_field(doc, "acceleration_ug", 0.0);
      c.acceleration = get_field(doc, "acceleration_m_s2", c.acceleration);
    }
  }

  if (doc.contains("source")) {
    const json& s = doc.at("source");
    if (!s.is_object()) throw ConfigError("invalid value for field: source");
    reject_unknown(s, {"sigma_p_hbar_k", "nodes"}, "source.");
    c.source.sigma_p = get_field(s, "sigma_p_hbar_k", c.source.sigma_p);
    c.source.nodes = get_field(s, "nodes", c.source.nodes);
  }
  if (doc.contains("basis")) {
    const json& b = doc.at("basis");
    if (!b.is_object() || !b.contains("m_min") || !b.contains("m_max"))
      throw ConfigError("invalid value for field: basis (needs m_min and m_max)");
    reject_unknown(b, {"m_min", "m_max"}, "basis.");
    c.basis = BlochBasis(c.order, get_field(b, "m_min", 0), get_field(b, "m_max", 0));
  }

  auto family_from = [&](const json& f, const std::string& name, const std::string& prefix) {
    if (!f.contains("beamsplitter")) throw ConfigError("missing field: " + prefix + "beamsplitter");
    if (!f.contains("mirror")) throw ConfigError("missing field: " + prefix + "mirror");
    Family fam;
    fam.name = name;
    fam.beamsplitter = resolve_waveform(f.at("beamsplitter"), PulseRole::beamsplitter, c.order, base,
                                        prefix + "beamsplitter");
    fam.mirror = resolve_waveform(f.at("mirror"), PulseRole::mirror, c.order, base, prefix + "mirror");
    return fam;
  };
  if (doc.contains("families")) {
    if (doc.contains("beamsplitter") || doc.contains("mirror"))
      throw ConfigError("give either families or beamsplitter/mirror, not both");
    const json& list = doc.at("families");
    if (!list.is_array() || list.empty()) throw ConfigError("invalid value for field: families");
    std::set<std::string> names;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const json& f = list[i];
      const std::string prefix = "families[" + std::to_string(i) + "].";
      if (!f.is_object()) throw ConfigError("invalid value for field: " + prefix.substr(0, prefix.size() - 1));
      reject_unknown(f, {"name", "beamsplitter", "mirror"}, prefix);
      const auto name = get_field<std::string>(f, "name", "family" + std::to_string(i));
      if (name.empty() || name.find_first_of("/\\ ") != std::string::npos || !names.insert(name).second)
        throw ConfigError("invalid value for field: " + prefix + "name (must be unique, no spaces or slashes)");
      c.families.push_back(family_from(f, name, prefix));
    }
  } else {
    c.families.push_back(family_from(doc, "default", ""));
  }
  return c;
}

InterferometerSequence template_for(const FringeConfig& c, const Family& f, double t) {
  InterferometerSequence s;
  s.beamsplitter = f.beamsplitter;
  s.mirror = f.mirror;
  s.order = c.order;
  s.interrogation_time = t;
  s.acceleration = c.acceleration;
  s.chirp_rate = c.chirp_rate;
  s.readout_phase = c.readout_phase;
  s.delta_p = c.delta_p;
  s.validate();
  return s;
}

std::string time_label(double t) { return "T" + fmt(t * 1e3) + "ms"; }

void write_fringe(OutputSet& out, const std::string& stem, const FringeDataset& d,
                  const SinusoidFit& fit, json& index) {
  out.write(stem + ".csv", fringe_csv(d));
  out.write(stem + ".json", d.metadata.dump(2) + "\n");
  out.write(stem + ".fit.json", fit_json(fit));
  const Measurement v = visibility(fit, d.quantity);
  index.push_back({{"fringe", stem},
                   {"visibility", v.value},
                   {"visibility_error", v.error},
                   {"phase_rad", fit.phase},
                   {"phase_error_rad", fit.phase_error}});
}

// Replaces non-finite numbers by null so the summary stays valid JSON.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

// ---------------------------------------------------------------------------

std::string manifest_json(const RunManifest& m, const std::string& out_dir) {
  json files = json::array();
  for (const auto& name : m.outputs) {
    const fs::path p = fs::path(out_dir) / name;
    files.push_back({{"path", name}, {"sha256", sha256_hex(read_file(p.string()))}});
  }
  json doc = {{"command", m.command},
              {"config_sha256", m.config_sha256},
              {"seed", m.seed},
              {"version", m.version},
              {"outputs", files},
              {"details", m.details},
              {"threads", thread_count()},
              {"wall_clock_s", m.wall_clock_s},
              {"timestamp_utc", utc_timestamp()}};
  return doc.dump(2) + "\n";
}

namespace {

RunManifest finish(RunManifest m, const OutputSet& out, std::chrono::steady_clock::time_point start) {
  m.outputs = out.names();
  m.wall_clock_s = seconds_since(start);
  write_file(out.dir() / "manifest.json", manifest_json(m, out.dir().string()));
  m.outputs.push_back("manifest.json");
  return m;
}

}  // namespace

RunManifest cmd_optimize(const std::string& config_path, const std::string& out_dir,
                         const CommonOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const std::string text = read_file(config_path);
  OptimizationConfig config = parse_optimization_config(text);
  if (options.seed) config.seed = *options.seed;
  OutputSet out(prepare_out_dir(out_dir));
  log(options, "optimizing " + to_string(config.role) + ": " + std::to_string(config.segments) +
                   " segments, " + std::to_string(config.iterations) + " iterations, seed " +
                   std::to_string(config.seed));

  const OptimizationResult result = optimize_pulse(config);
  out.write("waveform.json", serialize(result.waveform));
  out.write("waveform.csv", to_csv(result.waveform));
  out.write("trace.csv", trace_csv(result.trace));
  log(options, "best validation cost " + fmt(result.validation_cost) + " at iteration " +
                   std::to_string(result.trace.best_iteration));

  RunManifest m;
  m.command = "optimize";
  m.config_sha256 = sha256_hex(text);
  m.seed = config.seed;
  m.details = {{"role", to_string(config.role)},
               {"validation_cost", result.validation_cost},
               {"best_iteration", result.trace.best_iteration},
               {"iteration_wall_ms", result.trace.wall_ms}};
  return finish(std::move(m), out, start);
}

GridSpec parse_grid_spec(const std::string& text) {
  GridSpec spec;
  bool have_dp = false, have_beta = false;
  std::stringstream items(text);
  std::string item;
  auto fail = [&](const std::string& why) {
    throw ConfigError("invalid grid spec \"" + text + "\": " + why +
                      " (expected delta_p=lo:hi:n,beta=lo:hi:n)");
  };
  while (std::getline(items, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) fail("missing '='");
    const std::string name = item.substr(0, eq);
    std::stringstream parts(item.substr(eq + 1));
    std::string lo, hi, n;
    if (!std::getline(parts, lo, ':') || !std::getline(parts, hi, ':') || !std::getline(parts, n) ||
        n.find(':') != std::string::npos)
      fail("axis " + name + " needs lo:hi:n");
    GridAxis axis;
    try {
      std::size_t used = 0;
      axis.lo = std::stod(lo, &used);
      if (used != lo.size()) fail("bad number " + lo);
      axis.hi = std::stod(hi, &used);
      if (used != hi.size()) fail("bad number " + hi);
      const long long count = std::stoll(n, &used);
      if (used != n.size() || count < 1) fail("bad point count " + n);
      axis.points = static_cast<std::size_t>(count);
    } catch (const std::logic_error&) {
      fail("axis " + name + " is not numeric");
    }
    if (!(axis.hi >= axis.lo)) fail("axis " + name + " has hi < lo");
    if (axis.points == 1 && axis.hi != axis.lo) fail("axis " + name + " with one point needs lo == hi");
    if (name == "delta_p") {
      if (have_dp) fail("delta_p given twice");
      spec.delta_p = axis;
      have_dp = true;
    } else if (name == "beta") {
      if (have_beta) fail("beta given twice");
      spec.beta = axis;
      have_beta = true;
    } else {
      fail("unknown axis " + name);
    }
  }
  if (!have_dp || !have_beta) fail("both axes are required");
  return spec;
}

RunManifest cmd_landscape(const std::string& waveform_path, const std::string& grid_spec,
                          const std::string& out_dir, const CommonOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const GridSpec spec = parse_grid_spec(grid_spec);
  const std::string text = read_file(waveform_path);
  const PulseWaveform w = deserialize(text);
  OutputSet out(prepare_out_dir(out_dir));
  auto axis = [](const GridAxis& a) {
    return a.points == 1 ? std::vector<double>{a.lo} : linspace(a.lo, a.hi, a.points);
  };
  const std::vector<double> dp = axis(spec.delta_p);
  const std::vector<double> beta = axis(spec.beta);
  log(options, "landscape " + std::to_string(beta.size()) + " x " + std::to_string(dp.size()));
  const FidelityLandscape l = fidelity_landscape(w, dp, beta, BlochBasis::for_order(w.order),
                                                 AtomSpecies::rubidium87());
  out.write("landscape.csv", landscape_csv(l));
  json sidecar = {{"quantity", "transfer fidelity 0 -> n"},
                  {"rows", "beta"},
                  {"columns", "delta_p_hbar_k"},
                  {"grid", grid_spec},
                  {"waveform_sha256", sha256_hex(text)},
                  {"role", to_string(w.role)},
                  {"order", w.order}};
  if (dp.size() > 1 && beta.size() > 1) {
    sidecar["beta_width_90"] = beta_contour_width(l);
    sidecar["delta_p_width_90"] = delta_p_contour_width(l);
  }
  out.write("landscape.json", sidecar.dump(2) + "\n");

  RunManifest m;
  m.command = "landscape";
  m.config_sha256 = sha256_hex(text + "\n" + grid_spec);
  return finish(std::move(m), out, start);
}

RunManifest cmd_fringe(const std::string& config_path, const std::string& out_dir,
                       const CommonOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const std::string text = read_file(config_path);
  FringeConfig c = parse_fringe_config(text, fs::path(config_path).parent_path());
  if (options.seed) c.seed = *options.seed;
  OutputSet out(prepare_out_dir(out_dir));
  const AtomSpecies species = AtomSpecies::rubidium87();
  const BlochBasis basis = c.basis ? *c.basis : BlochBasis::for_order(c.order);
  const std::vector<double> phases = phase_grid(c.phase_points);
  const double order = static_cast<double>(c.order);

  json summary = {{"scan", c.scan}, {"order", c.order}, {"families", json::array()}};
  std::uint64_t stream = 0;  // one noise stream per (family, T, sigma_beta)
  for (const Family& fam : c.families) {
    json fam_summary = {{"name", fam.name}, {"fringes", json::array()}};
    if (c.scan == "chirp") {
      InterferometerSequence tmpl = template_for(c, fam, c.times.front());
      if (c.align_readout) {
        tmpl.readout_phase = aligned_readout_phase(tmpl, c.source, basis, species);
        log(options, fam.name + ": aligned readout phase " + fmt(tmpl.readout_phase));
      }
      const auto fringes = chirp_scan(tmpl, c.chirp_grid, c.gravity, c.times, c.source, basis, species);
      std::vector<SinusoidFit> fits;
      for (std::size_t i = 0; i < fringes.size(); ++i) {
        const SinusoidFit fit = fit_sinusoid(fringes[i], std::nullopt, true);
        write_fringe(out, fam.name + "_chirp_" + time_label(c.times[i]), fringes[i], fit,
                     fam_summary["fringes"]);
      }
      const CentralFringe centre = find_central_fringe(fringes, c.times, species.wavenumber());
      fam_summary["readout_phase_rad"] = tmpl.readout_phase;
      fam_summary["central_fringe"] = {{"alpha_star_rad_s2", centre.alpha_star},
                                       {"alpha_star_mhz_per_s", centre.alpha_star / (kTwoPi * 1e6)},
                                       {"alpha_error_rad_s2", centre.alpha_error},
                                       {"alpha_spread_rad_s2", centre.alpha_spread},
                                       {"gravity_m_s2", centre.gravity},
                                       {"gravity_error_m_s2", centre.gravity_error},
                                       {"gravity_spread_m_s2", centre.gravity_spread},
                                       {"selected_rad_s2", centre.selected}};
      log(options, fam.name + ": g = " + fmt(centre.gravity, 9) + " m/s^2");
    } else {
      for (double t : c.times) {
        for (double sb : c.sigma_beta) {
          const InterferometerSequence tmpl = template_for(c, fam, t);
          const ScanNoise noise{sb, derive_seed(c.seed, stream++), c.shots};
          const std::string stem = fam.name + "_" + c.scan + "_" + time_label(t) + "_sb" + fmt(sb);
          log(options, stem);
          if (c.scan == "phase") {
            const FringeDataset d = phase_scan(tmpl, phases, noise, c.source, basis, species);
            write_fringe(out, stem, d, fit_sinusoid(d, order, false), fam_summary["fringes"]);
            continue;
          }
          const AccelerationScan scan =
              acceleration_scan(tmpl, c.acceleration_grid, phases, noise, c.source, basis, species);
          for (std::size_t i = 0; i < scan.fringes.size(); ++i) {
            const double ug = scan.acceleration[i] / (1e-6 * kStandardGravity);
            write_fringe(out, stem + "_a" + fmt(ug) + "ug", scan.fringes[i], scan.fits[i],
                         fam_summary["fringes"]);
          }
          const LineFit line = extract_scale_factor(scan.acceleration, scan.phase, scan.phase_error);
          const double expected = 2.0 * order * species.wavenumber() * t * t;
          json sf = {{"T_s", t},
                     {"sigma_beta", sb},
                     {"acceleration_m_s2", scan.acceleration},
                     {"phase_rad", scan.phase},
                     {"phase_error_rad", scan.phase_error},
                     {"slope_rad_per_m_s2", line.slope},
                     {"slope_error", line.slope_error},
                     {"expected_slope", -expected},
                     {"relative_deviation", finite_or_null(std::abs(line.slope) / expected - 1.0)}};
          fam_summary["scale_factors"].push_back(sf);
        }
      }
    }
    summary["families"].push_back(fam_summary);
  }
  out.write("summary.json", summary.dump(2) + "\n");

  RunManifest m;
  m.command = "fringe";
  m.config_sha256 = sha256_hex(text);
  m.seed = c.seed;
  return finish(std::move(m), out, start);
}

RunManifest cmd_fit(const std::string& data_path, const std::string& out_dir, const FitOptions& fit,
                    const CommonOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const std::string text = read_file(data_path);
  const FringeDataset d = parse_fringe_csv(text);
  if (const auto v = dataset_violations(d); !v.empty()) throw ConfigError("fringe data: " + v.front());
  if (fit.frequency && !(*fit.frequency > 0.0)) throw ConfigError("--frequency must be positive");
  OutputSet out(prepare_out_dir(out_dir));
  const SinusoidFit f = fit_sinusoid(d, fit.frequency, fit.linear_trend);
  log(options, "phase " + fmt(f.phase) + " +- " + fmt(f.phase_error) + " rad");
  const std::string stem = fs::path(data_path).stem().string();
  out.write(stem + ".fit.json", fit_json(f));

  RunManifest m;
  m.command = "fit";
  std::string settings = fit.frequency ? fmt(*fit.frequency, 17) : std::string("free");
  settings += fit.linear_trend ? " trend" : " no-trend";
  m.config_sha256 = sha256_hex(text + "\n" + settings);
  return finish(std::move(m), out, start);
}

json cmd_validate(const std::optional<std::string>& config_path,
                  const std::optional<std::string>& waveform_path) {
  if (!config_path && !waveform_path) throw ConfigError("validate needs --config and/or --waveform");
  json report = {{"valid", true}, {"problems", json::array()}};
  auto problem = [&](const std::string& what) {
    report["valid"] = false;
    report["problems"].push_back(what);
  };
  if (config_path) {
    const std::string text = read_file(*config_path);
    const json doc = parse_json(text, "config");
    try {
      if (doc.is_object() && doc.contains("scan")) {
        report["config_kind"] = "fringe";
        const FringeConfig c = parse_fringe_config(text, fs::path(*config_path).parent_path());
        for (const Family& f : c.families)
          for (double t : c.times)
            for (const auto& w : template_for(c, f, t).warnings()) report["warnings"].push_back(w);
      } else {
        report["config_kind"] = "optimization";
        parse_optimization_config(text);
      }
    } catch (const ConfigError& e) {
      problem(std::string("config: ") + e.what());
    }
  }
  if (waveform_path) {
    const std::string text = read_file(*waveform_path);
    try {
      const PulseWaveform w = deserialize(text);
      report["waveform"] = {{"role", to_string(w.role)},
                            {"order", w.order},
                            {"segments", w.size()},
                            {"sha256", sha256_hex(text)}};
      for (const auto& v : invariant_violations(w)) problem("waveform: " + v);
      if (w.filter_cutoff > 0.0 && w.size() > 1) {
        const QuadratureControls q = to_quadratures(w);
        double worst = 0.0;
        for (const auto* ch : {&q.r, &q.i})
          worst = std::max(worst, stopband_level(*ch, w.dt, 1.25 * w.filter_cutoff));
        const double db = worst > 0.0 ? 20.0 * std::log10(worst) : -400.0;
        report["waveform"]["stopband_db"] = db;
        if (db > -60.0) problem("waveform: stopband level " + fmt(db, 4) + " dB above -60 dB");
      }
    } catch (const ConfigError& e) {
      problem(std::string("waveform: ") + e.what());
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"Robust Bragg pulse design and interferometer simulation", "bragg-forge"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool verbose = false;
  app.add_option("--seed", seed, "Override the config seed")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", threads, "Worker threads (default $BRAGG_FORGE_THREADS, else 1)")
      ->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", verbose, "Progress on stderr");

  std::string config, out, waveform, grid, data;
  std::optional<double> frequency;
  bool trend = false;

  auto* optimize = app.add_subcommand("optimize", "Design a robust pulse");
  optimize->add_option("--config", config, "Optimization config (JSON)")->required();
  optimize->add_option("--out", out, "Output directory")->required();

  auto* landscape = app.add_subcommand("landscape", "Transfer fidelity over (delta_p, beta)");
  landscape->add_option("--waveform", waveform, "Waveform file")->required();
  landscape->add_option("--grid", grid, "delta_p=lo:hi:n,beta=lo:hi:n")
      ->default_val("delta_p=-0.5:0.5:41,beta=-0.6:0.6:61");
  landscape->add_option("--out", out, "Output directory")->required();

  auto* fringe = app.add_subcommand("fringe", "Simulate interferometer fringes and fit them");
  fringe->add_option("--config", config, "Fringe config (JSON)")->required();
  fringe->add_option("--out", out, "Output directory")->required();

  auto* fit = app.add_subcommand("fit", "Fit a sinusoid to a fringe CSV");
  fit->add_option("--data", data, "Fringe CSV")->required();
  fit->add_option("--frequency", frequency, "Fixed fringe frequency (rad per scan unit)");
  fit->add_flag("--trend", trend, "Include a linear trend");
  fit->add_option("--out", out, "Output directory")->required();

  auto* validate = app.add_subcommand("validate", "Check a config and/or a waveform");
  std::optional<std::string> v_config, v_waveform;
  validate->add_option("--config", v_config, "Optimization or fringe config");
  validate->add_option("--waveform", v_waveform, "Waveform file");
  validate->add_option("--out", out, "Also write the report into this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  if (threads > 0) set_thread_count(threads);
  const CommonOptions common{seed, verbose};
  try {
    RunManifest m;
    if (*optimize) {
      m = cmd_optimize(config, out, common);
    } else if (*landscape) {
      m = cmd_landscape(waveform, grid, out, common);
    } else if (*fringe) {
      m = cmd_fringe(config, out, common);
    } else if (*fit) {
      m = cmd_fit(data, out, FitOptions{frequency, trend}, common);
    } else {
      const json report = cmd_validate(v_config, v_waveform);
      std::cout << report.dump(2) << '\n';
      if (!out.empty()) {
        const auto start = std::chrono::steady_clock::now();
        OutputSet set(prepare_out_dir(out));
        set.write("validation.json", report.dump(2) + "\n");
        RunManifest vm;
        vm.command = "validate";
        vm.config_sha256 = sha256_hex((v_config ? read_file(*v_config) : "") + "\n" +
                                      (v_waveform ? read_file(*v_waveform) : ""));
        finish(std::move(vm), set, start);
      }
      return report["valid"].get<bool>() ? kOk : kConfigFailure;
    }
    if (verbose)
      for (const auto& name : m.outputs) std::cerr << "wrote " << (fs::path(out) / name).string() << '\n';
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const IoError& e) {
    std::cerr << "I/O failure: " << e.what() << '\n';
    return kIoFailure;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace bragg::cli
