#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bragg::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfigFailure = 2,
  kNumericalFailure = 3,
  kIoFailure = 4,
};

struct RunManifest {
  std::string command;
  std::string config_sha256;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::vector<std::string> outputs;  // relative to the output directory
  double wall_clock_s = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

/// Manifest JSON; the timestamp and wall-clock fields are the only parts
/// that change between identical runs.
std::string manifest_json(const RunManifest& manifest, const std::string& out_dir);

struct CommonOptions {
  std::optional<std::uint64_t> seed;  // overrides the config seed
  bool verbose = false;
};

RunManifest cmd_optimize(const std::string& config_path, const std::string& out_dir,
                         const CommonOptions& options);

/// Grid spec "delta_p=lo:hi:n,beta=lo:hi:n" (either order).
RunManifest cmd_landscape(const std::string& waveform_path, const std::string& grid_spec,
                          const std::string& out_dir, const CommonOptions& options);

RunManifest cmd_fringe(const std::string& config_path, const std::string& out_dir,
                       const CommonOptions& options);

struct FitOptions {
  std::optional<double> frequency;  // fixed fringe frequency, rad per scan unit
  bool linear_trend = false;
};
RunManifest cmd_fit(const std::string& data_path, const std::string& out_dir,
                    const FitOptions& fit, const CommonOptions& options);

/// Checks a config (optimization or fringe) and/or a waveform file. The
/// report lists every problem; `valid` is false when any were found.
nlohmann::json cmd_validate(const std::optional<std::string>& config_path,
                            const std::optional<std::string>& waveform_path);

struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t points = 0;
};
struct GridSpec {
  GridAxis delta_p;
  GridAxis beta;
};
GridSpec parse_grid_spec(const std::string& text);

/// Full command line; returns the process exit code.
int run(int argc, char** argv);

}  // namespace bragg::cli
