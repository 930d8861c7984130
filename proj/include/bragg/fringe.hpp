#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bragg {

enum class FringeQuantity { asymmetry, fraction };

/// One fringe: a scanned variable and the measured P1 - P2 (or an arm
/// fraction) at each point, with optional per-point shot noise.
struct FringeDataset {
  std::string scan_variable;
  FringeQuantity quantity = FringeQuantity::asymmetry;
  std::vector<double> scan_values;
  std::vector<double> values;
  std::vector<double> shot_sigma;  // empty or one entry per point
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return scan_values.size(); }
};

/// Empty list when the dataset is well formed.
std::vector<std::string> dataset_violations(const FringeDataset& data);

/// Columns scan_value,asymmetry,shot_sigma (shot_sigma 0 when absent).
std::string fringe_csv(const FringeDataset& data);
FringeDataset parse_fringe_csv(const std::string& text, const std::string& scan_variable = "scan");

}  // namespace bragg
