#include "bragg/fringe.hpp"

#include <cmath>
#include <sstream>

#include "bragg/core.hpp"

namespace bragg {

std::vector<std::string> dataset_violations(const FringeDataset& d) {
  std::vector<std::string> out;
  if (d.values.size() != d.scan_values.size()) out.push_back("values and scan values differ in length");
  if (!d.shot_sigma.empty() && d.shot_sigma.size() != d.scan_values.size())
    out.push_back("shot_sigma length differs from the scan");
  const double lo = d.quantity == FringeQuantity::asymmetry ? -1.0 : 0.0;
  const double tol = 1e-9;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    if (!std::isfinite(d.values[i]) || d.values[i] < lo - tol || d.values[i] > 1.0 + tol)
      out.push_back("point " + std::to_string(i) + " is outside the allowed range");
  }
  for (double s : d.shot_sigma)
    if (!(s >= 0.0)) out.push_back("negative or non-finite shot_sigma");
  return out;
}

std::string fringe_csv(const FringeDataset& d) {
  std::ostringstream os;
  os << "scan_value," << (d.quantity == FringeQuantity::asymmetry ? "asymmetry" : "fraction")
     << ",shot_sigma\n";
  os.precision(17);
  for (std::size_t i = 0; i < d.size(); ++i)
    os << d.scan_values[i] << ',' << d.values[i] << ',' << (d.shot_sigma.empty() ? 0.0 : d.shot_sigma[i])
       << '\n';
  return os.str();
}

FringeDataset parse_fringe_csv(const std::string& text, const std::string& scan_variable) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("fringe CSV is empty");
  FringeDataset d;
  d.scan_variable = scan_variable;
  if (line.find("fraction") != std::string::npos) d.quantity = FringeQuantity::fraction;
  else if (line.find("asymmetry") == std::string::npos)
    throw ParseError("fringe CSV header must be scan_value,asymmetry,shot_sigma");
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(row, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("fringe CSV line " + std::to_string(number) + ": not a number: " + cell);
      }
    }
    if (v.size() < 2) throw ParseError("fringe CSV line " + std::to_string(number) + ": too few columns");
    d.scan_values.push_back(v[0]);
    d.values.push_back(v[1]);
    d.shot_sigma.push_back(v.size() > 2 ? v[2] : 0.0);
  }
  return d;
}

}  // namespace bragg
