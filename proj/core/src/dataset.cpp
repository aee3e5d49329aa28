#include "sichainfl/dataset.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace sichainfl {

std::size_t LabeledDataset::positive_count() const {
  return static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

double LabeledDataset::positive_rate() const {
  if (labels.empty()) return 0.0;
  return static_cast<double>(positive_count()) / static_cast<double>(labels.size());
}

void LabeledDataset::validate() const {
  if (features.size() != labels.size())
    throw std::invalid_argument("dataset: feature/label count mismatch");
  if (features.empty()) throw std::invalid_argument("dataset: empty");
  const std::size_t d = features.front().size();
  for (const auto& row : features) {
    if (row.size() != d) throw std::invalid_argument("dataset: ragged feature rows");
    if (!all_finite(row)) throw std::invalid_argument("dataset: non-finite feature");
  }
  for (auto y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("dataset: label not in {0,1}");
  }
}

std::size_t ScenarioSet::total_size() const {
  std::size_t n = 0;
  for (const auto& s : scenarios) n += s.size();
  return n;
}

void ScenarioSet::validate() const {
  if (scenarios.empty()) throw std::invalid_argument("scenario set: empty");
  if (pi.size() != scenarios.size() || omega.size() != scenarios.size())
    throw std::invalid_argument("scenario set: pi/omega length mismatch");
  double wsum = std::accumulate(omega.begin(), omega.end(), 0.0);
  if (std::abs(wsum - 1.0) > 1e-12)
    throw std::invalid_argument("scenario set: omega does not sum to 1");
  for (std::size_t r = 0; r < scenarios.size(); ++r) {
    if (pi[r] <= 0.0 || pi[r] >= 1.0)
      throw std::invalid_argument("scenario set: pi outside (0,1)");
  }
}

const char* to_string(BehaviorKind kind) {
  switch (kind) {
    case BehaviorKind::honest_high: return "honest_high";
    case BehaviorKind::honest_low: return "honest_low";
    case BehaviorKind::free_rider: return "free_rider";
    case BehaviorKind::poisoner: return "poisoner";
  }
  return "unknown";
}

BehaviorKind behavior_from_string(const std::string& s) {
  if (s == "honest_high") return BehaviorKind::honest_high;
  if (s == "honest_low") return BehaviorKind::honest_low;
  if (s == "free_rider") return BehaviorKind::free_rider;
  if (s == "poisoner") return BehaviorKind::poisoner;
  throw std::invalid_argument("unknown behavior kind: " + s);
}

void write_csv(const LabeledDataset& ds, std::ostream& out) {
  const int d = ds.feature_dim();
  for (int j = 0; j < d; ++j) out << 'f' << j << ',';
  out << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < d; ++j) out << format_double(ds.features[i][j]) << ',';
    out << int(ds.labels[i]) << '\n';
  }
}

void write_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  write_csv(ds, out);
}

LabeledDataset read_csv(std::istream& in) {
  LabeledDataset ds;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: missing header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Vec row;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2) throw std::runtime_error("csv: short row");
    for (std::size_t j = 0; j + 1 < cells.size(); ++j)
      row.push_back(std::strtod(cells[j].c_str(), nullptr));
    const int y = std::atoi(cells.back().c_str());
    if (y != 0 && y != 1) throw std::runtime_error("csv: label not in {0,1}");
    ds.features.push_back(std::move(row));
    ds.labels.push_back(static_cast<std::uint8_t>(y));
  }
  ds.validate();
  return ds;
}

LabeledDataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path.string());
  return read_csv(in);
}

}  // namespace sichainfl
