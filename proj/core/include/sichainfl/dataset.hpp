// Labeled binary datasets, scenario splits and client quality descriptors.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "sichainfl/common.hpp"

namespace sichainfl {

struct LabeledDataset {
  std::vector<Vec> features;        // n rows of d features
  std::vector<std::uint8_t> labels; // 0/1, same length as features

  std::size_t size() const { return features.size(); }
  int feature_dim() const {
    return features.empty() ? 0 : static_cast<int>(features.front().size());
  }
  std::size_t positive_count() const;
  double positive_rate() const;
  void validate() const;
};

// R disjoint validation subsets with per-subset positive fractions pi and
// normalized scenario weights omega (sum 1).
struct ScenarioSet {
  std::vector<LabeledDataset> scenarios;
  Vec pi;
  Vec omega;

  std::size_t count() const { return scenarios.size(); }
  std::size_t total_size() const;
  void validate() const;
};

// Per-client miss/outlier/sync-error rates, each in [0,1].
struct QualityRates {
  double miss_rate = 0.0;
  double outlier_rate = 0.0;
  double sync_rate = 0.0;
};

enum class BehaviorKind { honest_high, honest_low, free_rider, poisoner };

const char* to_string(BehaviorKind kind);
BehaviorKind behavior_from_string(const std::string& s);

// CSV with header f0..f(d-1),label.
void write_csv(const LabeledDataset& ds, std::ostream& out);
void write_csv(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset read_csv(std::istream& in);
LabeledDataset read_csv(const std::filesystem::path& path);

}  // namespace sichainfl
