// Client behavior strategies: honest training, free riding (stale-update
// replay) and label-flipping poisoning.
#pragma once

#include <cstdint>
#include <vector>

#include "sichainfl/dataset.hpp"
#include "sichainfl/model.hpp"

namespace sichainfl {

struct BehaviorParams {
  double flip_frac = 1.0;              // poisoner label-flip fraction, (0,1]
  double honest_low_label_noise = 0.2; // applied once to honest_low shards
};

struct ClientProfile {
  int id = -1;
  BehaviorKind kind = BehaviorKind::honest_high;
  LabeledDataset data;      // honest_low shards already carry label noise
  QualityRates rates;
  Vec feature_summary;      // unit-normalized mean feature vector
  BehaviorParams behavior;
};

struct TrainParams {
  double lr = 0.01;
  int epochs = 5;
  int batch_size = 32;
};

// Produces the client's wire upload for this round. Honest kinds and the
// poisoner train locally, clip to dp.clip_bound and add Gaussian noise when
// sigma > 0; the poisoner trains on freshly flipped labels. A free rider
// resubmits its previous upload verbatim (the zero vector in round 0).
UpdateDelta behave(const ClientProfile& profile, const ModelParams& base_model,
                   int round, const std::vector<UpdateDelta>& history,
                   const TrainParams& train, const DpConfig& dp,
                   std::uint64_t seed);

}  // namespace sichainfl
