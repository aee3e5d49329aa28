#include "sichainfl/adversary.hpp"

#include <stdexcept>

#include "sichainfl/datagen.hpp"

namespace sichainfl {

namespace {

UpdateDelta train_clip_noise(const LabeledDataset& data, const ModelParams& base,
                             const TrainParams& train, const DpConfig& dp,
                             std::uint64_t seed, int client_id, int round) {
  UpdateDelta raw = local_train(base, data, train.lr, train.epochs,
                                derive_seed(seed, 0x7261u, client_id, round),
                                train.batch_size);
  raw.client_id = client_id;
  raw.round = round;
  UpdateDelta clipped = clip_update(raw, dp.clip_bound);
  const double sigma = dp.sigma();
  if (sigma > 0.0)
    return gaussianize(clipped, sigma, derive_seed(seed, 0x6e6fu, client_id, round));
  return clipped;
}

}  // namespace

UpdateDelta behave(const ClientProfile& profile, const ModelParams& base_model,
                   int round, const std::vector<UpdateDelta>& history,
                   const TrainParams& train, const DpConfig& dp,
                   std::uint64_t seed) {
  switch (profile.kind) {
    case BehaviorKind::honest_high:
    case BehaviorKind::honest_low:
      return train_clip_noise(profile.data, base_model, train, dp, seed,
                              profile.id, round);
    case BehaviorKind::poisoner: {
      if (profile.behavior.flip_frac <= 0.0 || profile.behavior.flip_frac > 1.0)
        throw std::invalid_argument("poisoner: flip_frac outside (0,1]");
      const LabeledDataset flipped =
          corrupt_labels(profile.data, profile.behavior.flip_frac,
                         derive_seed(seed, 0x666cu, profile.id, round));
      return train_clip_noise(flipped, base_model, train, dp, seed, profile.id, round);
    }
    case BehaviorKind::free_rider: {
      UpdateDelta out;
      if (history.empty()) {
        out.delta.assign(base_model.dim(), 0.0);
        out.clipped = true;  // zero vector is trivially within any bound
      } else {
        out = history.back();
      }
      out.client_id = profile.id;
      out.round = round;
      return out;
    }
  }
  throw std::logic_error("behave: unknown kind");
}

}  // namespace sichainfl
