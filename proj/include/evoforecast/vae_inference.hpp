#pragma once

#include <cstdint>
#include <vector>

#include "evoforecast/frequency_tensor.hpp"
#include "evoforecast/vae_model.hpp"

namespace evo::vae {

struct RolloutOptions {
    std::size_t steps = 9;
    std::size_t samples_per_replicate = 1;
    bool deterministic = false;  // z = mu
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Autoregressive forecast from the last b time points of `history`.
///
/// Every step predicts all focal SNPs of a replicate at once and shifts the
/// windows with the predictions, so neighbours advance with their own
/// forecasts. Edge SNPs without a full window are held at their last
/// observed value. The result holds the focal SNP rows only; replicate
/// index r * samples_per_replicate + k is rollout k of replicate r.
FrequencyTensor rollout(const VaeParams &params, const FrequencyTensor &history, const RolloutOptions &options);

struct SimilarityRow {
    std::size_t focal;     // chromosome SNP index
    std::size_t neighbor;  // chromosome SNP index
    double value;
};

/// Pre-softmax similarity of every focal SNP with each other SNP of its
/// window, averaged over replicates and over all windows of `training`.
/// Requires the w variant.
std::vector<SimilarityRow> extract_similarities(const VaeParams &params, const FrequencyTensor &training);

}  // namespace evo::vae
