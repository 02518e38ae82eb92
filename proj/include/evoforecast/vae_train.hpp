#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evoforecast/frequency_tensor.hpp"
#include "evoforecast/vae_model.hpp"

namespace evo::vae {

/// All (focal SNP, replicate, start time) windows of a tensor. Only SNP rows
/// with a full neighbourhood, i.e. rows [w, S - w), are focal SNPs; rows are
/// assumed to be in chromosome order.
class WindowDataset {
  public:
    struct Window {
        std::size_t row;
        std::size_t replicate;
        std::size_t start;  // time index of the oldest input point
    };

    WindowDataset(const FrequencyTensor &f, std::size_t trajectory_length, std::size_t half_window);

    const FrequencyTensor &tensor() const { return *f_; }
    std::size_t trajectory_length() const { return b_; }
    std::size_t half_window() const { return w_; }
    const std::vector<Window> &windows() const { return windows_; }
    std::size_t size() const { return windows_.size(); }

    /// First and one-past-last focal row.
    std::size_t first_focal_row() const { return w_; }
    std::size_t last_focal_row() const { return f_->snps() - w_; }

    /// Batch over the given windows, sharing trajectory rows between windows.
    /// Neighbour rows are included when `with_neighbors`.
    Batch make_batch(std::span<const std::size_t> ids, bool with_neighbors, const Matrix &noise) const;

    WindowSample sample(std::size_t id) const;

  private:
    const FrequencyTensor *f_;
    std::size_t b_;
    std::size_t w_;
    std::vector<Window> windows_;
};

struct TrainConfig {
    double beta = 1e-4;
    double lr_phase1 = 1e-4;
    double lr_phase2 = 1e-5;
    int epochs_phase1 = 8000;
    int epochs_phase2 = 8000;
    std::size_t batch_size = 100;
    double finetune_fraction = 0.10;
    /// Windows of nearby focal SNPs (overlapping neighbourhoods) kept together
    /// when shuffling, so that a batch of the w variant shares most neighbour
    /// trajectories. 1 gives a plain window shuffle. Ignored by no_w.
    std::size_t neighbor_block = 10;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    unsigned threads = 1;  // > 1: data-parallel gradients, not bit-exact vs 1

    void validate() const;
};

struct EpochLog {
    int epoch;
    int phase;
    double total;
    double recon;
    double kld;
};

struct TrainResult {
    VaeParams params;
    std::vector<EpochLog> log;
};

/// Adaptive-moment optimiser over all parameter blocks.
class Adam {
  public:
    Adam(const VaeParams &shape, double beta1, double beta2, double epsilon);
    void step(VaeParams &params, const VaeParams &grad, double lr);

  private:
    VaeParams m_;
    VaeParams v_;
    double beta1_, beta2_, epsilon_;
    long t_ = 0;
};

/// SNP rows (among focal rows) in the top `fraction` by mean AFC between the
/// first and last time point, in ascending row order.
std::vector<std::size_t> top_afc_rows(const FrequencyTensor &f, std::size_t half_window, double fraction);

/// Two-phase training on every window of `training` (already restricted to
/// the training generations). Requires at least b + 1 time points.
TrainResult train(const FrequencyTensor &training, const Architecture &arch, const TrainConfig &config);

/// Runs phase training from existing params; used by train().
void train_phase(VaeParams &params, Adam &adam, const WindowDataset &data, std::span<const std::size_t> ids, int phase,
    int epochs, double lr, const TrainConfig &config, std::vector<EpochLog> &log);

/// CSV `epoch,phase,total_loss,recon,kld`.
std::string format_training_log(std::span<const EpochLog> log);

}  // namespace evo::vae
