#include "evoforecast/vae_train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "evoforecast/error.hpp"
#include "evoforecast/parallel.hpp"

namespace evo::vae {

WindowDataset::WindowDataset(const FrequencyTensor &f, std::size_t trajectory_length, std::size_t half_window)
    : f_(&f), b_(trajectory_length), w_(half_window) {
    if (b_ < 1) throw ParameterError("trajectory length b must be positive");
    if (f.times() < b_ + 1) {
        throw DataError("need at least b + 1 = " + std::to_string(b_ + 1) + " time points, tensor has " +
            std::to_string(f.times()));
    }
    if (f.snps() < 2 * w_ + 1) {
        throw DataError("need at least 2w + 1 = " + std::to_string(2 * w_ + 1) + " SNPs for one full window");
    }
    for (std::size_t r = 0; r < f.replicates(); ++r) {
        for (std::size_t t = 0; t + b_ < f.times(); ++t) {
            for (std::size_t i = first_focal_row(); i < last_focal_row(); ++i) windows_.push_back({i, r, t});
        }
    }
}

Batch WindowDataset::make_batch(std::span<const std::size_t> ids, bool with_neighbors, const Matrix &noise) const {
    const std::size_t P = 2 * w_ + 1;
    const std::size_t S = f_->snps();
    const std::size_t R = f_->replicates();
    auto key = [&](std::size_t row, std::size_t rep, std::size_t start) { return (start * R + rep) * S + row; };

    std::vector<std::size_t> keys;
    keys.reserve(ids.size() * (with_neighbors ? P : 1));
    for (auto id : ids) {
        const auto &win = windows_[id];
        if (with_neighbors) {
            for (std::size_t j = 0; j < P; ++j) keys.push_back(key(win.row - w_ + j, win.replicate, win.start));
        } else {
            keys.push_back(key(win.row, win.replicate, win.start));
        }
    }
    std::vector<std::size_t> unique = keys;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    auto slot = [&](std::size_t k) {
        return static_cast<std::size_t>(std::lower_bound(unique.begin(), unique.end(), k) - unique.begin());
    };

    Batch batch;
    batch.trajectories.resize(static_cast<Eigen::Index>(unique.size()), static_cast<Eigen::Index>(b_));
    for (std::size_t u = 0; u < unique.size(); ++u) {
        const std::size_t row = unique[u] % S;
        const std::size_t rep = (unique[u] / S) % R;
        const std::size_t start = unique[u] / (S * R);
        for (std::size_t t = 0; t < b_; ++t) {
            batch.trajectories(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(t)) = f_->at(start + t, row, rep);
        }
    }
    batch.targets.resize(static_cast<Eigen::Index>(ids.size()));
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const auto &win = windows_[ids[k]];
        batch.focal.push_back(slot(key(win.row, win.replicate, win.start)));
        if (with_neighbors) {
            for (std::size_t j = 0; j < P; ++j) batch.neighbors.push_back(slot(keys[k * P + j]));
        }
        batch.targets[static_cast<Eigen::Index>(k)] = f_->at(win.start + b_, win.row, win.replicate);
    }
    batch.noise = noise;
    return batch;
}

WindowSample WindowDataset::sample(std::size_t id) const {
    const auto &win = windows_.at(id);
    const std::size_t P = 2 * w_ + 1;
    WindowSample s;
    s.focal.resize(b_);
    s.neighbors.resize(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(b_));
    for (std::size_t t = 0; t < b_; ++t) {
        s.focal[t] = f_->at(win.start + t, win.row, win.replicate);
        for (std::size_t j = 0; j < P; ++j) {
            s.neighbors(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) =
                f_->at(win.start + t, win.row - w_ + j, win.replicate);
        }
    }
    s.target = f_->at(win.start + b_, win.row, win.replicate);
    s.snp_index = f_->snp_indices()[win.row];
    s.replicate = win.replicate;
    s.base_generation = f_->generations()[win.start];
    return s;
}

void TrainConfig::validate() const {
    if (!(beta >= 0.0)) throw ParameterError("beta must be non-negative");
    if (!(finetune_fraction > 0.0 && finetune_fraction <= 1.0)) throw ParameterError("finetune_fraction must lie in (0,1]");
    if (batch_size < 1) throw ParameterError("batch size must be positive");
    if (epochs_phase1 < 0 || epochs_phase2 < 0) throw ParameterError("epoch counts must be non-negative");
    if (!(lr_phase1 > 0.0) || !(lr_phase2 > 0.0)) throw ParameterError("learning rates must be positive");
    if (neighbor_block < 1) throw ParameterError("neighbor_block must be positive");
}

Adam::Adam(const VaeParams &shape, double beta1, double beta2, double epsilon)
    : m_(shape.zeros_like()), v_(shape.zeros_like()), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Adam::step(VaeParams &params, const VaeParams &grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto p = params.blocks();
    auto g = grad.blocks();
    auto m = m_.blocks();
    auto v = v_.blocks();
    for (std::size_t k = 0; k < p.size(); ++k) {
        for (std::size_t i = 0; i < p[k].size(); ++i) {
            m[k][i] = beta1_ * m[k][i] + (1.0 - beta1_) * g[k][i];
            v[k][i] = beta2_ * v[k][i] + (1.0 - beta2_) * g[k][i] * g[k][i];
            p[k][i] -= lr * (m[k][i] / c1) / (std::sqrt(v[k][i] / c2) + epsilon_);
        }
    }
}

std::vector<std::size_t> top_afc_rows(const FrequencyTensor &f, std::size_t half_window, double fraction) {
    if (f.times() < 2) throw DataError("AFC needs at least two time points");
    const std::size_t last = f.times() - 1;
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = half_window; i + half_window < f.snps(); ++i) {
        double afc = 0.0;
        for (std::size_t r = 0; r < f.replicates(); ++r) afc += std::abs(f.at(last, i, r) - f.at(0, i, r));
        ranked.emplace_back(afc / static_cast<double>(f.replicates()), i);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) { return a.first > b.first; });
    auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ranked.size()) - 1e-9));
    keep = std::clamp<std::size_t>(keep, ranked.empty() ? 0 : 1, ranked.size());
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < keep; ++k) rows.push_back(ranked[k].second);
    std::sort(rows.begin(), rows.end());
    return rows;
}

namespace {

// Groups window ids into blocks of up to `block` windows of one replicate and
// start time whose neighbourhoods overlap, i.e. focal rows at most 2w apart.
// The fine-tuning set is sparse along the chromosome, so plain adjacency would
// leave it in singleton blocks with no shared neighbour rows.
std::vector<std::vector<std::size_t>> make_blocks(
    const WindowDataset &data, std::span<const std::size_t> ids, std::size_t block) {
    std::vector<std::vector<std::size_t>> blocks;
    for (auto id : ids) {
        const auto &win = data.windows()[id];
        if (!blocks.empty() && blocks.back().size() < block) {
            const auto &prev = data.windows()[blocks.back().back()];
            if (prev.replicate == win.replicate && prev.start == win.start && win.row > prev.row &&
                win.row - prev.row <= 2 * data.half_window()) {
                blocks.back().push_back(id);
                continue;
            }
        }
        blocks.push_back({id});
    }
    return blocks;
}

}  // namespace

void train_phase(VaeParams &params, Adam &adam, const WindowDataset &data, std::span<const std::size_t> ids, int phase,
    int epochs, double lr, const TrainConfig &config, std::vector<EpochLog> &log) {
    if (ids.empty() || epochs == 0) return;
    const bool attend = params.variant == Variant::w;
    const auto blocks = make_blocks(data, ids, attend ? config.neighbor_block : 1);
    const auto M = static_cast<Eigen::Index>(params.latent_dim());
    std::vector<std::size_t> order(blocks.size());
    std::normal_distribution<double> normal(0.0, 1.0);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng shuffle_rng = make_rng(config.seed, {stream::kShuffle, static_cast<std::uint64_t>(phase), static_cast<std::uint64_t>(epoch)});
        Rng eps_rng = make_rng(config.seed, {stream::kEpsilon, static_cast<std::uint64_t>(phase), static_cast<std::uint64_t>(epoch)});
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        std::vector<std::size_t> flat;
        flat.reserve(ids.size());
        for (auto b : order) flat.insert(flat.end(), blocks[b].begin(), blocks[b].end());

        LossParts sum;
        for (std::size_t start = 0; start < flat.size(); start += config.batch_size) {
            const std::size_t n = std::min(config.batch_size, flat.size() - start);
            std::span<const std::size_t> batch_ids(flat.data() + start, n);
            Matrix noise(static_cast<Eigen::Index>(n), M);
            for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(eps_rng);

            VaeParams grad = params.zeros_like();
            LossParts parts;
            const unsigned chunks = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, config.threads), n));
            if (chunks <= 1) {
                parts = loss_and_gradients(params, data.make_batch(batch_ids, attend, noise), config.beta, grad);
            } else {
                // each chunk computes its own mean; recombine in fixed order weighted by size
                std::vector<VaeParams> grads(chunks, grad);
                std::vector<LossParts> chunk_parts(chunks);
                std::vector<std::size_t> bounds(chunks + 1);
                for (unsigned c = 0; c <= chunks; ++c) bounds[c] = n * c / chunks;
                parallel_for(chunks, chunks, [&](std::size_t c) {
                    const std::size_t lo = bounds[c], hi = bounds[c + 1];
                    Matrix sub = noise.middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo));
                    chunk_parts[c] = loss_and_gradients(
                        params, data.make_batch(batch_ids.subspan(lo, hi - lo), attend, sub), config.beta, grads[c]);
                });
                auto total = grad.blocks();
                for (unsigned c = 0; c < chunks; ++c) {
                    const double weight = static_cast<double>(bounds[c + 1] - bounds[c]) / static_cast<double>(n);
                    auto g = grads[c].blocks();
                    for (std::size_t k = 0; k < total.size(); ++k) {
                        for (std::size_t i = 0; i < total[k].size(); ++i) total[k][i] += weight * g[k][i];
                    }
                    parts.total += weight * chunk_parts[c].total;
                    parts.recon += weight * chunk_parts[c].recon;
                    parts.kld += weight * chunk_parts[c].kld;
                }
            }
            adam.step(params, grad, lr);
            const double w = static_cast<double>(n);
            sum.total += w * parts.total;
            sum.recon += w * parts.recon;
            sum.kld += w * parts.kld;
        }
        const double count = static_cast<double>(flat.size());
        log.push_back({epoch, phase, sum.total / count, sum.recon / count, sum.kld / count});
        for (double v : {sum.total, sum.recon, sum.kld}) {
            if (!std::isfinite(v)) throw DataError("training diverged: non-finite loss in phase " + std::to_string(phase));
        }
    }
}

TrainResult train(const FrequencyTensor &training, const Architecture &arch, const TrainConfig &config) {
    config.validate();
    WindowDataset data(training, arch.trajectory_length, arch.half_window);

    Rng init_rng = make_rng(config.seed, {stream::kInit});
    TrainResult result{init_params(arch, init_rng), {}};
    Adam adam(result.params, config.adam_beta1, config.adam_beta2, config.adam_epsilon);

    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    train_phase(result.params, adam, data, all, 1, config.epochs_phase1, config.lr_phase1, config, result.log);

    const auto rows = top_afc_rows(training, arch.half_window, config.finetune_fraction);
    std::vector<char> selected(training.snps(), 0);
    for (auto r : rows) selected[r] = 1;
    std::vector<std::size_t> finetune;
    for (std::size_t id = 0; id < data.size(); ++id) {
        if (selected[data.windows()[id].row]) finetune.push_back(id);
    }
    train_phase(result.params, adam, data, finetune, 2, config.epochs_phase2, config.lr_phase2, config, result.log);
    return result;
}

std::string format_training_log(std::span<const EpochLog> log) {
    std::string out = "epoch,phase,total_loss,recon,kld\n";
    char buf[128];
    for (const auto &e : log) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.10g,%.10g,%.10g\n", e.epoch, e.phase, e.total, e.recon, e.kld);
        out += buf;
    }
    return out;
}

}  // namespace evo::vae
