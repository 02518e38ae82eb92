#include "evoforecast/vae_inference.hpp"

#include "evoforecast/error.hpp"
#include "evoforecast/parallel.hpp"
#include "evoforecast/vae_train.hpp"

namespace evo::vae {

FrequencyTensor rollout(const VaeParams &params, const FrequencyTensor &history, const RolloutOptions &options) {
    const std::size_t b = params.trajectory_length();
    const std::size_t w = params.half_window;
    const std::size_t S = history.snps();
    const std::size_t R = history.replicates();
    const std::size_t K = options.samples_per_replicate;
    if (K < 1) throw ParameterError("samples_per_replicate must be at least 1");
    if (history.times() < b) throw DataError("rollout needs at least b time points of history");
    if (S < 2 * w + 1) throw DataError("rollout needs at least 2w + 1 SNPs");

    const std::size_t first = w;
    const std::size_t last = S - w;
    std::vector<std::size_t> rows(last - first);
    for (std::size_t i = first; i < last; ++i) rows[i - first] = i;
    FrequencyTensor focal = history.select_rows(rows);

    const int c = history.interval() > 0 ? history.interval() : 1;
    const int gt = history.generations().back();
    std::vector<int> generations;
    for (std::size_t k = 1; k <= options.steps; ++k) generations.push_back(gt + c * static_cast<int>(k));
    FrequencyTensor out(generations, focal.snp_indices(), focal.positions(), R * K, TensorKind::predicted);
    if (options.steps == 0) return out;

    const std::size_t P = 2 * w + 1;
    const auto M = static_cast<Eigen::Index>(params.latent_dim());
    const bool attend = params.variant == Variant::w;

    parallel_for(R * K, options.threads, [&](std::size_t chain) {
        const std::size_t r = chain / K;
        // state(i, t): last b values of SNP row i, oldest first
        Matrix state(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(b));
        for (std::size_t i = 0; i < S; ++i) {
            for (std::size_t t = 0; t < b; ++t) {
                state(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = history.at(history.times() - b + t, i, r);
            }
        }
        Batch batch;
        for (std::size_t i = first; i < last; ++i) {
            batch.focal.push_back(i);
            if (attend) {
                for (std::size_t j = 0; j < P; ++j) batch.neighbors.push_back(i - w + j);
            }
        }
        batch.targets = Vector::Zero(static_cast<Eigen::Index>(rows.size()));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t step = 0; step < options.steps; ++step) {
            batch.trajectories = state;
            batch.noise = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), M);
            if (!options.deterministic) {
                Rng rng = make_rng(options.seed, {stream::kRollout, chain, step});
                for (Eigen::Index i = 0; i < batch.noise.size(); ++i) batch.noise.data()[i] = normal(rng);
            }
            Forward fw = forward(params, batch, 0.0);
            // shift everything left; edge rows repeat their last value
            Matrix next(state.rows(), state.cols());
            next.leftCols(static_cast<Eigen::Index>(b - 1)) = state.rightCols(static_cast<Eigen::Index>(b - 1));
            next.col(static_cast<Eigen::Index>(b - 1)) = state.col(static_cast<Eigen::Index>(b - 1));
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const double p = fw.prediction[static_cast<Eigen::Index>(k)];
                next(static_cast<Eigen::Index>(first + k), static_cast<Eigen::Index>(b - 1)) = p;
                out.at(step, k, chain) = p;
            }
            state = std::move(next);
        }
    });
    return out;
}

std::vector<SimilarityRow> extract_similarities(const VaeParams &params, const FrequencyTensor &training) {
    if (params.variant != Variant::w) {
        throw ParameterError("similarity extraction needs the w variant (no_w has no attention pathway)");
    }
    const std::size_t b = params.trajectory_length();
    const std::size_t w = params.half_window;
    const std::size_t P = 2 * w + 1;
    if (training.times() < b) throw DataError("similarity extraction needs at least b time points");
    if (training.snps() < P) throw DataError("similarity extraction needs at least 2w + 1 SNPs");

    const std::size_t first = w;
    const std::size_t last = training.snps() - w;
    const std::size_t windows = training.times() - b + 1;
    Matrix sum = Matrix::Zero(static_cast<Eigen::Index>(last - first), static_cast<Eigen::Index>(P));
    const auto M = static_cast<Eigen::Index>(params.latent_dim());

    for (std::size_t r = 0; r < training.replicates(); ++r) {
        for (std::size_t start = 0; start < windows; ++start) {
            Batch batch;
            batch.trajectories.resize(static_cast<Eigen::Index>(training.snps()), static_cast<Eigen::Index>(b));
            for (std::size_t i = 0; i < training.snps(); ++i) {
                for (std::size_t t = 0; t < b; ++t) {
                    batch.trajectories(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = training.at(start + t, i, r);
                }
            }
            for (std::size_t i = first; i < last; ++i) {
                batch.focal.push_back(i);
                for (std::size_t j = 0; j < P; ++j) batch.neighbors.push_back(i - w + j);
            }
            batch.targets = Vector::Zero(static_cast<Eigen::Index>(last - first));
            batch.noise = Matrix::Zero(static_cast<Eigen::Index>(last - first), M);
            sum += forward(params, batch, 0.0).similarity;
        }
    }
    sum /= static_cast<double>(training.replicates() * windows);

    std::vector<SimilarityRow> out;
    out.reserve((last - first) * (P - 1));
    for (std::size_t i = first; i < last; ++i) {
        for (std::size_t j = 0; j < P; ++j) {
            if (j == w) continue;
            out.push_back({training.snp_indices()[i], training.snp_indices()[i - w + j],
                sum(static_cast<Eigen::Index>(i - first), static_cast<Eigen::Index>(j))});
        }
    }
    return out;
}

}  // namespace evo::vae
