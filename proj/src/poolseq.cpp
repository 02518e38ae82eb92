#include "evoforecast/poolseq.hpp"

#include <cmath>

#include "evoforecast/error.hpp"
#include "evoforecast/parallel.hpp"

namespace evo::poolseq {

void NoiseParams::validate() const {
    if (n_sampling == 0 || n_sampling > census) {
        throw ParameterError("n_sampling must satisfy 0 < n_sampling <= N (" + std::to_string(census) + ")");
    }
    if (n_cov < 1) throw ParameterError("n_cov must be at least 1");
}

double NoiseParams::inverse_effective_size() const {
    return 1.0 / (2.0 * static_cast<double>(n_sampling)) + 1.0 / static_cast<double>(n_cov);
}

std::uint64_t sample_hypergeometric(std::uint64_t total, std::uint64_t successes, std::uint64_t draws, Rng &rng) {
    if (successes > total || draws > total) throw ParameterError("hypergeometric: invalid parameters");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uint64_t hits = 0;
    std::uint64_t left = total;
    std::uint64_t good = successes;
    for (std::uint64_t d = 0; d < draws; ++d) {
        if (good == 0) break;
        if (good == left) {
            hits += draws - d;
            break;
        }
        if (u(rng) * static_cast<double>(left) < static_cast<double>(good)) {
            ++hits;
            --good;
        }
        --left;
    }
    return hits;
}

double noisy_frequency(double f, const NoiseParams &p, Rng &rng) {
    const std::uint64_t alleles = 2 * p.census;
    const auto successes = static_cast<std::uint64_t>(std::nearbyint(static_cast<double>(alleles) * f));
    const std::uint64_t draws = 2 * p.n_sampling;
    const double sampled = static_cast<double>(sample_hypergeometric(alleles, successes, draws, rng)) / static_cast<double>(draws);
    std::binomial_distribution<std::uint64_t> reads(p.n_cov, sampled);
    return static_cast<double>(reads(rng)) / static_cast<double>(p.n_cov);
}

FrequencyTensor pool_seq_noise(const FrequencyTensor &f, const NoiseParams &p, std::uint64_t seed, unsigned threads) {
    p.validate();
    if (f.kind() != TensorKind::ground_truth) {
        throw ParameterError("pool_seq_noise expects a ground_truth tensor, got " + std::string(to_string(f.kind())));
    }
    FrequencyTensor out = f;
    out.set_kind(TensorKind::noisy);
    const double alleles = 2.0 * static_cast<double>(p.census);
    for (double v : f.values()) {
        // a tensor simulated with a different N has frequencies off the 1/2N grid
        if (std::abs(v * alleles - std::nearbyint(v * alleles)) > 1e-6 * alleles) {
            throw ParameterError("frequency " + std::to_string(v) + " is not a multiple of 1/(2N) for N = " +
                std::to_string(p.census));
        }
    }
    parallel_for(f.snps(), threads, [&](std::size_t i) {
        const auto snp = static_cast<std::uint64_t>(f.snp_indices()[i]);
        for (std::size_t t = 0; t < f.times(); ++t) {
            for (std::size_t r = 0; r < f.replicates(); ++r) {
                Rng rng = make_rng(seed, {stream::kPoolSeq, t, snp, r});
                out.at(t, i, r) = noisy_frequency(f.at(t, i, r), p, rng);
            }
        }
    });
    return out;
}

}  // namespace evo::poolseq
