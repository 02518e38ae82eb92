#pragma once

#include <cstdint>

#include "evoforecast/frequency_tensor.hpp"
#include "evoforecast/random.hpp"

namespace evo::poolseq {

struct NoiseParams {
    std::size_t n_sampling = 100;  // individuals drawn from the pool
    std::size_t n_cov = 40;        // sequencing coverage per site
    std::size_t census = 1000;     // N

    void validate() const;

    /// Variance inflation 1/n_eff = 1/(2 n_sampling) + 1/n_cov of one noisy
    /// observation, as a fraction of p(1-p).
    double inverse_effective_size() const;
};

/// Number of successes in `draws` draws without replacement from a
/// population of `total` items containing `successes`.
std::uint64_t sample_hypergeometric(std::uint64_t total, std::uint64_t successes, std::uint64_t draws, Rng &rng);

/// Two-stage Pool-Seq noise on a single frequency.
double noisy_frequency(double f, const NoiseParams &p, Rng &rng);

/// Applies the noise to every cell. Cell (t, i, r) uses its own stream derived
/// from (seed, t, snp index, r), so results do not depend on thread count.
FrequencyTensor pool_seq_noise(const FrequencyTensor &f, const NoiseParams &p, std::uint64_t seed, unsigned threads = 1);

}  // namespace evo::poolseq
