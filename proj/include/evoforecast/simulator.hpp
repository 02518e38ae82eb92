#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "evoforecast/error.hpp"
#include "evoforecast/frequency_tensor.hpp"
#include "evoforecast/haplotype_pool.hpp"
#include "evoforecast/random.hpp"

namespace evo::sim {

struct SimParams {
    std::size_t individuals = 1000;  // census size N
    int generations = 75;            // G
    std::size_t replicates = 10;     // R
    int interval = 5;                // c, recording interval
    double survive_fraction = 0.99;
    double recombination_rate = 1.0;  // expected crossovers per meiosis
    std::uint64_t seed = 0;

    void validate() const;
};

struct Target {
    std::size_t locus;
    double effect;
};

/// Additive quantitative trait with full heritability.
struct TraitModel {
    std::vector<Target> targets;
};

/// Effect size of the k-th of n targets, 2(k+1)/n.
double effect_size(std::size_t k, std::size_t n);

/// i.i.d. U(0.05, 0.95) starting frequencies.
template <class URBG>
std::vector<double> sample_starting_frequencies(std::size_t loci, URBG &rng) {
    if (loci == 0) throw ParameterError("sample_starting_frequencies: empty input (0 loci)");
    std::uniform_real_distribution<double> uniform(0.05, 0.95);
    std::vector<double> out(loci);
    for (auto &f : out) f = uniform(rng);
    return out;
}

/// Maximal-LD pool: row i holds round(2N f_i) zeros followed by ones
/// (round half to even).
HaplotypePool build_max_ld_haplotypes(std::span<const double> freqs, std::size_t individuals);
HaplotypePool build_max_ld_haplotypes(
    std::span<const double> freqs, std::size_t individuals, std::vector<long> positions);

/// Flips floor(n_ld * L * 2N) distinct entries chosen uniformly.
HaplotypePool apply_ld_noise(HaplotypePool pool, double n_ld, Rng &rng);

/// One target per equal-width region, uniformly among loci whose starting
/// frequency lies in [0.45, 0.55].
TraitModel select_targets(std::span<const double> freqs, std::size_t num_targets, Rng &rng);

/// Sum of effect * dosage of allele 0 over targets.
double phenotype(std::span<const std::uint8_t> hap_a, std::span<const std::uint8_t> hap_b, const TraitModel &trait);
double phenotype(const HaplotypePool &pool, std::size_t individual, const TraitModel &trait);

/// Truncation selection, random mating among survivors and recombination.
HaplotypePool evolve_one_generation(
    const HaplotypePool &pool, const TraitModel &trait, const SimParams &params, Rng &rng);

struct ExperimentResult {
    FrequencyTensor frequencies;  // ground truth, generations 0, c, ..., <= G
    HaplotypePool ancestral;
};

/// Runs all replicates from the same ancestral pool. Replicate r draws from
/// its own stream derived from params.seed, so the result does not depend on
/// `threads`.
ExperimentResult run_experiment(
    const HaplotypePool &ancestral, const TraitModel &trait, const SimParams &params, unsigned threads = 1);

}  // namespace evo::sim
