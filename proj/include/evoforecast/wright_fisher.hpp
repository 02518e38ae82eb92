#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "evoforecast/frequency_tensor.hpp"
#include "evoforecast/poolseq.hpp"
#include "evoforecast/random.hpp"

namespace evo::wf {

/// Selection map on the allele frequency with additive dominance (h = 1/2).
///
/// The default form counts heterozygotes twice in the mean fitness, which is
/// what makes s = 0 the identity. `printed_form` reproduces the formula with a
/// single heterozygote term in the denominator; it is kept only for
/// comparison and is not the identity at s = 0.
double fitness_map(double x, double s, bool printed_form = false);

struct WfParams {
    double ne = 1000;  // diploid effective size
    double s = 0.0;
    int horizon = 0;  // generations to simulate
    int interval = 1;  // recording interval c
    bool printed_form = false;

    void validate() const;
};

/// One Wright-Fisher generation: Binomial(2 ne, g(f)) / (2 ne).
double wf_step(double f, const WfParams &p, Rng &rng);

/// Independent chains per (SNP, replicate) started from the last time point of
/// `start`; the output holds the start point followed by every c-th
/// generation up to the horizon. `s` has one entry per SNP row.
FrequencyTensor simulate_wf(const FrequencyTensor &start, std::span<const double> s, double ne, int horizon, int interval,
    std::uint64_t seed, unsigned threads = 1, bool printed_form = false);

/// Temporal-F estimate of Ne from generations g0 and g0 + t, averaged over
/// replicates. `noise` enables the Pool-Seq sampling correction; nullopt means
/// noise-free input.
double estimate_ne(const FrequencyTensor &f, int g0, int t, const std::optional<poolseq::NoiseParams> &noise);

/// Per-replicate Ne estimates (NaN where the corrected F is not positive).
std::vector<double> estimate_ne_per_replicate(
    const FrequencyTensor &f, int g0, int t, const std::optional<poolseq::NoiseParams> &noise);

enum class RegressionMode { pooled, per_replicate, two_point };

/// Selection coefficient from the slope of logit(f) over generations:
/// s = 2 * slope. `values` is replicate-major: values[r * generations.size() + k].
double estimate_s(std::span<const double> values, std::span<const int> generations, std::size_t replicates,
    RegressionMode mode = RegressionMode::pooled);

/// estimate_s for every SNP row of a tensor.
std::vector<double> estimate_s_all(const FrequencyTensor &f, RegressionMode mode = RegressionMode::pooled);

}  // namespace evo::wf
