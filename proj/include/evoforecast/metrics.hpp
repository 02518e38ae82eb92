#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "evoforecast/frequency_tensor.hpp"
#include "evoforecast/random.hpp"
#include "evoforecast/simulator.hpp"

namespace evo::metrics {

/// Per-SNP mean over replicates of |f(g1) - f(g0)|.
std::vector<double> afc(const FrequencyTensor &f, int g0, int g1);

enum class Aggregation { mean, std };

std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view text);

/// Mean, or standard deviation with divisor R, of one SNP row at one time
/// point over replicates.
double aggregate(const FrequencyTensor &f, std::size_t t, std::size_t row, Aggregation a);

/// Per-SNP terms |a(f) - a(pred)| - |a(f) - a(baseline at g_t)| at test
/// generation g_t + c*j, for the SNPs of `snps` (chromosome indices; all
/// prediction rows when empty). g_t is the last generation of `baseline`.
std::vector<double> relative_distance_terms(const FrequencyTensor &truth, const FrequencyTensor &prediction,
    const FrequencyTensor &baseline, Aggregation a, std::size_t j, std::span<const std::size_t> snps = {});

/// Mean of relative_distance_terms; negative values beat the identity
/// baseline.
double relative_distribution_distance(const FrequencyTensor &truth, const FrequencyTensor &prediction,
    const FrequencyTensor &baseline, Aggregation a, std::size_t j, std::span<const std::size_t> snps = {});

struct CohortSpec {
    std::vector<std::size_t> targets;
    std::vector<std::size_t> no_targets;  // sorted
    std::size_t requested = 0;
    bool clamped = false;  // fewer eligible SNPs than requested
};

/// Uniform sample without replacement of SNPs farther than `radius` indices
/// from every target.
CohortSpec build_cohorts(const sim::TraitModel &trait, std::size_t loci, Rng &rng, std::size_t radius = 500,
    std::size_t max_no_targets = 9000);

/// Percentile bootstrap interval of the mean.
std::pair<double, double> confidence_interval(
    std::span<const double> values, double level = 0.95, std::uint64_t seed = 0, std::size_t resamples = 1000);

}  // namespace evo::metrics
