#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evoforecast/frequency_tensor.hpp"
#include "evoforecast/haplotype_pool.hpp"

namespace evo::ld {

enum class Method { ground_truth, vae_similarity, ldx_freq, scalar_product };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

struct LdRow {
    std::size_t focal;
    std::size_t neighbor;
    Method method;
    double value;
};

using LdTable = std::vector<LdRow>;
using SnpPair = std::pair<std::size_t, std::size_t>;

/// r^2 between loci i and j of a pool, counting allele 0 at both loci for
/// p_AB. Throws DataError when either locus is monomorphic.
double r2_from_haplotypes(const HaplotypePool &pool, std::size_t i, std::size_t j);

/// Mean over replicates of |<f_i, f_j>| over all time points of the tensor.
/// Arguments are tensor rows.
double scalar_product_baseline(const FrequencyTensor &f, std::size_t row_i, std::size_t row_j);

/// Mean over replicates of the squared Pearson correlation of the two
/// trajectories; a constant trajectory contributes 0.
double ldx_freq_estimate(const FrequencyTensor &f, std::size_t row_i, std::size_t row_j);

/// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

/// Spearman rho of every method in `estimates` against the ground-truth
/// rows, matched on (focal, neighbor).
std::map<Method, double> evaluate_ld(const LdTable &estimates, const LdTable &ground_truth);

/// (focal, neighbor) chromosome SNP index pairs with |focal - neighbor| <= w,
/// focal taken from tensor rows [w, S - w), neighbor != focal.
std::vector<SnpPair> window_pairs(const FrequencyTensor &f, std::size_t half_window);

/// Mean absolute allele frequency change per tensor row between generation
/// 0 (first time point) and generation `g`.
std::vector<double> mean_afc(const FrequencyTensor &f, int g);

/// Keeps pairs whose smaller mean AFC between the first time point and
/// generation `g` is at least alpha.
std::vector<SnpPair> filter_pairs(const FrequencyTensor &f, std::span<const SnpPair> pairs, double alpha, int g);

/// Row of a chromosome SNP index in the tensor; throws if absent.
std::size_t row_of(const FrequencyTensor &f, std::size_t snp);

/// TSV `focal<TAB>neighbor<TAB>method<TAB>value`.
std::string format_ld_table(const LdTable &table);
LdTable parse_ld_table(std::string_view text);

}  // namespace evo::ld
