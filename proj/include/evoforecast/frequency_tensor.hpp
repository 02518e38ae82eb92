#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evo {

enum class TensorKind { ground_truth, noisy, predicted };

std::string_view to_string(TensorKind kind);
TensorKind parse_tensor_kind(std::string_view text);

/// Allele frequencies indexed (time_index, snp, replicate).
///
/// Rows carry their chromosome SNP index and position so that a tensor can
/// hold any subset of SNPs (e.g. only SNPs with a full neighbour window).
class FrequencyTensor {
  public:
    FrequencyTensor() = default;
    FrequencyTensor(std::vector<int> generations, std::vector<std::size_t> snp_indices,
        std::vector<long> positions, std::size_t replicates, TensorKind kind);

    std::size_t times() const { return generations_.size(); }
    std::size_t snps() const { return snp_indices_.size(); }
    std::size_t replicates() const { return replicates_; }
    TensorKind kind() const { return kind_; }
    void set_kind(TensorKind kind) { kind_ = kind; }

    const std::vector<int> &generations() const { return generations_; }
    const std::vector<std::size_t> &snp_indices() const { return snp_indices_; }
    const std::vector<long> &positions() const { return positions_; }

    double &at(std::size_t t, std::size_t snp, std::size_t rep) {
        return values_[(t * snps() + snp) * replicates_ + rep];
    }
    double at(std::size_t t, std::size_t snp, std::size_t rep) const {
        return values_[(t * snps() + snp) * replicates_ + rep];
    }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    /// Index of a generation in generations(); throws DataError if absent.
    std::size_t time_index(int generation) const;
    bool has_generation(int generation) const;

    /// Constant spacing between recorded generations (0 for a single time point).
    int interval() const;

    /// Copy of the time points [first, last).
    FrequencyTensor slice_times(std::size_t first, std::size_t last) const;
    /// Copy of the time points with generation <= max_generation.
    FrequencyTensor until_generation(int max_generation) const;
    /// Copy restricted to the given row positions (not chromosome indices).
    FrequencyTensor select_rows(std::span<const std::size_t> rows) const;

    /// Throws DataError if shape or value invariants are broken.
    void validate() const;

  private:
    std::vector<int> generations_;
    std::vector<std::size_t> snp_indices_;
    std::vector<long> positions_;
    std::size_t replicates_ = 0;
    TensorKind kind_ = TensorKind::ground_truth;
    std::vector<double> values_;
};

/// TSV: header `#generations=g0,g1,...  replicates=R  kind=...`, then one row
/// per SNP: `snp_index<TAB>position` followed by R*T frequencies in
/// replicate-major, time-minor order with 6 decimals.
void write_frequency_table(const FrequencyTensor &f, const std::filesystem::path &path);
std::string format_frequency_table(const FrequencyTensor &f);
FrequencyTensor read_frequency_table(const std::filesystem::path &path);
FrequencyTensor parse_frequency_table(std::string_view text);

}  // namespace evo
