#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evo {

/// Binary allele matrix (L loci x 2N haploid genomes) of one population.
///
/// Allele 0 is the ancestral-majority allele and is the one whose frequency
/// is tracked. Haplotypes 2k and 2k+1 belong to diploid individual k.
/// Storage is haplotype-major so gametes can be assembled from contiguous
/// segments.
class HaplotypePool {
  public:
    HaplotypePool() = default;
    /// All-zero pool over the given strictly increasing positions.
    HaplotypePool(std::vector<long> positions, std::size_t individuals);

    std::size_t loci() const { return positions_.size(); }
    std::size_t individuals() const { return individuals_; }
    std::size_t haplotypes() const { return 2 * individuals_; }
    const std::vector<long> &positions() const { return positions_; }

    std::uint8_t allele(std::size_t locus, std::size_t hap) const { return data_[hap * loci() + locus]; }
    void set_allele(std::size_t locus, std::size_t hap, std::uint8_t value) { data_[hap * loci() + locus] = value; }

    std::span<const std::uint8_t> haplotype(std::size_t hap) const {
        return {data_.data() + hap * loci(), loci()};
    }
    std::span<std::uint8_t> haplotype(std::size_t hap) { return {data_.data() + hap * loci(), loci()}; }

    /// Fraction of haplotypes carrying allele 0 at the locus.
    double frequency(std::size_t locus) const;
    std::vector<double> frequencies() const;

    bool operator==(const HaplotypePool &) const = default;

  private:
    std::vector<long> positions_;
    std::size_t individuals_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Positions 1000, 2000, ... used when no genome coordinates are given.
std::vector<long> default_positions(std::size_t loci);

/// Snapshot text format: header `#loci=L individuals=N`, then one row per
/// locus `position<TAB>b1b2...b2N`.
std::string format_haplotypes(const HaplotypePool &pool);
HaplotypePool parse_haplotypes(std::string_view text);
void write_haplotypes(const HaplotypePool &pool, const std::filesystem::path &path);
HaplotypePool read_haplotypes(const std::filesystem::path &path);

}  // namespace evo
