#include "evoforecast/haplotype_pool.hpp"

#include <algorithm>

#include "evoforecast/error.hpp"
#include "text_util.hpp"

namespace evo {

HaplotypePool::HaplotypePool(std::vector<long> positions, std::size_t individuals)
    : positions_(std::move(positions)), individuals_(individuals), data_(positions_.size() * 2 * individuals, 0) {
    for (std::size_t i = 1; i < positions_.size(); ++i) {
        if (positions_[i] <= positions_[i - 1]) throw DataError("haplotype pool: positions must be strictly increasing");
    }
}

double HaplotypePool::frequency(std::size_t locus) const {
    std::size_t zeros = 0;
    for (std::size_t h = 0; h < haplotypes(); ++h) zeros += allele(locus, h) == 0;
    return static_cast<double>(zeros) / static_cast<double>(haplotypes());
}

std::vector<double> HaplotypePool::frequencies() const {
    std::vector<std::size_t> zeros(loci(), 0);
    for (std::size_t h = 0; h < haplotypes(); ++h) {
        auto hap = haplotype(h);
        for (std::size_t i = 0; i < loci(); ++i) zeros[i] += hap[i] == 0;
    }
    std::vector<double> out(loci());
    for (std::size_t i = 0; i < loci(); ++i) {
        out[i] = static_cast<double>(zeros[i]) / static_cast<double>(haplotypes());
    }
    return out;
}

std::vector<long> default_positions(std::size_t loci) {
    std::vector<long> pos(loci);
    for (std::size_t i = 0; i < loci; ++i) pos[i] = 1000 * static_cast<long>(i + 1);
    return pos;
}

std::string format_haplotypes(const HaplotypePool &pool) {
    std::string out = "#loci=" + std::to_string(pool.loci()) + " individuals=" + std::to_string(pool.individuals()) + "\n";
    out.reserve(out.size() + pool.loci() * (pool.haplotypes() + 12));
    for (std::size_t i = 0; i < pool.loci(); ++i) {
        out += std::to_string(pool.positions()[i]);
        out += '\t';
        for (std::size_t h = 0; h < pool.haplotypes(); ++h) out += pool.allele(i, h) ? '1' : '0';
        out += '\n';
    }
    return out;
}

HaplotypePool parse_haplotypes(std::string_view text) {
    auto lines = detail::split_lines(text);
    if (lines.empty() || !lines[0].starts_with("#")) throw ParseError("missing '#loci=' header", 1);
    long long loci = -1, individuals = -1;
    for (auto field : detail::split_ws(lines[0].substr(1))) {
        if (field.starts_with("loci=")) {
            loci = detail::parse_int(field.substr(5), 1);
        } else if (field.starts_with("individuals=")) {
            individuals = detail::parse_int(field.substr(12), 1);
        } else {
            throw ParseError("unknown header field '" + std::string(field) + "'", 1);
        }
    }
    if (loci < 0 || individuals < 0) throw ParseError("header needs loci= and individuals=", 1);
    if (lines.size() != static_cast<std::size_t>(loci) + 1) {
        throw ParseError("expected " + std::to_string(loci) + " locus rows, found " + std::to_string(lines.size() - 1),
            lines.size());
    }
    std::vector<long> positions;
    std::vector<std::string_view> bits;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        auto cells = detail::split(lines[ln], '\t');
        if (cells.size() != 2) throw ParseError("expected position<TAB>bits", ln + 1);
        positions.push_back(static_cast<long>(detail::parse_int(cells[0], ln + 1)));
        if (cells[1].size() != 2 * static_cast<std::size_t>(individuals)) {
            throw ParseError("expected " + std::to_string(2 * individuals) + " alleles", ln + 1);
        }
        bits.push_back(cells[1]);
    }
    HaplotypePool pool;
    try {
        pool = HaplotypePool(std::move(positions), static_cast<std::size_t>(individuals));
    } catch (const DataError &e) {
        throw ParseError(e.what(), 2);
    }
    for (std::size_t i = 0; i < bits.size(); ++i) {
        for (std::size_t h = 0; h < bits[i].size(); ++h) {
            char c = bits[i][h];
            if (c != '0' && c != '1') throw ParseError("allele must be 0 or 1", i + 2);
            pool.set_allele(i, h, static_cast<std::uint8_t>(c - '0'));
        }
    }
    return pool;
}

void write_haplotypes(const HaplotypePool &pool, const std::filesystem::path &path) {
    detail::write_file(path, format_haplotypes(pool));
}

HaplotypePool read_haplotypes(const std::filesystem::path &path) {
    return parse_haplotypes(detail::read_file(path));
}

}  // namespace evo
