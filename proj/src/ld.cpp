#include "evoforecast/ld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "evoforecast/error.hpp"
#include "text_util.hpp"

namespace evo::ld {

std::string_view to_string(Method m) {
    switch (m) {
    case Method::ground_truth:
        return "ground_truth";
    case Method::vae_similarity:
        return "vae_similarity";
    case Method::ldx_freq:
        return "ldx_freq";
    case Method::scalar_product:
        return "scalar_product";
    }
    return "unknown";
}

Method parse_method(std::string_view text) {
    for (auto m : {Method::ground_truth, Method::vae_similarity, Method::ldx_freq, Method::scalar_product}) {
        if (text == to_string(m)) return m;
    }
    throw DataError("unknown LD method '" + std::string(text) + "'");
}

double r2_from_haplotypes(const HaplotypePool &pool, std::size_t i, std::size_t j) {
    const std::size_t n = pool.haplotypes();
    std::size_t a = 0, b = 0, ab = 0;
    for (std::size_t h = 0; h < n; ++h) {
        const bool x = pool.allele(i, h) == 0;
        const bool y = pool.allele(j, h) == 0;
        a += x;
        b += y;
        ab += x && y;
    }
    if (a == 0 || a == n || b == 0 || b == n) {
        throw DataError("r^2 undefined: locus " + std::to_string(a == 0 || a == n ? i : j) + " is monomorphic");
    }
    const double pa = static_cast<double>(a) / static_cast<double>(n);
    const double pb = static_cast<double>(b) / static_cast<double>(n);
    const double pab = static_cast<double>(ab) / static_cast<double>(n);
    const double d = pab - pa * pb;
    return std::clamp(d * d / (pa * (1.0 - pa) * pb * (1.0 - pb)), 0.0, 1.0);
}

double scalar_product_baseline(const FrequencyTensor &f, std::size_t row_i, std::size_t row_j) {
    double total = 0.0;
    for (std::size_t r = 0; r < f.replicates(); ++r) {
        double dot = 0.0;
        for (std::size_t t = 0; t < f.times(); ++t) dot += f.at(t, row_i, r) * f.at(t, row_j, r);
        total += std::abs(dot);
    }
    return total / static_cast<double>(f.replicates());
}

double ldx_freq_estimate(const FrequencyTensor &f, std::size_t row_i, std::size_t row_j) {
    if (f.times() < 3) throw DataError("ldx_freq_estimate needs at least 3 time points");
    const double n = static_cast<double>(f.times());
    double total = 0.0;
    for (std::size_t r = 0; r < f.replicates(); ++r) {
        double mx = 0.0, my = 0.0;
        for (std::size_t t = 0; t < f.times(); ++t) {
            mx += f.at(t, row_i, r);
            my += f.at(t, row_j, r);
        }
        mx /= n;
        my /= n;
        double sxx = 0.0, syy = 0.0, sxy = 0.0;
        for (std::size_t t = 0; t < f.times(); ++t) {
            const double dx = f.at(t, row_i, r) - mx;
            const double dy = f.at(t, row_j, r) - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        if (sxx <= 0.0 || syy <= 0.0) continue;
        total += std::min(1.0, sxy * sxy / (sxx * syy));
    }
    return total / static_cast<double>(f.replicates());
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("spearman: inputs differ in length");
    if (a.size() < 2) throw DataError("spearman: insufficient data (need at least 2 pairs)");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double mean = (n + 1.0) / 2.0;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t k = 0; k < ra.size(); ++k) {
        sab += (ra[k] - mean) * (rb[k] - mean);
        saa += (ra[k] - mean) * (ra[k] - mean);
        sbb += (rb[k] - mean) * (rb[k] - mean);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

std::map<Method, double> evaluate_ld(const LdTable &estimates, const LdTable &ground_truth) {
    std::map<SnpPair, double> truth;
    for (const auto &row : ground_truth) {
        if (row.method == Method::ground_truth) truth[{row.focal, row.neighbor}] = row.value;
    }
    std::map<Method, std::pair<std::vector<double>, std::vector<double>>> columns;
    for (const auto &row : estimates) {
        if (row.method == Method::ground_truth) continue;
        auto it = truth.find({row.focal, row.neighbor});
        if (it == truth.end()) {
            throw DataError("LD pair (" + std::to_string(row.focal) + ", " + std::to_string(row.neighbor) +
                ") has no ground truth");
        }
        columns[row.method].first.push_back(row.value);
        columns[row.method].second.push_back(it->second);
    }
    std::map<Method, double> out;
    for (const auto &[method, cols] : columns) out[method] = spearman(cols.first, cols.second);
    return out;
}

std::vector<SnpPair> window_pairs(const FrequencyTensor &f, std::size_t half_window) {
    std::vector<SnpPair> out;
    if (f.snps() < 2 * half_window + 1) return out;
    for (std::size_t i = half_window; i + half_window < f.snps(); ++i) {
        for (std::size_t j = i - half_window; j <= i + half_window; ++j) {
            if (j != i) out.emplace_back(f.snp_indices()[i], f.snp_indices()[j]);
        }
    }
    return out;
}

std::vector<double> mean_afc(const FrequencyTensor &f, int g) {
    const std::size_t t = f.time_index(g);
    std::vector<double> out(f.snps());
    for (std::size_t i = 0; i < f.snps(); ++i) {
        double sum = 0.0;
        for (std::size_t r = 0; r < f.replicates(); ++r) sum += std::abs(f.at(0, i, r) - f.at(t, i, r));
        out[i] = sum / static_cast<double>(f.replicates());
    }
    return out;
}

std::size_t row_of(const FrequencyTensor &f, std::size_t snp) {
    const auto &idx = f.snp_indices();
    auto it = std::lower_bound(idx.begin(), idx.end(), snp);
    if (it != idx.end() && *it == snp) return static_cast<std::size_t>(it - idx.begin());
    auto lin = std::find(idx.begin(), idx.end(), snp);
    if (lin == idx.end()) throw DataError("SNP " + std::to_string(snp) + " not present in tensor");
    return static_cast<std::size_t>(lin - idx.begin());
}

std::vector<SnpPair> filter_pairs(const FrequencyTensor &f, std::span<const SnpPair> pairs, double alpha, int g) {
    const auto afc = mean_afc(f, g);
    std::vector<SnpPair> out;
    for (const auto &p : pairs) {
        if (std::min(afc[row_of(f, p.first)], afc[row_of(f, p.second)]) >= alpha) out.push_back(p);
    }
    return out;
}

std::string format_ld_table(const LdTable &table) {
    std::string out = "focal\tneighbor\tmethod\tvalue\n";
    char buf[64];
    for (const auto &row : table) {
        out += std::to_string(row.focal);
        out += '\t';
        out += std::to_string(row.neighbor);
        out += '\t';
        out += to_string(row.method);
        std::snprintf(buf, sizeof buf, "\t%.8f\n", row.value);
        out += buf;
    }
    return out;
}

LdTable parse_ld_table(std::string_view text) {
    auto lines = detail::split_lines(text);
    LdTable out;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (ln == 0 && lines[0].starts_with("focal")) continue;
        if (lines[ln].empty()) continue;
        auto cells = detail::split(lines[ln], '\t');
        if (cells.size() != 4) throw ParseError("expected 4 columns", ln + 1);
        Method m;
        try {
            m = parse_method(cells[2]);
        } catch (const DataError &e) {
            throw ParseError(e.what(), ln + 1);
        }
        out.push_back({static_cast<std::size_t>(detail::parse_int(cells[0], ln + 1)),
            static_cast<std::size_t>(detail::parse_int(cells[1], ln + 1)), m, detail::parse_double(cells[3], ln + 1)});
    }
    return out;
}

}  // namespace evo::ld
