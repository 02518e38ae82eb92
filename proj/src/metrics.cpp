#include "evoforecast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evoforecast/error.hpp"
#include "evoforecast/ld.hpp"

namespace evo::metrics {

std::vector<double> afc(const FrequencyTensor &f, int g0, int g1) {
    const std::size_t a = f.time_index(g0);
    const std::size_t b = f.time_index(g1);
    std::vector<double> out(f.snps());
    for (std::size_t i = 0; i < f.snps(); ++i) {
        double sum = 0.0;
        for (std::size_t r = 0; r < f.replicates(); ++r) sum += std::abs(f.at(b, i, r) - f.at(a, i, r));
        out[i] = sum / static_cast<double>(f.replicates());
    }
    return out;
}

std::string_view to_string(Aggregation a) { return a == Aggregation::mean ? "mean" : "std"; }

Aggregation parse_aggregation(std::string_view text) {
    if (text == "mean") return Aggregation::mean;
    if (text == "std") return Aggregation::std;
    throw ParameterError("unknown aggregation '" + std::string(text) + "'");
}

double aggregate(const FrequencyTensor &f, std::size_t t, std::size_t row, Aggregation a) {
    const std::size_t R = f.replicates();
    if (a == Aggregation::std && R < 2) throw DataError("std aggregation needs at least 2 replicates");
    double mean = 0.0;
    for (std::size_t r = 0; r < R; ++r) mean += f.at(t, row, r);
    mean /= static_cast<double>(R);
    if (a == Aggregation::mean) return mean;
    double ss = 0.0;
    for (std::size_t r = 0; r < R; ++r) ss += (f.at(t, row, r) - mean) * (f.at(t, row, r) - mean);
    return std::sqrt(ss / static_cast<double>(R));
}

std::vector<double> relative_distance_terms(const FrequencyTensor &truth, const FrequencyTensor &prediction,
    const FrequencyTensor &baseline, Aggregation a, std::size_t j, std::span<const std::size_t> snps) {
    if (j < 1) throw ParameterError("test index j must be at least 1");
    if (baseline.times() == 0) throw DataError("baseline tensor is empty");
    const int gt = baseline.generations().back();
    const int c = truth.interval();
    const int g = gt + c * static_cast<int>(j);
    const std::size_t t_truth = truth.time_index(g);
    const std::size_t t_pred = prediction.time_index(g);
    const std::size_t t_base = baseline.times() - 1;

    std::vector<std::size_t> chosen(snps.begin(), snps.end());
    if (chosen.empty()) chosen = prediction.snp_indices();
    std::vector<double> terms;
    terms.reserve(chosen.size());
    for (auto snp : chosen) {
        const double at = aggregate(truth, t_truth, ld::row_of(truth, snp), a);
        const double ap = aggregate(prediction, t_pred, ld::row_of(prediction, snp), a);
        const double ab = aggregate(baseline, t_base, ld::row_of(baseline, snp), a);
        terms.push_back(std::abs(at - ap) - std::abs(at - ab));
    }
    return terms;
}

double relative_distribution_distance(const FrequencyTensor &truth, const FrequencyTensor &prediction,
    const FrequencyTensor &baseline, Aggregation a, std::size_t j, std::span<const std::size_t> snps) {
    auto terms = relative_distance_terms(truth, prediction, baseline, a, j, snps);
    if (terms.empty()) throw DataError("relative distance over an empty SNP set");
    return std::accumulate(terms.begin(), terms.end(), 0.0) / static_cast<double>(terms.size());
}

CohortSpec build_cohorts(const sim::TraitModel &trait, std::size_t loci, Rng &rng, std::size_t radius,
    std::size_t max_no_targets) {
    CohortSpec spec;
    spec.requested = max_no_targets;
    for (const auto &t : trait.targets) spec.targets.push_back(t.locus);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < loci; ++i) {
        bool near = false;
        for (auto t : spec.targets) {
            const std::size_t dist = i > t ? i - t : t - i;
            if (dist <= radius) {
                near = true;
                break;
            }
        }
        if (!near) eligible.push_back(i);
    }
    if (eligible.empty()) throw DataError("cohort: no SNP lies outside the exclusion radius of every target");
    const std::size_t take = std::min(max_no_targets, eligible.size());
    spec.clamped = take < max_no_targets;
    // partial Fisher-Yates
    for (std::size_t k = 0; k < take; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, eligible.size() - 1);
        std::swap(eligible[k], eligible[pick(rng)]);
    }
    spec.no_targets.assign(eligible.begin(), eligible.begin() + static_cast<long>(take));
    std::sort(spec.no_targets.begin(), spec.no_targets.end());
    return spec;
}

namespace {

double quantile_sorted(const std::vector<double> &sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::pair<double, double> confidence_interval(
    std::span<const double> values, double level, std::uint64_t seed, std::size_t resamples) {
    if (values.size() < 2) throw DataError("confidence interval: insufficient data (need at least 2 values)");
    if (!(level >= 0.0 && level < 1.0)) throw ParameterError("confidence level must lie in [0,1)");
    if (resamples < 1) throw ParameterError("need at least one bootstrap resample");
    // resampled means of a constant sample would round away from the value itself
    if (std::ranges::all_of(values, [&](double v) { return v == values.front(); })) return {values.front(), values.front()};
    Rng rng = make_rng(seed, {stream::kBootstrap});
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    std::vector<double> means(resamples);
    for (auto &m : means) {
        double sum = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) sum += values[pick(rng)];
        m = sum / static_cast<double>(values.size());
    }
    std::sort(means.begin(), means.end());
    return {quantile_sorted(means, 0.5 * (1.0 - level)), quantile_sorted(means, 0.5 * (1.0 + level))};
}

}  // namespace evo::metrics
