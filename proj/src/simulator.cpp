#include "evoforecast/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evoforecast/parallel.hpp"

namespace evo::sim {

void SimParams::validate() const {
    if (individuals < 2) throw ParameterError("N must be at least 2");
    if (generations < 0) throw ParameterError("G must be non-negative");
    if (interval < 1) throw ParameterError("sampling interval c must be at least 1");
    if (generations > 0 && generations < interval) throw ParameterError("G must be at least c");
    if (replicates < 1) throw ParameterError("R must be at least 1");
    if (!(survive_fraction > 0.0 && survive_fraction <= 1.0)) {
        throw ParameterError("survive_fraction must lie in (0,1]");
    }
    if (!(recombination_rate >= 0.0)) throw ParameterError("recombination rate must be non-negative");
}

double effect_size(std::size_t k, std::size_t n) {
    return 2.0 * static_cast<double>(k + 1) / static_cast<double>(n);
}

HaplotypePool build_max_ld_haplotypes(std::span<const double> freqs, std::size_t individuals) {
    return build_max_ld_haplotypes(freqs, individuals, default_positions(freqs.size()));
}

HaplotypePool build_max_ld_haplotypes(
    std::span<const double> freqs, std::size_t individuals, std::vector<long> positions) {
    if (positions.size() != freqs.size()) throw ParameterError("positions and frequencies differ in length");
    HaplotypePool pool(std::move(positions), individuals);
    const double haps = static_cast<double>(pool.haplotypes());
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        if (!(freqs[i] >= 0.0 && freqs[i] <= 1.0)) throw ParameterError("starting frequency outside [0,1]");
        // nearbyint honours the default round-half-to-even mode
        auto zeros = static_cast<std::size_t>(std::nearbyint(haps * freqs[i]));
        for (std::size_t h = zeros; h < pool.haplotypes(); ++h) pool.set_allele(i, h, 1);
    }
    return pool;
}

HaplotypePool apply_ld_noise(HaplotypePool pool, double n_ld, Rng &rng) {
    if (!(n_ld >= 0.0 && n_ld <= 1.0)) throw ParameterError("n_LD must lie in [0,1], got " + std::to_string(n_ld));
    const std::size_t total = pool.loci() * pool.haplotypes();
    auto flips = static_cast<std::size_t>(std::floor(n_ld * static_cast<double>(total) + 1e-9));
    flips = std::min(flips, total);
    if (flips == 0) return pool;
    // partial Fisher-Yates over flat cell indices
    std::vector<std::size_t> cells(total);
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    for (std::size_t k = 0; k < flips; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, total - 1);
        std::swap(cells[k], cells[pick(rng)]);
        const std::size_t locus = cells[k] % pool.loci();
        const std::size_t hap = cells[k] / pool.loci();
        pool.set_allele(locus, hap, pool.allele(locus, hap) ^ 1);
    }
    return pool;
}

TraitModel select_targets(std::span<const double> freqs, std::size_t num_targets, Rng &rng) {
    TraitModel trait;
    if (num_targets == 0) return trait;
    const std::size_t loci = freqs.size();
    if (num_targets > loci) throw ParameterError("more targets than loci");
    for (std::size_t k = 0; k < num_targets; ++k) {
        const std::size_t lo = k * loci / num_targets;
        const std::size_t hi = (k + 1) * loci / num_targets;
        std::vector<std::size_t> eligible;
        for (std::size_t i = lo; i < hi; ++i) {
            if (freqs[i] >= 0.45 && freqs[i] <= 0.55) eligible.push_back(i);
        }
        if (eligible.empty()) {
            throw ParameterError("target region " + std::to_string(k) + " [" + std::to_string(lo) + ", " +
                std::to_string(hi) + ") has no locus with starting frequency in [0.45, 0.55]");
        }
        std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
        trait.targets.push_back({eligible[pick(rng)], effect_size(k, num_targets)});
    }
    return trait;
}

double phenotype(std::span<const std::uint8_t> hap_a, std::span<const std::uint8_t> hap_b, const TraitModel &trait) {
    double value = 0.0;
    for (const auto &t : trait.targets) {
        const int dosage = (hap_a[t.locus] == 0) + (hap_b[t.locus] == 0);
        value += t.effect * dosage;
    }
    return value;
}

double phenotype(const HaplotypePool &pool, std::size_t individual, const TraitModel &trait) {
    return phenotype(pool.haplotype(2 * individual), pool.haplotype(2 * individual + 1), trait);
}

namespace {

void make_gamete(const HaplotypePool &pool, std::size_t parent, double rate, Rng &rng, std::span<std::uint8_t> out) {
    const auto &pos = pool.positions();
    std::bernoulli_distribution coin(0.5);
    std::size_t current = 2 * parent + (coin(rng) ? 1 : 0);
    std::vector<std::size_t> breaks;
    if (rate > 0.0 && pool.loci() > 1) {
        std::poisson_distribution<int> crossovers(rate);
        const int k = crossovers(rng);
        std::uniform_real_distribution<double> where(static_cast<double>(pos.front()), static_cast<double>(pos.back()));
        for (int c = 0; c < k; ++c) {
            const double x = where(rng);
            breaks.push_back(static_cast<std::size_t>(std::upper_bound(pos.begin(), pos.end(), x,
                                                          [](double v, long p) { return v < static_cast<double>(p); }) -
                                                      pos.begin()));
        }
        std::sort(breaks.begin(), breaks.end());
    }
    std::size_t start = 0;
    for (std::size_t b : breaks) {
        auto src = pool.haplotype(current);
        std::copy(src.begin() + static_cast<long>(start), src.begin() + static_cast<long>(b),
            out.begin() + static_cast<long>(start));
        start = b;
        current ^= 1;  // 2k <-> 2k+1
    }
    auto src = pool.haplotype(current);
    std::copy(src.begin() + static_cast<long>(start), src.end(), out.begin() + static_cast<long>(start));
}

}  // namespace

HaplotypePool evolve_one_generation(
    const HaplotypePool &pool, const TraitModel &trait, const SimParams &params, Rng &rng) {
    const std::size_t n = pool.individuals();
    if (n < 2) throw DataError("degenerate population: fewer than 2 individuals");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> value(n);
    for (std::size_t k = 0; k < n; ++k) value[k] = phenotype(pool, k, trait);
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value[a] > value[b]; });

    auto survivors =
        static_cast<std::size_t>(std::ceil(params.survive_fraction * static_cast<double>(n) - 1e-9));
    survivors = std::min(survivors, n);
    if (survivors < 2) throw DataError("degenerate population: fewer than 2 survivors after truncation");

    HaplotypePool next(pool.positions(), params.individuals);
    std::uniform_int_distribution<std::size_t> pick(0, survivors - 1);
    for (std::size_t child = 0; child < params.individuals; ++child) {
        const std::size_t mother = order[pick(rng)];
        std::size_t father = order[pick(rng)];
        while (father == mother) father = order[pick(rng)];
        make_gamete(pool, mother, params.recombination_rate, rng, next.haplotype(2 * child));
        make_gamete(pool, father, params.recombination_rate, rng, next.haplotype(2 * child + 1));
    }
    return next;
}

ExperimentResult run_experiment(
    const HaplotypePool &ancestral, const TraitModel &trait, const SimParams &params, unsigned threads) {
    params.validate();
    if (ancestral.individuals() != params.individuals) {
        throw ParameterError("ancestral pool has " + std::to_string(ancestral.individuals()) +
            " individuals but N = " + std::to_string(params.individuals));
    }
    for (const auto &t : trait.targets) {
        if (t.locus >= ancestral.loci()) throw ParameterError("target locus out of range");
    }

    std::vector<int> generations;
    for (int g = 0; g <= params.generations; g += params.interval) generations.push_back(g);
    std::vector<std::size_t> snps(ancestral.loci());
    std::iota(snps.begin(), snps.end(), std::size_t{0});
    FrequencyTensor f(generations, snps, ancestral.positions(), params.replicates, TensorKind::ground_truth);

    parallel_for(params.replicates, threads, [&](std::size_t r) {
        Rng rng = make_rng(params.seed, {stream::kReplicate, r});
        HaplotypePool pool = ancestral;
        std::size_t t = 0;
        for (int g = 0; g <= params.generations; ++g) {
            if (g > 0) pool = evolve_one_generation(pool, trait, params, rng);
            if (t < generations.size() && generations[t] == g) {
                auto freqs = pool.frequencies();
                for (std::size_t i = 0; i < freqs.size(); ++i) f.at(t, i, r) = freqs[i];
                ++t;
            }
        }
    });
    return {std::move(f), ancestral};
}

}  // namespace evo::sim
