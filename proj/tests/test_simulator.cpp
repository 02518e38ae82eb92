#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "evoforecast/error.hpp"
#include "evoforecast/ld.hpp"
#include "evoforecast/simulator.hpp"
#include "helpers.hpp"

using namespace evo;
using namespace evo::sim;

namespace {

struct ZeroEngine {
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return 0; }
};

TraitModel no_trait() { return {}; }

double median_window_r2(const HaplotypePool &pool, std::size_t w) {
    std::vector<double> r2;
    for (std::size_t i = 0; i < pool.loci(); ++i) {
        for (std::size_t j = i + 1; j <= std::min(pool.loci() - 1, i + w); ++j) {
            try {
                r2.push_back(ld::r2_from_haplotypes(pool, i, j));
            } catch (const DataError &) {
            }
        }
    }
    auto mid = r2.begin() + static_cast<std::ptrdiff_t>(r2.size() / 2);
    std::nth_element(r2.begin(), mid, r2.end());
    return *mid;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("starting frequencies stay in the support") {
    Rng rng = make_rng(1, {});
    auto f = sample_starting_frequencies(3, rng);
    REQUIRE(f.size() == 3);
    for (double x : f) CHECK((x >= 0.05 && x <= 0.95));

    ZeroEngine zero;
    auto low = sample_starting_frequencies(1, zero);
    CHECK(low[0] == doctest::Approx(0.05).epsilon(1e-15));

    CHECK_THROWS_AS(sample_starting_frequencies(0, rng), ParameterError);
}

TEST_CASE("starting frequencies have mean one half") {
    Rng rng = make_rng(2, {});
    auto f = sample_starting_frequencies(10000, rng);
    CHECK(std::abs(testutil::mean(f) - 0.5) < 0.01);
}

TEST_CASE("max-LD pool layout") {
    auto p = build_max_ld_haplotypes(std::vector<double>{0.5, 0.5}, 2);
    for (std::size_t h = 0; h < 4; ++h) {
        const std::uint8_t expected = h < 2 ? 0 : 1;
        CHECK(p.allele(0, h) == expected);
        CHECK(p.allele(1, h) == expected);
    }
    CHECK(ld::r2_from_haplotypes(p, 0, 1) == doctest::Approx(1.0));

    auto q = build_max_ld_haplotypes(std::vector<double>{0.6, 0.4}, 5);
    std::size_t both = 0;
    for (std::size_t h = 0; h < 10; ++h) {
        CHECK(q.allele(0, h) == (h < 6 ? 0 : 1));
        CHECK(q.allele(1, h) == (h < 4 ? 0 : 1));
        both += q.allele(0, h) == 0 && q.allele(1, h) == 0;
    }
    CHECK(both == 4);  // p_AB = 0.4

    auto z = build_max_ld_haplotypes(std::vector<double>{0.0}, 3);
    for (std::size_t h = 0; h < 6; ++h) CHECK(z.allele(0, h) == 1);
    CHECK(z.frequency(0) == 0.0);
}

TEST_CASE("LD noise extremes") {
    Rng rng = make_rng(3, {});
    auto freqs = sample_starting_frequencies(50, rng);
    auto pool = build_max_ld_haplotypes(freqs, 20);

    CHECK(apply_ld_noise(pool, 0.0, rng) == pool);

    auto flipped = apply_ld_noise(pool, 1.0, rng);
    for (std::size_t i = 0; i < pool.loci(); ++i) {
        CHECK(flipped.frequency(i) == doctest::Approx(1.0 - pool.frequency(i)));
        for (std::size_t h = 0; h < pool.haplotypes(); ++h) CHECK(flipped.allele(i, h) == 1 - pool.allele(i, h));
    }
    CHECK_THROWS_AS(apply_ld_noise(pool, 1.5, rng), ParameterError);
}

TEST_CASE("LD noise degrades neighbourhood r2 monotonically") {
    Rng rng = make_rng(4, {});
    auto freqs = sample_starting_frequencies(500, rng);
    auto pool = build_max_ld_haplotypes(freqs, 200);
    double previous = 2.0;
    for (double n_ld : {0.0, 0.04, 0.08, 0.12}) {
        Rng noise = make_rng(4, {99});
        const double m = median_window_r2(apply_ld_noise(pool, n_ld, noise), 50);
        CHECK(m < previous);
        previous = m;
    }
}

TEST_CASE("target effects") {
    CHECK(effect_size(0, 10) == doctest::Approx(0.2));
    CHECK(effect_size(9, 10) == doctest::Approx(2.0));
    for (std::size_t k = 1; k < 25; ++k) {
        CHECK(effect_size(k, 25) - effect_size(k - 1, 25) == doctest::Approx(0.08));
    }

    std::vector<double> freqs(100, 0.2);
    freqs[42] = 0.5;
    Rng rng = make_rng(5, {});
    auto trait = select_targets(freqs, 1, rng);
    REQUIRE(trait.targets.size() == 1);
    CHECK(trait.targets[0].locus == 42);
    CHECK(trait.targets[0].effect == doctest::Approx(2.0));
}

TEST_CASE("targets come from distinct equal-width regions") {
    Rng rng = make_rng(6, {});
    auto freqs = sample_starting_frequencies(2000, rng);
    auto trait = select_targets(freqs, 10, rng);
    REQUIRE(trait.targets.size() == 10);
    for (std::size_t k = 0; k < 10; ++k) {
        const auto &t = trait.targets[k];
        CHECK(freqs[t.locus] >= 0.45);
        CHECK(freqs[t.locus] <= 0.55);
        CHECK(t.locus / 200 == k);
    }
}

TEST_CASE("phenotype sums effects over allele-0 dosage") {
    std::vector<std::uint8_t> a(5, 1), b(5, 1);
    CHECK(phenotype(a, b, no_trait()) == 0.0);

    TraitModel one{{{2, 0.2}}};
    a[2] = b[2] = 0;
    CHECK(phenotype(a, b, one) == doctest::Approx(0.4));

    TraitModel ten;
    for (std::size_t k = 0; k < 10; ++k) ten.targets.push_back({k, effect_size(k, 10)});
    std::vector<std::uint8_t> c(10, 0), d(10, 1);
    CHECK(phenotype(c, d, ten) == doctest::Approx(11.0));
}

TEST_CASE("pure drift without recombination copies parental haplotypes") {
    Rng rng = make_rng(7, {});
    auto freqs = sample_starting_frequencies(30, rng);
    auto pool = apply_ld_noise(build_max_ld_haplotypes(freqs, 25), 0.3, rng);
    SimParams p;
    p.individuals = 25;
    p.survive_fraction = 1.0;
    p.recombination_rate = 0.0;
    auto next = evolve_one_generation(pool, no_trait(), p, rng);
    for (std::size_t h = 0; h < next.haplotypes(); ++h) {
        bool found = false;
        for (std::size_t g = 0; g < pool.haplotypes() && !found; ++g) {
            found = std::ranges::equal(next.haplotype(h), pool.haplotype(g));
        }
        CHECK(found);
    }
}

TEST_CASE("fixed loci never change and frequencies stay in range") {
    std::vector<double> freqs{0.0, 0.3, 1.0, 0.7, 0.0};
    auto pool = build_max_ld_haplotypes(freqs, 40);
    Rng rng = make_rng(8, {});
    TraitModel trait{{{1, 1.0}, {3, 0.5}}};
    SimParams p;
    p.individuals = 40;
    p.survive_fraction = 0.8;
    for (int g = 0; g < 20; ++g) {
        pool = evolve_one_generation(pool, trait, p, rng);
        CHECK(pool.frequency(0) == 0.0);
        CHECK(pool.frequency(2) == 1.0);
        CHECK(pool.frequency(4) == 0.0);
        for (double f : pool.frequencies()) CHECK((f >= 0.0 && f <= 1.0));
    }
}

TEST_CASE("neutral one-generation drift: martingale and binomial variance") {
    auto pool = build_max_ld_haplotypes(std::vector<double>{0.5}, 100);
    SimParams p;
    p.individuals = 100;
    p.survive_fraction = 1.0;
    const std::size_t runs = 10000;
    std::vector<double> f1(runs);
    for (std::size_t k = 0; k < runs; ++k) {
        Rng rng = make_rng(9, {k});
        f1[k] = evolve_one_generation(pool, no_trait(), p, rng).frequency(0);
    }
    const double var = testutil::variance(f1);
    const double sigma_mean = std::sqrt(var / static_cast<double>(runs));
    CHECK(std::abs(testutil::mean(f1) - 0.5) < 4.0 * sigma_mean);
    CHECK(var == doctest::Approx(0.5 * 0.5 / 200.0).epsilon(0.15));
}

TEST_CASE("truncation selection raises the favoured allele") {
    Rng rng = make_rng(10, {});
    std::vector<double> freqs(200);
    for (auto &f : freqs) f = 0.5;
    auto pool = build_max_ld_haplotypes(freqs, 200);
    TraitModel trait{{{100, 1.0}}};
    SimParams p;
    p.individuals = 200;
    p.generations = 20;
    p.interval = 5;
    p.replicates = 20;
    p.survive_fraction = 0.5;
    p.seed = 10;
    auto res = run_experiment(pool, trait, p);
    double previous = -1.0;
    for (std::size_t t = 0; t < res.frequencies.times(); ++t) {
        double m = 0.0;
        for (std::size_t r = 0; r < p.replicates; ++r) m += res.frequencies.at(t, 100, r);
        m /= static_cast<double>(p.replicates);
        CHECK((m > previous || m == 1.0));
        previous = m;
    }
}

TEST_CASE("experiment layout and determinism") {
    Rng rng = make_rng(11, {});
    auto freqs = sample_starting_frequencies(300, rng);
    auto pool = build_max_ld_haplotypes(freqs, 50);
    auto trait = select_targets(freqs, 3, rng);
    SimParams p;
    p.individuals = 50;
    p.generations = 75;
    p.interval = 5;
    p.replicates = 3;
    p.seed = 11;

    auto a = run_experiment(pool, trait, p);
    CHECK(a.frequencies.times() == 16);
    CHECK(a.frequencies.generations().back() == 75);
    CHECK(a.ancestral == pool);
    for (std::size_t i = 0; i < pool.loci(); ++i) {
        for (std::size_t r = 0; r < p.replicates; ++r) CHECK(a.frequencies.at(0, i, r) == pool.frequency(i));
    }

    auto b = run_experiment(pool, trait, p, 3);
    CHECK(std::ranges::equal(a.frequencies.values(), b.frequencies.values()));

    p.replicates = 1;
    p.generations = 0;
    auto c = run_experiment(pool, trait, p);
    CHECK(c.frequencies.times() == 1);
    for (std::size_t i = 0; i < pool.loci(); ++i) CHECK(c.frequencies.at(0, i, 0) == pool.frequency(i));
}

TEST_CASE("haplotype snapshot round trip") {
    Rng rng = make_rng(12, {});
    auto pool = apply_ld_noise(build_max_ld_haplotypes(sample_starting_frequencies(20, rng), 7), 0.2, rng);
    CHECK(parse_haplotypes(format_haplotypes(pool)) == pool);
}

}  // TEST_SUITE
