#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "evoforecast/error.hpp"
#include "evoforecast/poolseq.hpp"
#include "helpers.hpp"

using namespace evo;
using namespace evo::poolseq;

namespace {

std::vector<double> draws(double f, const NoiseParams &p, std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed, {});
    std::vector<double> out(n);
    for (auto &x : out) x = noisy_frequency(f, p, rng);
    return out;
}

// Hypergeometric allele sampling followed by binomial reads.
double two_stage_variance(double f, const NoiseParams &p) {
    const double pool = 2.0 * static_cast<double>(p.census);
    const double n = 2.0 * static_cast<double>(p.n_sampling);
    const double stage1 = f * (1.0 - f) / n * (pool - n) / (pool - 1.0);
    return stage1 + (f * (1.0 - f) - stage1) / static_cast<double>(p.n_cov);
}

}  // namespace

TEST_SUITE("poolseq") {

TEST_CASE("boundary frequencies are noise-free") {
    NoiseParams p;
    Rng rng = make_rng(1, {});
    CHECK(noisy_frequency(0.0, p, rng) == 0.0);
    CHECK(noisy_frequency(1.0, p, rng) == 1.0);
}

TEST_CASE("hypergeometric sampler edge cases") {
    Rng rng = make_rng(2, {});
    CHECK(sample_hypergeometric(10, 0, 5, rng) == 0);
    CHECK(sample_hypergeometric(10, 10, 5, rng) == 5);
    CHECK(sample_hypergeometric(10, 4, 10, rng) == 4);
    for (int k = 0; k < 100; ++k) {
        const auto x = sample_hypergeometric(20, 7, 15, rng);
        CHECK((x >= 2 && x <= 7));
    }
}

TEST_CASE("two-stage moments at f = 0.5") {
    NoiseParams p{100, 40, 1000};
    auto x = draws(0.5, p, 100000, 3);
    CHECK(std::abs(testutil::mean(x) - 0.5) < 0.003);
    CHECK(testutil::variance(x) == doctest::Approx(two_stage_variance(0.5, p)).epsilon(0.05));
}

TEST_CASE("full sampling with huge coverage is nearly exact") {
    NoiseParams p{1000, 1000000, 1000};
    auto x = draws(0.37, p, 200, 4);
    for (double v : x) CHECK(std::abs(v - 0.37) < 0.002);
}

TEST_CASE("noise is unbiased across the frequency grid") {
    NoiseParams p{100, 40, 1000};
    for (int k = 1; k <= 9; ++k) {
        const double f = 0.1 * k;
        auto x = draws(f, p, 100000, 10 + static_cast<std::uint64_t>(k));
        const double sigma_mean = std::sqrt(testutil::variance(x) / static_cast<double>(x.size()));
        CHECK(std::abs(testutil::mean(x) - f) < 4.0 * sigma_mean);
    }
}

TEST_CASE("noise variance decreases in n_sampling and n_cov") {
    double previous = 1.0;
    for (std::size_t ns : {25, 100, 400}) {
        const double v = testutil::variance(draws(0.5, NoiseParams{ns, 40, 1000}, 40000, 20));
        CHECK(v < previous);
        previous = v;
    }
    previous = 1.0;
    for (std::size_t cov : {10, 40, 160}) {
        const double v = testutil::variance(draws(0.5, NoiseParams{100, cov, 1000}, 40000, 21));
        CHECK(v < previous);
        previous = v;
    }
}

TEST_CASE("tensor noise: kind tag, grid check, determinism") {
    auto f = testutil::make_tensor({0, 5}, 30, 3);
    for (std::size_t i = 0; i < f.values().size(); ++i) f.values()[i] = static_cast<double>(i % 11) / 10.0;
    NoiseParams p{5, 30, 10};

    auto a = pool_seq_noise(f, p, 7);
    auto b = pool_seq_noise(f, p, 7, 4);
    CHECK(a.kind() == TensorKind::noisy);
    CHECK(std::ranges::equal(a.values(), b.values()));
    for (std::size_t i = 0; i < f.values().size(); ++i) {
        if (f.values()[i] == 0.0 || f.values()[i] == 1.0) CHECK(a.values()[i] == f.values()[i]);
    }

    // applying the noise twice would inflate variance; the kind tag forbids it
    CHECK_THROWS_AS(pool_seq_noise(a, p, 7), ParameterError);

    NoiseParams wrong_n{5, 30, 7};
    CHECK_THROWS_AS(pool_seq_noise(f, wrong_n, 7), ParameterError);
    CHECK_THROWS_AS(pool_seq_noise(f, NoiseParams{5, 0, 10}, 7), ParameterError);
}

TEST_CASE("frequency table round trip and parse errors") {
    auto f = testutil::make_tensor({0, 5, 10}, 4, 2, TensorKind::noisy);
    Rng rng = make_rng(30, {});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto &v : f.values()) v = u(rng);
    auto g = parse_frequency_table(format_frequency_table(f));
    CHECK(g.generations() == f.generations());
    CHECK(g.kind() == TensorKind::noisy);
    CHECK(g.snp_indices() == f.snp_indices());
    for (std::size_t i = 0; i < f.values().size(); ++i) CHECK(std::abs(g.values()[i] - f.values()[i]) <= 1e-6);

    const std::string bad = "#generations=0,5  replicates=1  kind=ground_truth\n"
                            "0\t1000\t0.5\t0.6\n"
                            "1\t2000\t1.2\t0.6\n";
    try {
        parse_frequency_table(bad);
        FAIL("expected a parse error");
    } catch (const ParseError &e) {
        CHECK(e.line() == 3);
    }

    auto empty = parse_frequency_table("#generations=0,5  replicates=2  kind=ground_truth\n");
    CHECK(empty.snps() == 0);
    CHECK(empty.times() == 2);
}

}  // TEST_SUITE
