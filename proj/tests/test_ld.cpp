#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "evoforecast/error.hpp"
#include "evoforecast/ld.hpp"
#include "evoforecast/simulator.hpp"
#include "helpers.hpp"

using namespace evo;
using namespace evo::ld;

namespace {

// Two-locus pool of 2N haplotypes with the given haplotype counts
// (00, 01, 10, 11), allele 0 first.
HaplotypePool two_locus(std::size_t n00, std::size_t n01, std::size_t n10, std::size_t n11) {
    const std::size_t total = n00 + n01 + n10 + n11;
    HaplotypePool pool(default_positions(2), total / 2);
    std::size_t h = 0;
    auto put = [&](std::size_t n, std::uint8_t a, std::uint8_t b) {
        for (std::size_t k = 0; k < n; ++k, ++h) {
            pool.set_allele(0, h, a);
            pool.set_allele(1, h, b);
        }
    };
    put(n00, 0, 0);
    put(n01, 0, 1);
    put(n10, 1, 0);
    put(n11, 1, 1);
    return pool;
}

FrequencyTensor pair_tensor(const std::vector<double> &a, const std::vector<double> &b) {
    std::vector<int> gens;
    for (std::size_t k = 0; k < a.size(); ++k) gens.push_back(static_cast<int>(5 * k));
    auto f = testutil::make_tensor(gens, 2, 1, TensorKind::noisy);
    for (std::size_t t = 0; t < a.size(); ++t) {
        f.at(t, 0, 0) = a[t];
        f.at(t, 1, 0) = b[t];
    }
    return f;
}

}  // namespace

TEST_SUITE("ld") {

TEST_CASE("r2 from haplotype counts") {
    CHECK(r2_from_haplotypes(two_locus(5, 0, 0, 5), 0, 1) == doctest::Approx(1.0));
    CHECK(r2_from_haplotypes(two_locus(5, 5, 5, 5), 0, 1) == doctest::Approx(0.0));
    // p_A = 0.6, p_B = 0.4, p_AB = 0.3
    CHECK(r2_from_haplotypes(two_locus(3, 3, 1, 3), 0, 1) == doctest::Approx(0.0625));
    CHECK_THROWS_AS(r2_from_haplotypes(two_locus(5, 5, 0, 0), 0, 1), DataError);
}

TEST_CASE("r2 symmetry and allele-coding invariance") {
    Rng rng = make_rng(1, {});
    auto pool = sim::apply_ld_noise(sim::build_max_ld_haplotypes(sim::sample_starting_frequencies(20, rng), 30), 0.1, rng);
    auto flipped = pool;
    for (std::size_t h = 0; h < pool.haplotypes(); ++h) flipped.set_allele(3, h, 1 - pool.allele(3, h));
    for (std::size_t j = 0; j < 20; ++j) {
        if (j == 3) continue;
        const double r = r2_from_haplotypes(pool, 3, j);
        CHECK(r == doctest::Approx(r2_from_haplotypes(pool, j, 3)).epsilon(1e-12));
        CHECK(r == doctest::Approx(r2_from_haplotypes(flipped, 3, j)).epsilon(1e-12));
        CHECK((r >= 0.0 && r <= 1.0 + 1e-12));
    }
}

TEST_CASE("scalar product baseline") {
    std::vector<double> half(7, 0.5), zero(7, 0.0);
    CHECK(scalar_product_baseline(pair_tensor(half, half), 0, 1) == doctest::Approx(1.75));
    CHECK(scalar_product_baseline(pair_tensor(half, zero), 0, 1) == 0.0);

    // no centring: a mirrored pair is scored by its raw dot product
    std::vector<double> up{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}, down(7);
    double raw = 0.0;
    for (std::size_t k = 0; k < 7; ++k) {
        down[k] = 1.0 - up[k];
        raw += up[k] * down[k];
    }
    CHECK(scalar_product_baseline(pair_tensor(up, down), 0, 1) == doctest::Approx(raw));
}

TEST_CASE("LDx-style frequency correlation") {
    std::vector<double> up{0.1, 0.2, 0.25, 0.4, 0.5, 0.65, 0.7}, down(7), flat(7, 0.3);
    for (std::size_t k = 0; k < 7; ++k) down[k] = 1.0 - up[k];
    CHECK(ldx_freq_estimate(pair_tensor(up, up), 0, 1) == doctest::Approx(1.0));
    CHECK(ldx_freq_estimate(pair_tensor(up, flat), 0, 1) == 0.0);
    CHECK(ldx_freq_estimate(pair_tensor(up, down), 0, 1) == doctest::Approx(1.0));

    Rng rng = make_rng(2, {});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        std::vector<double> a(7), b(7), a_mirror(7);
        for (std::size_t t = 0; t < 7; ++t) {
            a[t] = u(rng);
            b[t] = u(rng);
            a_mirror[t] = 1.0 - a[t];
        }
        const double v = ldx_freq_estimate(pair_tensor(a, b), 0, 1);
        CHECK((v >= 0.0 && v <= 1.0));
        CHECK(v == doctest::Approx(ldx_freq_estimate(pair_tensor(b, a), 0, 1)).epsilon(1e-12));
        CHECK(v == doctest::Approx(ldx_freq_estimate(pair_tensor(a_mirror, b), 0, 1)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(ldx_freq_estimate(pair_tensor({0.1, 0.2}, {0.3, 0.4}), 0, 1), DataError);
}

TEST_CASE("LDx-style estimate decreases with jitter") {
    Rng rng = make_rng(3, {});
    std::uniform_real_distribution<double> u(0.2, 0.8);
    std::vector<double> means;
    for (double sigma : {0.01, 0.05, 0.15}) {
        std::normal_distribution<double> jitter(0.0, sigma);
        double sum = 0.0;
        const int pairs = 500;
        for (int k = 0; k < pairs; ++k) {
            std::vector<double> focal(7), copy(7);
            double x = u(rng);
            for (std::size_t t = 0; t < 7; ++t) {
                focal[t] = x;
                x = std::clamp(x + 0.05 * (t % 2 == 0 ? 1.0 : -0.5) + 0.05 * (u(rng) - 0.5), 0.0, 1.0);
                copy[t] = std::clamp(focal[t] + jitter(rng), 0.0, 1.0);
            }
            sum += ldx_freq_estimate(pair_tensor(focal, copy), 0, 1);
        }
        means.push_back(sum / pairs);
    }
    CHECK(means[0] > means[1]);
    CHECK(means[1] > means[2]);
}

TEST_CASE("Spearman correlation") {
    std::vector<double> a{1, 2, 3, 4, 5}, rev{5, 4, 3, 2, 1};
    CHECK(spearman(a, a) == doctest::Approx(1.0));
    CHECK(spearman(a, rev) == doctest::Approx(-1.0));
    std::vector<double> x{1, 2, 3}, y{3, 1, 2};
    CHECK(spearman(x, y) == doctest::Approx(-0.5));
    CHECK(average_ranks(std::vector<double>{2.0, 1.0, 2.0, 3.0}) == std::vector<double>{2.5, 1.0, 2.5, 4.0});
    CHECK_THROWS_AS(spearman(std::vector<double>{1.0}, std::vector<double>{1.0}), DataError);
}

TEST_CASE("evaluate_ld matches pairs and ignores monotone transforms") {
    Rng rng = make_rng(4, {});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LdTable truth, est;
    for (std::size_t i = 0; i < 40; ++i) {
        const double r2 = u(rng);
        truth.push_back({i, i + 1, Method::ground_truth, r2});
        est.push_back({i, i + 1, Method::scalar_product, r2 + 0.3 * u(rng)});
        est.push_back({i, i + 1, Method::ldx_freq, r2});
    }
    auto rho = evaluate_ld(est, truth);
    CHECK(rho.at(Method::ldx_freq) == doctest::Approx(1.0));
    const double base = rho.at(Method::scalar_product);

    LdTable transformed = est, truth_t = truth;
    for (auto &r : transformed) r.value = std::exp(3.0 * r.value) - 7.0;
    for (auto &r : truth_t) r.value = std::pow(r.value, 3.0);
    std::reverse(transformed.begin(), transformed.end());
    CHECK(evaluate_ld(transformed, truth_t).at(Method::scalar_product) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("AFC pair filter") {
    auto f = testutil::make_tensor({0, 30}, 3, 1, TensorKind::noisy);
    f.at(0, 0, 0) = 0.5;
    f.at(1, 0, 0) = 0.52;  // AFC 0.02
    f.at(0, 1, 0) = 0.2;
    f.at(1, 1, 0) = 0.5;  // AFC 0.30
    f.at(0, 2, 0) = 0.1;
    f.at(1, 2, 0) = 0.9;  // AFC 0.80
    std::vector<SnpPair> pairs{{0, 1}, {1, 2}, {0, 2}};
    CHECK(filter_pairs(f, pairs, 0.0, 30).size() == 3);
    CHECK(filter_pairs(f, pairs, 1.0, 30).empty());
    auto kept = filter_pairs(f, pairs, 0.05, 30);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0] == SnpPair{1, 2});
}

TEST_CASE("window pairs and table round trip") {
    auto f = testutil::make_tensor({0, 5}, 10, 1, TensorKind::noisy);
    auto pairs = window_pairs(f, 2);
    CHECK(pairs.size() == 6 * 4);
    for (auto [i, j] : pairs) {
        CHECK(i != j);
        CHECK((i >= 2 && i < 8));
        CHECK((j + 2 >= i && j <= i + 2));
    }
    LdTable t{{1, 2, Method::ground_truth, 0.25}, {1, 3, Method::vae_similarity, -0.5}};
    auto back = parse_ld_table(format_ld_table(t));
    REQUIRE(back.size() == 2);
    CHECK(back[1].method == Method::vae_similarity);
    CHECK(back[1].value == doctest::Approx(-0.5));
}

}  // TEST_SUITE
