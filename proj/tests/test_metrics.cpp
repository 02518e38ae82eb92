#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "evoforecast/error.hpp"
#include "evoforecast/metrics.hpp"
#include "helpers.hpp"

using namespace evo;
using namespace evo::metrics;

namespace {

struct Triple {
    FrequencyTensor truth, prediction, baseline;
};

// truth/prediction over 0..50 (c = 5), baseline over 0..30.
Triple random_triple(std::size_t snps, std::size_t reps, std::uint64_t seed) {
    Rng rng = make_rng(seed, {});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Triple t{testutil::make_tensor(testutil::every(5, 50), snps, reps),
        testutil::make_tensor({35, 40, 45, 50}, snps, reps, TensorKind::predicted),
        testutil::make_tensor(testutil::every(5, 30), snps, reps, TensorKind::noisy)};
    for (auto *f : {&t.truth, &t.prediction, &t.baseline}) {
        for (auto &v : f->values()) v = u(rng);
    }
    return t;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("AFC examples") {
    auto f = testutil::make_tensor({0, 5}, 1, 2);
    for (auto &v : f.values()) v = 0.4;
    CHECK(afc(f, 0, 5)[0] == 0.0);

    auto one = testutil::make_tensor({0, 5}, 1, 1);
    one.at(0, 0, 0) = 0.5;
    one.at(1, 0, 0) = 0.8;
    CHECK(afc(one, 0, 5)[0] == doctest::Approx(0.3));

    f.at(0, 0, 0) = 0.5;
    f.at(1, 0, 0) = 0.7;
    f.at(0, 0, 1) = 0.5;
    f.at(1, 0, 1) = 0.3;
    CHECK(afc(f, 0, 5)[0] == doctest::Approx(0.2));
}

TEST_CASE("AFC range and replicate permutation invariance") {
    auto t = random_triple(30, 4, 1);
    auto a = afc(t.truth, 0, 50);
    auto permuted = t.truth;
    for (std::size_t s = 0; s < t.truth.times(); ++s) {
        for (std::size_t i = 0; i < 30; ++i) {
            for (std::size_t r = 0; r < 4; ++r) permuted.at(s, i, r) = t.truth.at(s, i, 3 - r);
        }
    }
    auto b = afc(permuted, 0, 50);
    for (std::size_t i = 0; i < 30; ++i) {
        CHECK((a[i] >= 0.0 && a[i] <= 1.0));
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
}

TEST_CASE("relative distance: calibration and hand example") {
    auto t = random_triple(20, 3, 2);
    // a baseline-valued prediction: every test point equals the last observed one
    auto flat = t.prediction;
    for (std::size_t s = 0; s < flat.times(); ++s) {
        for (std::size_t i = 0; i < 20; ++i) {
            for (std::size_t r = 0; r < 3; ++r) flat.at(s, i, r) = t.baseline.at(t.baseline.times() - 1, i, r);
        }
    }
    auto truth_as_pred = t.truth.slice_times(7, 11);
    for (auto a : {Aggregation::mean, Aggregation::std}) {
        for (std::size_t j = 1; j <= 4; ++j) {
            CHECK(relative_distribution_distance(t.truth, flat, t.baseline, a, j) == 0.0);
            for (double d : relative_distance_terms(t.truth, truth_as_pred, t.baseline, a, j)) CHECK(d <= 0.0);
        }
    }

    auto truth = testutil::make_tensor({30, 35}, 1, 2);
    truth.at(1, 0, 0) = 0.6;
    truth.at(1, 0, 1) = 0.8;
    auto pred = testutil::make_tensor({35}, 1, 2, TensorKind::predicted);
    pred.at(0, 0, 0) = pred.at(0, 0, 1) = 0.7;
    auto base = testutil::make_tensor({30}, 1, 2, TensorKind::noisy);
    base.at(0, 0, 0) = base.at(0, 0, 1) = 0.5;
    CHECK(relative_distribution_distance(truth, pred, base, Aggregation::mean, 1) == doctest::Approx(-0.2));
}

TEST_CASE("relative distance antisymmetry and SNP permutation invariance") {
    auto t = random_triple(25, 3, 3);
    // prediction shaped like the baseline so the roles can be exchanged
    auto base_like = t.baseline;
    auto pred_as_base = t.baseline;
    for (std::size_t i = 0; i < 25; ++i) {
        for (std::size_t r = 0; r < 3; ++r) pred_as_base.at(pred_as_base.times() - 1, i, r) = t.prediction.at(0, i, r);
    }
    auto base_as_pred = t.prediction.slice_times(0, 1);
    for (std::size_t i = 0; i < 25; ++i) {
        for (std::size_t r = 0; r < 3; ++r) base_as_pred.at(0, i, r) = base_like.at(base_like.times() - 1, i, r);
    }
    for (auto a : {Aggregation::mean, Aggregation::std}) {
        const double d = relative_distribution_distance(t.truth, t.prediction, t.baseline, a, 1);
        const double swapped = relative_distribution_distance(t.truth, base_as_pred, pred_as_base, a, 1);
        CHECK(swapped == doctest::Approx(-d).epsilon(1e-12));
    }

    std::vector<std::size_t> order(25);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::reverse(order.begin(), order.end());
    const double d = relative_distribution_distance(t.truth, t.prediction, t.baseline, Aggregation::mean, 2);
    const double p = relative_distribution_distance(t.truth.select_rows(order), t.prediction.select_rows(order),
        t.baseline.select_rows(order), Aggregation::mean, 2);
    CHECK(p == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("relative distance over a SNP subset and errors") {
    auto t = random_triple(10, 2, 4);
    std::vector<std::size_t> subset{1, 4, 7};
    CHECK(relative_distance_terms(t.truth, t.prediction, t.baseline, Aggregation::mean, 1, subset).size() == 3);
    CHECK_THROWS(relative_distribution_distance(t.truth, t.prediction, t.baseline, Aggregation::mean, 9));

    auto single = testutil::make_tensor({0, 5}, 2, 1);
    CHECK_THROWS_AS(aggregate(single, 0, 0, Aggregation::std), DataError);
}

TEST_CASE("cohorts") {
    Rng rng = make_rng(5, {});
    auto all = build_cohorts({}, 100, rng, 500, 9000);
    CHECK(all.no_targets.size() == 100);
    CHECK(all.clamped);

    sim::TraitModel one{{{550, 1.0}}};
    auto c = build_cohorts(one, 1100, rng, 500, 9000);
    REQUIRE(c.no_targets.size() == 50 + 49);
    CHECK(c.no_targets.front() == 0);
    CHECK(c.no_targets[49] == 49);
    CHECK(c.no_targets[50] == 1051);
    CHECK(c.no_targets.back() == 1099);
    CHECK(c.targets == std::vector<std::size_t>{550});

    sim::TraitModel many{{{3000, 1.0}, {9000, 1.0}, {15000, 1.0}}};
    auto m = build_cohorts(many, 20000, rng, 500, 9000);
    CHECK(m.no_targets.size() == 9000);
    CHECK(!m.clamped);
    CHECK(std::is_sorted(m.no_targets.begin(), m.no_targets.end()));
    for (auto s : m.no_targets) {
        for (const auto &t : many.targets) CHECK((s > t.locus + 500 || s + 500 < t.locus));
    }
}

TEST_CASE("bootstrap confidence interval") {
    std::vector<double> same(50, 0.3);
    auto [lo, hi] = confidence_interval(same);
    CHECK(lo == 0.3);
    CHECK(hi == 0.3);

    Rng rng = make_rng(6, {});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> x(10000);
    for (auto &v : x) v = normal(rng);
    const double m = testutil::mean(x);
    auto [a, b] = confidence_interval(x, 0.95, 1);
    CHECK(a < m);
    CHECK(b > m);
    CHECK(std::abs((b - m) - (m - a)) < 0.1 * (b - a));

    auto [p, q] = confidence_interval(x, 0.0, 1);
    CHECK(p == q);
    CHECK_THROWS_AS(confidence_interval(std::vector<double>{}, 0.95, 1), DataError);
}

}  // TEST_SUITE
