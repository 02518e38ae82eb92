#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "evoforecast/error.hpp"
#include "evoforecast/wright_fisher.hpp"
#include "helpers.hpp"

using namespace evo;
using namespace evo::wf;

namespace {

// Neutral WF chains recorded at 0 and t, one replicate per column.
FrequencyTensor neutral_pair(double ne, int t, std::size_t snps, std::size_t reps, std::uint64_t seed) {
    auto start = testutil::make_tensor({0}, snps, reps);
    Rng rng = make_rng(seed, {});
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (auto &v : start.values()) v = u(rng);
    std::vector<double> s(snps, 0.0);
    auto sim = simulate_wf(start, s, ne, t, t, seed);
    sim.set_kind(TensorKind::ground_truth);
    return sim;
}

std::vector<double> deterministic_trajectory(double s, double f0, const std::vector<int> &generations) {
    std::vector<double> out;
    double f = f0;
    int g = 0;
    for (int target : generations) {
        for (; g < target; ++g) f = fitness_map(f, s);
        out.push_back(f);
    }
    return out;
}

}  // namespace

TEST_SUITE("wright_fisher") {

TEST_CASE("fitness map values") {
    CHECK(fitness_map(0.0, 0.3) == 0.0);
    CHECK(fitness_map(1.0, 0.3) == 1.0);
    CHECK(fitness_map(0.5, 0.1) == doctest::Approx(0.5375 / 1.05).epsilon(1e-12));
    CHECK(fitness_map(0.5, 0.1) == doctest::Approx(0.511905).epsilon(1e-6));
    CHECK_THROWS_AS(fitness_map(0.5, -1.0), ParameterError);
}

TEST_CASE("fitness map is the identity exactly when s = 0") {
    for (int k = 0; k <= 100; ++k) {
        const double x = k / 100.0;
        CHECK(std::abs(fitness_map(x, 0.0) - x) <= 1e-15);
        if (k > 0 && k < 100) {
            CHECK(fitness_map(x, 0.05) != x);
            CHECK(fitness_map(x, -0.05) != x);
        }
    }
    // the uncorrected denominator does not reduce to the identity
    CHECK(fitness_map(0.5, 0.0, true) != doctest::Approx(0.5));
}

TEST_CASE("wf_step absorbing states and drift variance") {
    Rng rng = make_rng(1, {});
    WfParams p{100, 0.0, 1, 1, false};
    CHECK(wf_step(0.0, p, rng) == 0.0);
    CHECK(wf_step(1.0, p, rng) == 1.0);

    std::vector<double> x(100000);
    for (auto &v : x) v = wf_step(0.5, p, rng);
    CHECK(testutil::variance(x) == doctest::Approx(0.00125).epsilon(0.05));

    WfParams big{1e6, 0.2, 1, 1, false};
    std::vector<double> y(1000);
    for (auto &v : y) v = wf_step(0.3, big, rng);
    CHECK(std::abs(testutil::mean(y) - fitness_map(0.3, 0.2)) < 1e-3);
}

TEST_CASE("wf_step stays in range for random parameters") {
    Rng rng = make_rng(2, {});
    std::uniform_real_distribution<double> uf(0.0, 1.0), us(-0.5, 1.0), ulog(0.0, 5.0);
    for (int k = 0; k < 2000; ++k) {
        WfParams p{std::pow(10.0, ulog(rng)), us(rng), 1, 1, false};
        const double f = k % 10 == 0 ? (k % 20 == 0 ? 0.0 : 1.0) : uf(rng);
        const double g = wf_step(f, p, rng);
        CHECK((g >= 0.0 && g <= 1.0));
        if (f == 0.0 || f == 1.0) CHECK(g == f);
    }
}

TEST_CASE("simulate_wf: horizon zero, determinism, neutral variance") {
    auto start = testutil::make_tensor({0, 5}, 10, 2);
    for (std::size_t i = 0; i < start.values().size(); ++i) start.values()[i] = 0.05 + 0.09 * static_cast<double>(i % 10);
    std::vector<double> s(10, 0.01);

    auto zero = simulate_wf(start, s, 200, 0, 5, 1);
    CHECK(zero.times() == 1);
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t r = 0; r < 2; ++r) CHECK(zero.at(0, i, r) == start.at(1, i, r));
    }

    auto a = simulate_wf(start, s, 200, 20, 5, 9);
    auto b = simulate_wf(start, s, 200, 20, 5, 9, 3);
    CHECK(a.generations() == std::vector<int>{5, 10, 15, 20, 25});
    CHECK(std::ranges::equal(a.values(), b.values()));

    const std::size_t n = 10000;
    auto half = testutil::make_tensor({0}, n, 1);
    for (auto &v : half.values()) v = 0.5;
    std::vector<double> zeros(n, 0.0);
    auto sim = simulate_wf(half, zeros, 300, 45, 5, 3);
    for (std::size_t t = 1; t < sim.times(); ++t) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = sim.at(t, i, 0);
        const int gens = sim.generations()[t];
        const double expected = 0.25 * (1.0 - std::pow(1.0 - 1.0 / 600.0, gens));
        CHECK(testutil::variance(x) == doctest::Approx(expected).epsilon(0.10));
    }
}

TEST_CASE("temporal Ne estimate is consistent") {
    auto f = neutral_pair(500, 30, 10000, 1, 4);
    const double ne = estimate_ne(f, 0, 30, std::nullopt);
    CHECK(ne == doctest::Approx(500).epsilon(0.20));

    // doubling t with the same per-generation drift
    auto g = neutral_pair(500, 60, 10000, 1, 5);
    CHECK(estimate_ne(g, 0, 60, std::nullopt) == doctest::Approx(ne).epsilon(0.25));

    // doubling the true size doubles the estimate
    auto h = neutral_pair(1000, 30, 10000, 1, 6);
    CHECK(estimate_ne(h, 0, 30, std::nullopt) == doctest::Approx(2.0 * ne).epsilon(0.25));
}

TEST_CASE("Ne estimation fails cleanly without drift signal") {
    auto f = testutil::make_tensor({0, 30}, 200, 2);
    for (std::size_t i = 0; i < 200; ++i) {
        for (std::size_t r = 0; r < 2; ++r) f.at(0, i, r) = f.at(1, i, r) = 0.2 + 0.003 * static_cast<double>(i);
    }
    CHECK_THROWS_AS(estimate_ne(f, 0, 30, std::nullopt), EstimationError);
    CHECK_THROWS_AS(estimate_ne(f, 0, 30, poolseq::NoiseParams{}), EstimationError);

    auto few = testutil::make_tensor({0, 30}, 50, 1);
    for (auto &v : few.values()) v = 0.4;
    CHECK_THROWS_AS(estimate_ne(few, 0, 30, std::nullopt), DataError);
}

TEST_CASE("selection estimate on deterministic trajectories") {
    const auto gens = testutil::every(5, 30);
    CHECK(estimate_s(std::vector<double>(gens.size(), 0.5), gens, 1) == 0.0);

    for (double s : {0.05, 0.1}) {
        auto traj = deterministic_trajectory(s, 0.5, gens);
        CHECK(estimate_s(traj, gens, 1) == doctest::Approx(s).epsilon(0.10));
    }
    for (double mag : {0.02, 0.05, 0.1, 0.2}) {
        for (double sign : {1.0, -1.0}) {
            auto traj = deterministic_trajectory(sign * mag, 0.4, gens);
            CHECK(estimate_s(traj, gens, 1) * sign > 0.0);
        }
    }

    auto traj = deterministic_trajectory(0.1, 0.3, gens);
    std::vector<double> mirrored(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) mirrored[k] = 1.0 - traj[k];
    for (auto mode : {RegressionMode::pooled, RegressionMode::per_replicate, RegressionMode::two_point}) {
        CHECK(estimate_s(mirrored, gens, 1, mode) == doctest::Approx(-estimate_s(traj, gens, 1, mode)).epsilon(1e-12));
    }
}

TEST_CASE("selection estimate over replicates") {
    const auto gens = testutil::every(5, 30);
    auto a = deterministic_trajectory(0.1, 0.3, gens);
    auto b = deterministic_trajectory(0.1, 0.6, gens);
    std::vector<double> both = a;
    both.insert(both.end(), b.begin(), b.end());
    const double pooled = estimate_s(both, gens, 2);
    const double per = estimate_s(both, gens, 2, RegressionMode::per_replicate);
    CHECK(pooled == doctest::Approx(0.1).epsilon(0.10));
    CHECK(per == doctest::Approx(0.1).epsilon(0.10));
    CHECK_THROWS_AS(estimate_s(both, gens, 3), ParameterError);
}

}  // TEST_SUITE
