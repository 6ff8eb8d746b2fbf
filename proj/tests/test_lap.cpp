#include <doctest.h>

#include <cmath>
#include <set>

#include "nqad/error.hpp"
#include "nqad/lap.hpp"
#include "oracles.hpp"

using namespace nqad;

namespace {

void check_injective(const AuctionSolution& sol) {
    std::set<int32_t> used;
    for (int32_t a : sol.assignment)
        if (a >= 0) CHECK(used.insert(a).second);
}

// eps-complementary slackness on every assigned pair.
void check_eps_cs(const AuctionSolution& sol, const PointCloud& a, const PointCloud& b) {
    const uint32_t n = static_cast<uint32_t>(a.size());
    for (uint32_t i = 0; i < n; ++i) {
        if (sol.assignment[i] < 0) continue;
        const double own = -sol.distances[i] - sol.prices[sol.assignment[i]];
        double best = -INFINITY;
        for (uint32_t j = 0; j < n; ++j)
            best = std::max(best, -dist(a[i], b[j]) - sol.prices[j]);
        CHECK(own >= best - sol.epsilon - 1e-12);
    }
}

}  // namespace

TEST_SUITE("lap") {

TEST_CASE("auction on identical sets finds the zero-cost matching") {
    const PointCloud c = oracle::random_cloud(32, 1);
    const AuctionSolution sol = auction_assign(c.pts, c.pts, 1e-9, 100000);
    REQUIRE(sol.complete);
    CHECK(sol.total_distance() <= 32 * 1e-9);
}

TEST_CASE("two points with a dominant diagonal pick the identity") {
    PointCloud a, b;
    a.pts = {{0, 0, 0}, {10, 0, 0}};
    b.pts = {{0, 0, 0}, {10, 0, 0}};
    const AuctionSolution sol = auction_assign(a.pts, b.pts, 0.1, 1000);
    REQUIRE(sol.complete);
    CHECK(sol.assignment[0] == 0);
    CHECK(sol.assignment[1] == 1);
}

TEST_CASE("auction cost is within n*eps of the Hungarian optimum") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const PointCloud a = oracle::random_cloud(50, 200 + seed);
        const PointCloud b = oracle::random_cloud(50, 300 + seed);
        const double eps = 1e-3;
        const AuctionSolution sol = auction_assign(a.pts, b.pts, eps, 100000);
        REQUIRE(sol.complete);
        std::vector<double> cost(50 * 50);
        for (uint32_t i = 0; i < 50; ++i)
            for (uint32_t j = 0; j < 50; ++j) cost[i * 50 + j] = dist(a[i], b[j]);
        const HungarianResult hung = hungarian_assign(cost, 50);
        CHECK(sol.total_distance() >= hung.total_cost - 1e-9);
        CHECK(sol.total_distance() <= hung.total_cost + 50 * eps + 1e-9);
        check_eps_cs(sol, a, b);
    }
}

TEST_CASE("auction stays injective when the round cap cuts it short") {
    const PointCloud a = oracle::random_cloud(64, 11);
    const PointCloud b = oracle::random_cloud(64, 12);
    const AuctionSolution sol = auction_assign(a.pts, b.pts, 1e-6, 1);
    CHECK(sol.iterations_run == 1);
    check_injective(sol);
    check_eps_cs(sol, a, b);
}

TEST_CASE("prices are non-decreasing over rounds") {
    // Deterministic sweeps: a run capped at r rounds is a prefix of a
    // run capped at r+1 rounds, so prices must grow monotonically in r.
    const PointCloud a = oracle::random_cloud(24, 21);
    const PointCloud b = oracle::random_cloud(24, 22);
    std::vector<double> prev(24, 0.0);
    for (uint32_t rounds = 1; rounds <= 12; ++rounds) {
        const AuctionSolution sol = auction_assign(a.pts, b.pts, 0.01, rounds);
        for (size_t j = 0; j < prev.size(); ++j) CHECK(sol.prices[j] >= prev[j] - 1e-15);
        prev = sol.prices;
        if (sol.complete) break;
    }
}

TEST_CASE("auction input validation") {
    PointCloud a, b;
    a.pts = {{0, 0, 0}};
    b.pts = {{0, 0, 0}, {1, 1, 1}};
    CHECK_THROWS_AS(auction_assign(a.pts, b.pts, 1.0, 10), DataError);
    b.pts = {{NAN, 0, 0}};
    CHECK_THROWS_AS(auction_assign(a.pts, b.pts, 1.0, 10), DataError);
    b.pts = {{0, 0, 0}};
    CHECK_THROWS_AS(auction_assign(a.pts, b.pts, 0.0, 10), DataError);
}

TEST_CASE("hungarian: diagonal-0 matrix picks the identity") {
    const uint32_t n = 4;
    std::vector<double> cost(n * n, 1.0);
    for (uint32_t i = 0; i < n; ++i) cost[i * n + i] = 0.0;
    const HungarianResult res = hungarian_assign(cost, n);
    CHECK(res.total_cost == 0.0);
    for (uint32_t i = 0; i < n; ++i) CHECK(res.assignment[i] == int32_t(i));
}

TEST_CASE("hungarian: 3x3 example costs 5") {
    const std::vector<double> cost = {4, 1, 3, 2, 0, 5, 3, 2, 2};
    CHECK(oracle::assignment_brute(cost, 3) == 5.0);  // oracle first
    const HungarianResult res = hungarian_assign(cost, 3);
    CHECK(res.total_cost == 5.0);
}

TEST_CASE("hungarian equals brute force on random 8x8 matrices") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed, "hungarian_test");
        std::vector<double> cost(64);
        for (double& c : cost) c = rng.uniform01();
        const double brute = oracle::assignment_brute(cost, 8);
        const HungarianResult res = hungarian_assign(cost, 8);
        CHECK(res.total_cost == doctest::Approx(brute).epsilon(1e-12));
    }
}

TEST_CASE("hungarian dual certificate: feasible and tight on assigned pairs") {
    Rng rng(5, "hungarian_cert");
    const uint32_t n = 40;
    std::vector<double> cost(n * n);
    for (double& c : cost) c = rng.uniform01();
    const HungarianResult res = hungarian_assign(cost, n);
    double dual_sum = 0.0;
    for (uint32_t i = 0; i < n; ++i) {
        for (uint32_t j = 0; j < n; ++j)
            CHECK(res.row_duals[i] + res.col_duals[j] <= cost[i * n + j] + 1e-9);
        CHECK(res.row_duals[i] + res.col_duals[res.assignment[i]] ==
              doctest::Approx(cost[i * n + res.assignment[i]]).epsilon(1e-9));
        dual_sum += res.row_duals[i] + res.col_duals[i];
    }
    CHECK(dual_sum == doctest::Approx(res.total_cost).epsilon(1e-9));
}

TEST_CASE("hungarian cap and validation") {
    std::vector<double> cost(4, 0.0);
    CHECK_THROWS_AS(hungarian_assign(cost, 2, 1), DataError);
    cost[1] = INFINITY;
    CHECK_THROWS_AS(hungarian_assign(cost, 2), DataError);
}

}  // TEST_SUITE
