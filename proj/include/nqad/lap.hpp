#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nqad/pointcloud.hpp"

namespace nqad {

/// Result of the forward auction between two equal-size point sets.
/// assignment[i] is the target position matched to source position i, or
/// -1 when the round cap ended the auction early. Assigned entries are
/// always injective; when complete is set they form a bijection and
/// satisfy eps-complementary slackness:
///   -d(i, a(i)) - price[a(i)] >= max_j(-d(i,j) - price[j]) - eps.
struct AuctionSolution {
    std::vector<int32_t> assignment;
    std::vector<double> distances;  // d(i, a(i)) for assigned i, else 0
    std::vector<double> prices;
    double epsilon = 0.0;
    uint32_t iterations_run = 0;    // full bidding rounds executed
    bool complete = false;

    double total_distance() const {
        double s = 0.0;
        for (size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] >= 0) s += distances[i];
        return s;
    }
};

/// Forward auction for min-cost assignment on Euclidean distances, bid
/// increment eps, fixed eps (no scaling). One iteration is a sweep in
/// which every source unassigned at the start of the sweep bids once.
/// Stops when all sources are assigned or max_iterations sweeps ran.
AuctionSolution auction_assign(std::span<const Vec3> a, std::span<const Vec3> b, double epsilon,
                               uint32_t max_iterations);

/// Exact min-cost perfect matching plus the dual certificate:
/// row_duals[i] + col_duals[j] <= cost[i][j] for all pairs, with
/// equality on assigned pairs.
struct HungarianResult {
    std::vector<int32_t> assignment;  // row i -> column assignment[i]
    double total_cost = 0.0;
    std::vector<double> row_duals;
    std::vector<double> col_duals;
};

inline constexpr uint32_t kHungarianCap = 512;

/// cost is row-major n x n. Throws beyond the size cap or on non-finite
/// entries; this solver exists as a verification oracle, not a fast path.
HungarianResult hungarian_assign(std::span<const double> cost, uint32_t n,
                                 uint32_t cap = kHungarianCap);

}  // namespace nqad
