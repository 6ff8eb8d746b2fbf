#include "nqad/lap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nqad/error.hpp"

namespace nqad {

AuctionSolution auction_assign(std::span<const Vec3> a, std::span<const Vec3> b, double epsilon,
                               uint32_t max_iterations) {
    if (a.size() != b.size())
        throw DataError("auction size mismatch: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
    if (a.empty()) throw DataError("auction on empty point sets");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw DataError("auction epsilon must be positive and finite");
    for (const Vec3& p : a)
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            throw DataError("non-finite source coordinate in auction");
    for (const Vec3& p : b)
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            throw DataError("non-finite target coordinate in auction");

    const uint32_t n = static_cast<uint32_t>(a.size());
    AuctionSolution sol;
    sol.assignment.assign(n, -1);
    sol.distances.assign(n, 0.0);
    sol.prices.assign(n, 0.0);
    sol.epsilon = epsilon;

    std::vector<int32_t> owner(n, -1);  // target -> source
    uint32_t unassigned = n;

    if (n == 1) {
        sol.assignment[0] = 0;
        sol.distances[0] = dist(a[0], b[0]);
        sol.complete = true;
        return sol;
    }

    std::vector<uint32_t> bidders;
    bidders.reserve(n);
    for (uint32_t round = 0; round < max_iterations && unassigned > 0; ++round) {
        sol.iterations_run = round + 1;
        bidders.clear();
        for (uint32_t i = 0; i < n; ++i)
            if (sol.assignment[i] < 0) bidders.push_back(i);

        for (uint32_t i : bidders) {
            // Scan all targets for the best and second-best value
            // v = -d(i,j) - price[j]; distances on demand.
            const Vec3 src = a[i];
            double best = -std::numeric_limits<double>::infinity();
            double second = best;
            uint32_t best_j = 0;
            double best_d = 0.0;
            for (uint32_t j = 0; j < n; ++j) {
                const double d = dist(src, b[j]);
                const double v = -d - sol.prices[j];
                if (v > best) {
                    second = best;
                    best = v;
                    best_j = j;
                    best_d = d;
                } else if (v > second) {
                    second = v;
                }
            }
            sol.prices[best_j] += (best - second) + epsilon;
            const int32_t prev = owner[best_j];
            if (prev >= 0) {
                sol.assignment[prev] = -1;
            } else {
                --unassigned;
            }
            owner[best_j] = static_cast<int32_t>(i);
            sol.assignment[i] = static_cast<int32_t>(best_j);
            sol.distances[i] = best_d;
        }
    }
    sol.complete = unassigned == 0;
    return sol;
}

HungarianResult hungarian_assign(std::span<const double> cost, uint32_t n, uint32_t cap) {
    if (n == 0) throw DataError("hungarian on empty matrix");
    if (cost.size() != size_t(n) * n) throw DataError("hungarian cost matrix size mismatch");
    if (n > cap)
        throw DataError("hungarian oracle cap exceeded: n=" + std::to_string(n) + " > " +
                        std::to_string(cap));
    for (double c : cost)
        if (!std::isfinite(c)) throw DataError("non-finite cost in hungarian matrix");

    // Shortest augmenting path with potentials (1-based scratch arrays).
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<uint32_t> p(n + 1, 0), way(n + 1, 0);
    for (uint32_t i = 1; i <= n; ++i) {
        p[0] = i;
        uint32_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const uint32_t i0 = p[j0];
            double delta = inf;
            uint32_t j1 = 0;
            for (uint32_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[size_t(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (uint32_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const uint32_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    HungarianResult res;
    res.assignment.assign(n, -1);
    for (uint32_t j = 1; j <= n; ++j)
        if (p[j] != 0) res.assignment[p[j] - 1] = static_cast<int32_t>(j - 1);
    res.total_cost = 0.0;
    for (uint32_t i = 0; i < n; ++i) res.total_cost += cost[size_t(i) * n + res.assignment[i]];
    // v[0] tracks -total under this formulation; recompute duals in the
    // conventional sign so that u_i + v_j <= c_ij with equality when
    // assigned. The loop above maintains exactly that on u[1..n], v[1..n].
    res.row_duals.assign(u.begin() + 1, u.end());
    res.col_duals.assign(v.begin() + 1, v.end());
    return res;
}

}  // namespace nqad
