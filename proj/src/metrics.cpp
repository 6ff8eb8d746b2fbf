#include "nqad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nqad/error.hpp"
#include "nqad/kdpartition.hpp"
#include "nqad/knn.hpp"
#include "nqad/lap.hpp"
#include "nqad/parallel.hpp"

namespace nqad {

namespace {

double directed_nn_sum(const PointCloud& from, const KnnIndex& to_index) {
    double sum = 0.0;
    for (const Vec3& p : from.pts) sum += to_index.nearest(p).distance;
    return sum;
}

void require_nonempty(const PointCloud& p, const PointCloud& q) {
    if (p.empty() || q.empty()) throw DataError("metric on empty cloud");
}

}  // namespace

double chamfer(const PointCloud& p, const PointCloud& q) {
    require_nonempty(p, q);
    KnnIndex pi(p.pts), qi(q.pts);
    return directed_nn_sum(p, qi) + directed_nn_sum(q, pi);
}

double aug_chamfer(const PointCloud& p, const PointCloud& q) {
    require_nonempty(p, q);
    KnnIndex pi(p.pts), qi(q.pts);
    return std::max(directed_nn_sum(p, qi), directed_nn_sum(q, pi));
}

double emd_exact_mean(const PointCloud& p, const PointCloud& q) {
    require_nonempty(p, q);
    if (p.size() != q.size())
        throw DataError("emd size mismatch: " + std::to_string(p.size()) + " vs " +
                        std::to_string(q.size()));
    const uint32_t n = static_cast<uint32_t>(p.size());
    std::vector<double> cost(size_t(n) * n);
    for (uint32_t i = 0; i < n; ++i)
        for (uint32_t j = 0; j < n; ++j) cost[size_t(i) * n + j] = dist(p[i], q[j]);
    const HungarianResult res = hungarian_assign(cost, n);
    // Recompute the sum in ascending row order so the value is bitwise
    // comparable with an independent enumeration of the same pairing.
    double total = 0.0;
    for (uint32_t i = 0; i < n; ++i) total += cost[size_t(i) * n + res.assignment[i]];
    return total / double(n);
}

MetricReport emkd(const PointCloud& p, const PointCloud& q, int depth, double epsilon,
                  uint32_t max_iterations) {
    require_nonempty(p, q);
    if (p.size() != q.size())
        throw DataError("emkd size mismatch: " + std::to_string(p.size()) + " vs " +
                        std::to_string(q.size()));
    const KdPartition pa = build_partition(p, depth);
    const KdPartition pb = build_partition(q, depth);
    const auto pairs = leaf_pairs(pa, pb);

    std::vector<double> leaf_mean(pairs.size(), 0.0);
    parallel_for(pairs.size(), [&](size_t li) {
        const auto& [sleaf, tleaf] = pairs[li];
        const uint32_t n = static_cast<uint32_t>(sleaf->size());
        std::vector<Vec3> a(n), b(n);
        for (uint32_t i = 0; i < n; ++i) a[i] = p[(*sleaf)[i]];
        for (uint32_t i = 0; i < n; ++i) b[i] = q[(*tleaf)[i]];
        AuctionSolution sol = auction_assign(a, b, epsilon, max_iterations);
        double sum = 0.0;
        for (uint32_t i = 0; i < n; ++i)
            if (sol.assignment[i] >= 0) sum += sol.distances[i];
        if (!sol.complete) {
            // Round cap bound: complete the bijection greedily so the
            // mean still covers every point.
            std::vector<char> taken(n, 0);
            for (uint32_t i = 0; i < n; ++i)
                if (sol.assignment[i] >= 0) taken[sol.assignment[i]] = 1;
            for (uint32_t i = 0; i < n; ++i) {
                if (sol.assignment[i] >= 0) continue;
                double best = std::numeric_limits<double>::infinity();
                uint32_t best_j = 0;
                for (uint32_t j = 0; j < n; ++j) {
                    if (taken[j]) continue;
                    const double d = dist(a[i], b[j]);
                    if (d < best) {
                        best = d;
                        best_j = j;
                    }
                }
                taken[best_j] = 1;
                sol.assignment[i] = static_cast<int32_t>(best_j);
                sum += best;
            }
        }
        leaf_mean[li] = sum / double(n);
    });

    double total = 0.0;
    for (double v : leaf_mean) total += v;

    MetricReport rep;
    rep.kind = MetricKind::emkd;
    rep.value = total / double(pairs.size());
    rep.depth = depth;
    rep.epsilon = epsilon;
    return rep;
}

double sampling_normalizer(const PointCloud& p, uint32_t k) {
    if (p.empty()) throw DataError("sampling normalizer on empty cloud");
    if (k == 0 || k >= p.size())
        throw DataError("sampling normalizer requires 0 < k < M (k=" + std::to_string(k) +
                        ", M=" + std::to_string(p.size()) + ")");
    KnnIndex index(p.pts);
    double sum = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        for (const auto& hit : index.k_nearest(p[i], k, static_cast<int64_t>(i)))
            sum += hit.distance;
    }
    return sum / (double(p.size()) * double(k));
}

double normalized_log_aug_chamfer(const PointCloud& p, const PointCloud& q, uint32_t k) {
    const double da = aug_chamfer(p, q);
    const double t = sampling_normalizer(q, k);
    if (da <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(da / t);
}

}  // namespace nqad
