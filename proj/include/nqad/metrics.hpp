#pragma once

#include <cstdint>
#include <optional>

#include "nqad/pointcloud.hpp"

namespace nqad {

enum class MetricKind { chamfer, aug_chamfer, emd_exact_mean, emkd };

struct MetricReport {
    MetricKind kind = MetricKind::chamfer;
    double value = 0.0;
    std::optional<int> depth;
    std::optional<double> epsilon;
    std::optional<double> normalizer;
};

/// Sum over p of the nearest-neighbor distance into q plus the symmetric
/// term. Exact (spatial index, identical to brute force).
double chamfer(const PointCloud& p, const PointCloud& q);

/// Max of the two directed nearest-neighbor sums.
double aug_chamfer(const PointCloud& p, const PointCloud& q);

/// Exact earth mover's distance divided by the point count, solved with
/// the Hungarian oracle. Sizes must match and stay within the oracle cap.
double emd_exact_mean(const PointCloud& p, const PointCloud& q);

/// Divide-and-conquer EMD upper bound: partition both clouds into
/// 2^depth leaves, solve each canonical leaf pair with the auction
/// algorithm, and average the per-leaf mean distances. Sources left
/// unassigned by the round cap are matched greedily to the cheapest
/// remaining target of their leaf, so the result is always a mean over a
/// true bijection (hence >= the exact EMD mean).
MetricReport emkd(const PointCloud& p, const PointCloud& q, int depth, double epsilon = 1.0,
                  uint32_t max_iterations = 100);

/// Sampling-rate proxy T: mean distance to the k nearest neighbors,
/// averaged over the cloud. Requires k < M.
double sampling_normalizer(const PointCloud& p, uint32_t k = 5);

/// log(aug_chamfer(p, q) / T(q)); -inf when the distance is zero.
double normalized_log_aug_chamfer(const PointCloud& p, const PointCloud& q, uint32_t k = 5);

}  // namespace nqad
