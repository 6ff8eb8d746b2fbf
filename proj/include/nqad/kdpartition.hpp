#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nqad/pointcloud.hpp"

namespace nqad {

/// Balanced spatial partition of a cloud's indices into 2^depth leaves.
/// At every split the left child takes ceil(n/2) points, so two
/// partitions of equal-size clouds always pair leaves of equal size.
/// Leaves are listed in left-to-right DFS order; indices inside a leaf
/// are sorted ascending.
struct KdPartition {
    int depth = 0;
    std::vector<std::vector<uint32_t>> leaves;
    std::vector<uint8_t> split_axes;     // internal nodes, preorder
    std::vector<double> split_values;    // median per internal node

    size_t leaf_count() const { return leaves.size(); }
};

/// Splits on the axis of maximal coordinate spread (ties to the lower
/// axis index). The median value is the statistical median along that
/// axis; ties for membership go to the left child in original index
/// order. Requires 2^depth <= cloud size.
KdPartition build_partition(const PointCloud& cloud, int depth);

/// Canonical positional pairing of two partitions' leaves. Requires
/// equal depth and pairwise equal leaf sizes.
std::vector<std::pair<const std::vector<uint32_t>*, const std::vector<uint32_t>*>> leaf_pairs(
    const KdPartition& a, const KdPartition& b);

}  // namespace nqad
