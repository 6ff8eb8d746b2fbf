#include "nqad/kdpartition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nqad/error.hpp"

namespace nqad {

namespace {

void split_node(const PointCloud& cloud, std::vector<uint32_t>& idx, int levels_left,
                KdPartition& out) {
    if (levels_left == 0) {
        std::sort(idx.begin(), idx.end());
        out.leaves.push_back(std::move(idx));
        return;
    }

    double lo[3] = {INFINITY, INFINITY, INFINITY};
    double hi[3] = {-INFINITY, -INFINITY, -INFINITY};
    for (uint32_t i : idx) {
        const Vec3& p = cloud[i];
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;

    const size_t n = idx.size();
    const size_t left_n = (n + 1) / 2;
    auto less = [&](uint32_t a, uint32_t b) {
        const double va = cloud[a][axis], vb = cloud[b][axis];
        return va < vb || (va == vb && a < b);
    };
    std::nth_element(idx.begin(), idx.begin() + (left_n - 1), idx.end(), less);
    const double left_max = cloud[idx[left_n - 1]][axis];
    double median = left_max;
    if (n % 2 == 0) {
        double right_min = INFINITY;
        for (size_t i = left_n; i < n; ++i) right_min = std::min(right_min, cloud[idx[i]][axis]);
        median = 0.5 * (left_max + right_min);
    }
    out.split_axes.push_back(static_cast<uint8_t>(axis));
    out.split_values.push_back(median);

    std::vector<uint32_t> left(idx.begin(), idx.begin() + left_n);
    std::vector<uint32_t> right(idx.begin() + left_n, idx.end());
    idx.clear();
    idx.shrink_to_fit();
    split_node(cloud, left, levels_left - 1, out);
    split_node(cloud, right, levels_left - 1, out);
}

}  // namespace

KdPartition build_partition(const PointCloud& cloud, int depth) {
    if (depth < 0) throw DataError("partition depth must be >= 0");
    const size_t n_leaves = size_t(1) << depth;
    if (n_leaves > cloud.size())
        throw DataError("depth " + std::to_string(depth) + " needs at least " +
                        std::to_string(n_leaves) + " points, cloud has " +
                        std::to_string(cloud.size()));
    KdPartition out;
    out.depth = depth;
    out.leaves.reserve(n_leaves);
    std::vector<uint32_t> all(cloud.size());
    for (uint32_t i = 0; i < cloud.size(); ++i) all[i] = i;
    split_node(cloud, all, depth, out);
    return out;
}

std::vector<std::pair<const std::vector<uint32_t>*, const std::vector<uint32_t>*>> leaf_pairs(
    const KdPartition& a, const KdPartition& b) {
    if (a.depth != b.depth)
        throw DataError("partition depth mismatch: " + std::to_string(a.depth) + " vs " +
                        std::to_string(b.depth));
    std::vector<std::pair<const std::vector<uint32_t>*, const std::vector<uint32_t>*>> out;
    out.reserve(a.leaves.size());
    for (size_t i = 0; i < a.leaves.size(); ++i) {
        if (a.leaves[i].size() != b.leaves[i].size())
            throw DataError("leaf " + std::to_string(i) + " size mismatch: " +
                            std::to_string(a.leaves[i].size()) + " vs " +
                            std::to_string(b.leaves[i].size()));
        out.emplace_back(&a.leaves[i], &b.leaves[i]);
    }
    return out;
}

}  // namespace nqad
