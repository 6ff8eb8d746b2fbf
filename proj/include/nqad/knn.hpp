#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nqad/pointcloud.hpp"

namespace nqad {

/// Exact nearest-neighbor search over a fixed point set. Results are
/// identical to brute force with ties broken toward the lower index,
/// regardless of tree layout.
class KnnIndex {
public:
    /// Indexes points[ids[i]] for all i; reported indices are the global
    /// ids. With empty ids, indexes the whole set with identity ids.
    explicit KnnIndex(std::span<const Vec3> points, std::span<const uint32_t> ids = {});

    struct Hit {
        uint32_t index = 0;  // global id
        double distance = 0.0;
    };

    /// Nearest point to q; exclude (a global id) is skipped when >= 0.
    Hit nearest(const Vec3& q, int64_t exclude = -1) const;

    /// k nearest points to q sorted by (distance, index) ascending.
    std::vector<Hit> k_nearest(const Vec3& q, uint32_t k, int64_t exclude = -1) const;

    size_t size() const { return pts_.size(); }

private:
    struct Node {
        double split = 0.0;
        int axis = -1;            // -1 marks a leaf
        uint32_t begin = 0, end = 0;
        int32_t left = -1, right = -1;
    };

    int32_t build(uint32_t begin, uint32_t end);
    template <class Visitor>
    void search(int32_t node, const Vec3& q, double& worst, Visitor&& visit) const;

    std::vector<Vec3> pts_;       // reordered copy
    std::vector<uint32_t> ids_;   // global id per reordered point
    std::vector<Node> nodes_;
    int32_t root_ = -1;
};

}  // namespace nqad
