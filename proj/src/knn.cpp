#include "nqad/knn.hpp"

#include <algorithm>
#include <cmath>

#include "nqad/error.hpp"

namespace nqad {

namespace {
constexpr uint32_t kLeafSize = 16;
}

KnnIndex::KnnIndex(std::span<const Vec3> points, std::span<const uint32_t> ids) {
    if (ids.empty()) {
        pts_.assign(points.begin(), points.end());
        ids_.resize(points.size());
        for (uint32_t i = 0; i < points.size(); ++i) ids_[i] = i;
    } else {
        pts_.reserve(ids.size());
        ids_.assign(ids.begin(), ids.end());
        for (uint32_t id : ids) pts_.push_back(points[id]);
    }
    if (pts_.empty()) throw DataError("cannot index an empty point set");
    root_ = build(0, static_cast<uint32_t>(pts_.size()));
}

int32_t KnnIndex::build(uint32_t begin, uint32_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    if (end - begin <= kLeafSize) {
        nodes_.push_back(node);
        return static_cast<int32_t>(nodes_.size() - 1);
    }
    double lo[3] = {INFINITY, INFINITY, INFINITY};
    double hi[3] = {-INFINITY, -INFINITY, -INFINITY};
    for (uint32_t i = begin; i < end; ++i)
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], pts_[i][a]);
            hi[a] = std::max(hi[a], pts_[i][a]);
        }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    const uint32_t mid = begin + (end - begin) / 2;

    // Reorder both the point copy and the id table in lockstep.
    std::vector<uint32_t> order(end - begin);
    for (uint32_t i = 0; i < order.size(); ++i) order[i] = begin + i;
    std::nth_element(order.begin(), order.begin() + (mid - begin), order.end(),
                     [&](uint32_t a, uint32_t b) {
                         const double va = pts_[a][axis], vb = pts_[b][axis];
                         return va < vb || (va == vb && ids_[a] < ids_[b]);
                     });
    std::vector<Vec3> tmp_pts(end - begin);
    std::vector<uint32_t> tmp_ids(end - begin);
    for (uint32_t i = 0; i < order.size(); ++i) {
        tmp_pts[i] = pts_[order[i]];
        tmp_ids[i] = ids_[order[i]];
    }
    std::copy(tmp_pts.begin(), tmp_pts.end(), pts_.begin() + begin);
    std::copy(tmp_ids.begin(), tmp_ids.end(), ids_.begin() + begin);

    node.axis = axis;
    node.split = pts_[mid][axis];
    nodes_.push_back(node);
    const int32_t self = static_cast<int32_t>(nodes_.size() - 1);
    const int32_t l = build(begin, mid);
    const int32_t r = build(mid, end);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
}

template <class Visitor>
void KnnIndex::search(int32_t ni, const Vec3& q, double& worst, Visitor&& visit) const {
    const Node& node = nodes_[ni];
    if (node.axis < 0) {
        for (uint32_t i = node.begin; i < node.end; ++i) visit(dist2(q, pts_[i]), ids_[i]);
        return;
    }
    const double d = q[node.axis] - node.split;
    const int32_t near = d < 0.0 ? node.left : node.right;
    const int32_t far = d < 0.0 ? node.right : node.left;
    search(near, q, worst, visit);
    if (d * d <= worst) search(far, q, worst, visit);
}

KnnIndex::Hit KnnIndex::nearest(const Vec3& q, int64_t exclude) const {
    double best = INFINITY;
    uint32_t best_id = 0;
    bool found = false;
    double worst = INFINITY;
    search(root_, q, worst, [&](double d2, uint32_t id) {
        if (static_cast<int64_t>(id) == exclude) return;
        if (d2 < best || (d2 == best && found && id < best_id)) {
            best = d2;
            best_id = id;
            found = true;
            worst = best;
        }
    });
    if (!found) throw DataError("nearest-neighbor query over an effectively empty set");
    return {best_id, std::sqrt(best)};
}

std::vector<KnnIndex::Hit> KnnIndex::k_nearest(const Vec3& q, uint32_t k, int64_t exclude) const {
    if (k == 0) return {};
    const size_t avail = pts_.size() - (exclude >= 0 ? 1 : 0);
    if (k > avail)
        throw DataError("k_nearest: k=" + std::to_string(k) + " exceeds available points " +
                        std::to_string(avail));
    // Max-heap over (distance^2, index) with the worst candidate on top.
    std::vector<std::pair<double, uint32_t>> heap;
    heap.reserve(k + 1);
    auto cmp = [](const auto& a, const auto& b) {
        return a.first < b.first || (a.first == b.first && a.second < b.second);
    };
    double worst = INFINITY;
    search(root_, q, worst, [&](double d2, uint32_t id) {
        if (static_cast<int64_t>(id) == exclude) return;
        if (heap.size() == k && !cmp(std::make_pair(d2, id), heap.front())) return;
        heap.emplace_back(d2, id);
        std::push_heap(heap.begin(), heap.end(), cmp);
        if (heap.size() > k) {
            std::pop_heap(heap.begin(), heap.end(), cmp);
            heap.pop_back();
        }
        if (heap.size() == k) worst = heap.front().first;
    });
    std::sort_heap(heap.begin(), heap.end(), cmp);
    std::vector<Hit> out;
    out.reserve(heap.size());
    for (const auto& [d2, id] : heap) out.push_back({id, std::sqrt(d2)});
    return out;
}

}  // namespace nqad
