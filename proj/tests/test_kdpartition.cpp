#include <doctest.h>

#include <algorithm>
#include <set>

#include "nqad/error.hpp"
#include "nqad/kdpartition.hpp"
#include "oracles.hpp"

using namespace nqad;

namespace {

void check_partition_invariants(const KdPartition& part, size_t m) {
    std::set<uint32_t> seen;
    for (const auto& leaf : part.leaves) {
        for (uint32_t idx : leaf) {
            CHECK(idx < m);
            CHECK(seen.insert(idx).second);  // disjoint
        }
    }
    CHECK(seen.size() == m);  // cover
}

}  // namespace

TEST_SUITE("kdpartition") {

TEST_CASE("depth 0 is a single leaf with all indices") {
    const PointCloud c = oracle::random_cloud(10, 1);
    const KdPartition part = build_partition(c, 0);
    REQUIRE(part.leaf_count() == 1);
    CHECK(part.leaves[0].size() == 10);
    check_partition_invariants(part, 10);
}

TEST_CASE("cube corners at depth 1 split at the median 0.5") {
    PointCloud c;
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int z = 0; z < 2; ++z) c.pts.push_back({double(x), double(y), double(z)});
    const KdPartition part = build_partition(c, 1);
    REQUIRE(part.leaf_count() == 2);
    CHECK(part.leaves[0].size() == 4);
    CHECK(part.leaves[1].size() == 4);
    REQUIRE(part.split_values.size() == 1);
    CHECK(part.split_values[0] == 0.5);
    const int axis = part.split_axes[0];
    for (uint32_t i : part.leaves[0]) CHECK(c[i][axis] == 0.0);
    for (uint32_t i : part.leaves[1]) CHECK(c[i][axis] == 1.0);
    check_partition_invariants(part, 8);
}

TEST_CASE("1024 random points at depth 4: 16 leaves of 64") {
    const PointCloud c = oracle::random_cloud(1024, 9);
    const KdPartition part = build_partition(c, 4);
    REQUIRE(part.leaf_count() == 16);
    for (const auto& leaf : part.leaves) CHECK(leaf.size() == 64);
    check_partition_invariants(part, 1024);
}

TEST_CASE("M=1000 depth 3: ceil-split gives eight leaves of 125") {
    const PointCloud c = oracle::random_cloud(1000, 2);
    const KdPartition part = build_partition(c, 3);
    REQUIRE(part.leaf_count() == 8);
    for (const auto& leaf : part.leaves) CHECK(leaf.size() == 125);
}

TEST_CASE("odd sizes: left child takes ceil(n/2) at every split") {
    const PointCloud c = oracle::random_cloud(11, 3);
    const KdPartition part = build_partition(c, 2);
    REQUIRE(part.leaf_count() == 4);
    // 11 -> 6|5 -> (3|3)(3|2)
    CHECK(part.leaves[0].size() == 3);
    CHECK(part.leaves[1].size() == 3);
    CHECK(part.leaves[2].size() == 3);
    CHECK(part.leaves[3].size() == 2);
    check_partition_invariants(part, 11);
}

TEST_CASE("determinism: identical clouds give identical partitions") {
    const PointCloud c = oracle::random_cloud(512, 4);
    const KdPartition a = build_partition(c, 3);
    const KdPartition b = build_partition(c, 3);
    CHECK(a.leaves == b.leaves);
    CHECK(a.split_axes == b.split_axes);
    CHECK(a.split_values == b.split_values);
}

TEST_CASE("sibling bounding boxes only touch at the median along the split axis") {
    // Checked at the root split for several random clouds: every left
    // point lies at or below the median, every right point at or above.
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const PointCloud c = oracle::random_cloud(257, 100 + seed);
        const KdPartition part = build_partition(c, 1);
        const int axis = part.split_axes[0];
        const double median = part.split_values[0];
        for (uint32_t i : part.leaves[0]) CHECK(c[i][axis] <= median);
        for (uint32_t i : part.leaves[1]) CHECK(c[i][axis] >= median);
    }
}

TEST_CASE("duplicate coordinates split deterministically by index") {
    PointCloud c;
    for (int i = 0; i < 8; ++i) c.pts.push_back({1.0, 2.0, 3.0});
    const KdPartition part = build_partition(c, 1);
    // Ties broken by original index: lowest four go left.
    CHECK(part.leaves[0] == std::vector<uint32_t>{0, 1, 2, 3});
    CHECK(part.leaves[1] == std::vector<uint32_t>{4, 5, 6, 7});
}

TEST_CASE("depth too large for the cloud is an error") {
    const PointCloud c = oracle::random_cloud(7, 5);
    CHECK_THROWS_AS(build_partition(c, 3), DataError);
}

TEST_CASE("leaf_pairs: identical partitions pair identical leaves") {
    const PointCloud c = oracle::random_cloud(64, 6);
    const KdPartition a = build_partition(c, 2);
    const KdPartition b = build_partition(c, 2);
    const auto pairs = leaf_pairs(a, b);
    REQUIRE(pairs.size() == 4);
    for (const auto& [la, lb] : pairs) CHECK(*la == *lb);
}

TEST_CASE("leaf_pairs: depth mismatch is an error") {
    const PointCloud c = oracle::random_cloud(64, 6);
    const KdPartition a = build_partition(c, 2);
    const KdPartition b = build_partition(c, 3);
    CHECK_THROWS_AS(leaf_pairs(a, b), DataError);
}

TEST_CASE("leaf_pairs: equal-M clouds always give pairwise equal sizes") {
    const PointCloud p = oracle::random_cloud(1000, 7);
    const PointCloud q = oracle::random_cloud(1000, 8);
    const KdPartition pp = build_partition(p, 3);
    const KdPartition pq = build_partition(q, 3);
    const auto pairs = leaf_pairs(pp, pq);
    for (const auto& [lp, lq] : pairs) {
        CHECK(lp->size() == 125);
        CHECK(lq->size() == 125);
    }
}

}  // TEST_SUITE
