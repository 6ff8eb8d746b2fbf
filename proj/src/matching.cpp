#include "nqad/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nqad/error.hpp"
#include "nqad/kdpartition.hpp"
#include "nqad/knn.hpp"
#include "nqad/lap.hpp"
#include "nqad/parallel.hpp"
#include "nqad/rng.hpp"

namespace nqad {

MatchingState::MatchingState(const PointCloud& original, std::vector<uint32_t> saved_origin)
    : origin(std::move(saved_origin)) {
    if (origin.size() != original.size())
        throw DataError("saved matching permutation has " + std::to_string(origin.size()) +
                        " entries for a cloud of " + std::to_string(original.size()));
    std::vector<char> seen(original.size(), 0);
    target.pts.resize(original.size());
    for (uint32_t r = 0; r < origin.size(); ++r) {
        if (origin[r] >= original.size() || seen[origin[r]])
            throw DataError("saved matching permutation is not a permutation");
        seen[origin[r]] = 1;
        target.pts[r] = original[origin[r]];
    }
}

double qap_energy(const PointCloud& source, const MatchingState& state, const QapWeights& weights,
                  uint32_t neighbor_cap) {
    if (source.size() != state.target.size())
        throw DataError("qap_energy size mismatch: " + std::to_string(source.size()) + " vs " +
                        std::to_string(state.target.size()));
    if (!(weights.clamp_delta > 0.0)) throw DataError("clamp_delta must be positive");
    const uint32_t n = static_cast<uint32_t>(source.size());
    double energy = 0.0;
    if (neighbor_cap == 0) {
        for (uint32_t i = 0; i < n; ++i)
            for (uint32_t j = i + 1; j < n; ++j) {
                const double w_src = std::max(dist(source[i], source[j]), weights.clamp_delta);
                energy += dist(state.target[i], state.target[j]) / w_src;
            }
        return energy;
    }
    const uint32_t k = std::min<uint32_t>(neighbor_cap, n - 1);
    KnnIndex index(source.pts);
    for (uint32_t i = 0; i < n; ++i) {
        for (const auto& hit : index.k_nearest(source[i], k, int64_t(i))) {
            const double w_src = std::max(hit.distance, weights.clamp_delta);
            energy += dist(state.target[i], state.target[hit.index]) / w_src;
        }
    }
    return energy;
}

void qaad_greedy(const PointCloud& source, MatchingState& state, int depth, double epsilon,
                 uint32_t max_iterations, uint64_t seed) {
    if (source.size() != state.target.size())
        throw DataError("qaad_greedy size mismatch: " + std::to_string(source.size()) + " vs " +
                        std::to_string(state.target.size()));
    const KdPartition sp = build_partition(source, depth);
    const KdPartition tp = build_partition(state.target, depth);
    const auto pairs = leaf_pairs(sp, tp);

    // pair_target[s] = global target row whose point source row s takes.
    // Leaves are disjoint on both sides, so slots never collide.
    std::vector<uint32_t> pair_target(source.size());

    parallel_for(pairs.size(), [&](size_t li) {
        const auto& [sleaf, tleaf] = pairs[li];
        const uint32_t n = static_cast<uint32_t>(sleaf->size());
        std::vector<Vec3> a(n), b(n);
        for (uint32_t i = 0; i < n; ++i) a[i] = source[(*sleaf)[i]];
        for (uint32_t i = 0; i < n; ++i) b[i] = state.target[(*tleaf)[i]];
        const AuctionSolution sol = auction_assign(a, b, epsilon, max_iterations);

        // Candidates sorted by distance; first occurrence per target wins.
        std::vector<uint32_t> order;
        order.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
            if (sol.assignment[i] >= 0) order.push_back(i);
        std::stable_sort(order.begin(), order.end(), [&](uint32_t x, uint32_t y) {
            return sol.distances[x] < sol.distances[y];
        });

        std::vector<char> src_done(n, 0), tgt_done(n, 0);
        for (uint32_t i : order) {
            const uint32_t j = static_cast<uint32_t>(sol.assignment[i]);
            if (tgt_done[j]) continue;
            src_done[i] = 1;
            tgt_done[j] = 1;
            pair_target[(*sleaf)[i]] = (*tleaf)[j];
        }

        // Randomly match whatever is left, leaf-locally.
        std::vector<uint32_t> rem_src, rem_tgt;
        for (uint32_t i = 0; i < n; ++i)
            if (!src_done[i]) rem_src.push_back(i);
        for (uint32_t j = 0; j < n; ++j)
            if (!tgt_done[j]) rem_tgt.push_back(j);
        Rng rng(seed, "greedy_fill", li);
        rng.shuffle(rem_tgt);
        for (size_t k = 0; k < rem_src.size(); ++k)
            pair_target[(*sleaf)[rem_src[k]]] = (*tleaf)[rem_tgt[k]];
    });

    // Apply the collected bijection as one row permutation.
    std::vector<Vec3> new_pts(state.target.size());
    std::vector<uint32_t> new_origin(state.target.size());
    for (uint32_t s = 0; s < pair_target.size(); ++s) {
        new_pts[s] = state.target[pair_target[s]];
        new_origin[s] = state.origin[pair_target[s]];
    }
    state.target.pts = std::move(new_pts);
    state.origin = std::move(new_origin);
}

uint32_t qaad_reassignment(std::span<const uint32_t> source_sample_ids,
                           std::span<const uint32_t> target_query_ids,
                           std::span<const Vec3> predictions, const PredictFn& predict_fn,
                           MatchingState& state) {
    const uint32_t m = static_cast<uint32_t>(state.target.size());
    if (predictions.size() != source_sample_ids.size())
        throw DataError("reassignment: " + std::to_string(predictions.size()) +
                        " predictions for " + std::to_string(source_sample_ids.size()) + " ids");
    if (target_query_ids.empty()) throw DataError("reassignment: empty target query");
    std::vector<char> seen(m, 0);
    for (uint32_t id : source_sample_ids) {
        if (id >= m) throw DataError("reassignment: source id " + std::to_string(id) + " out of range");
        if (seen[id]) throw DataError("reassignment: duplicate source id " + std::to_string(id));
        seen[id] = 1;
    }
    std::fill(seen.begin(), seen.end(), 0);
    for (uint32_t id : target_query_ids) {
        if (id >= m) throw DataError("reassignment: target id " + std::to_string(id) + " out of range");
        if (seen[id]) throw DataError("reassignment: duplicate target id " + std::to_string(id));
        seen[id] = 1;
    }

    // Nearest sampled target row for every prediction; global row ids.
    KnnIndex index(std::span<const Vec3>(state.target.pts), target_query_ids);
    const size_t q = source_sample_ids.size();
    std::vector<uint32_t> nn_ids(q);
    for (size_t i = 0; i < q; ++i) nn_ids[i] = index.nearest(predictions[i]).index;

    // Predictions of the source rows currently matched to those targets.
    const std::vector<Vec3> predict_nn = predict_fn(nn_ids);
    if (predict_nn.size() != q) throw DataError("reassignment: predict callback size mismatch");

    // Keep strictly improving candidates with their loss decline.
    struct Candidate {
        uint32_t src;
        uint32_t tgt;
        double delta;  // after - before, negative
    };
    std::vector<Candidate> cand;
    cand.reserve(q);
    for (size_t i = 0; i < q; ++i) {
        const uint32_t s = source_sample_ids[i];
        const uint32_t t = nn_ids[i];
        const double before = dist(predictions[i], state.target[s]) +
                              dist(predict_nn[i], state.target[t]);
        const double after = dist(predictions[i], state.target[t]) +
                             dist(predict_nn[i], state.target[s]);
        if (after < before) cand.push_back({s, t, after - before});
    }

    // Contested targets: strongest decline first, ties by query order.
    std::stable_sort(cand.begin(), cand.end(),
                     [](const Candidate& a, const Candidate& b) { return a.delta < b.delta; });

    // Accepted swaps must touch pairwise disjoint rows (a contested
    // target goes to the strongest decline; a swapping source row cannot
    // also be claimed as another swap's target), otherwise the tested
    // losses would be stale by the time the row exchange happens.
    std::fill(seen.begin(), seen.end(), 0);
    uint32_t accepted = 0;
    for (const Candidate& c : cand) {
        if (seen[c.src] || seen[c.tgt]) continue;
        seen[c.src] = 1;
        seen[c.tgt] = 1;
        std::swap(state.target.pts[c.src], state.target.pts[c.tgt]);
        std::swap(state.origin[c.src], state.origin[c.tgt]);
        ++accepted;
    }
    state.swap_log.push_back(accepted);
    return accepted;
}

}  // namespace nqad
