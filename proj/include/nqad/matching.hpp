#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nqad/pointcloud.hpp"

namespace nqad {

/// Row-aligned matching against a source cloud: source row i is matched
/// to target row i. Every operation permutes target rows in place, so
/// the target stays a permutation of the original cloud. origin[r] is
/// the original row index of the point currently stored at row r, which
/// is what checkpoints persist.
struct MatchingState {
    PointCloud target;
    std::vector<uint32_t> origin;
    std::vector<uint32_t> swap_log;  // accepted swaps per reassignment call

    explicit MatchingState(PointCloud t) : target(std::move(t)) {
        origin.resize(target.size());
        for (uint32_t i = 0; i < origin.size(); ++i) origin[i] = i;
    }

    /// Rebuilds a state from an original cloud plus a saved origin map.
    MatchingState(const PointCloud& original, std::vector<uint32_t> saved_origin);
};

struct QapWeights {
    double clamp_delta = 1e-9;  // floor for w before inverting into flow
};

/// Assignment energy: sum over counted source pairs of
/// f(q, q') * w(A(q), A(q')) with w the Euclidean distance, f = 1/max(w,
/// delta), and A the row alignment. neighbor_cap = 0 evaluates the exact
/// sum over all unordered pairs (O(M^2)); otherwise the outer sum runs
/// over each point's neighbor_cap nearest source neighbors and counts
/// each directed neighbor edge once.
double qap_energy(const PointCloud& source, const MatchingState& state, const QapWeights& weights,
                  uint32_t neighbor_cap);

/// Initial matching: partition source and target to `depth`, run the
/// auction per canonical leaf pair, keep per-target the closest bid,
/// randomly pair whatever remains inside the leaf, then permute target
/// rows so that every source row is aligned with its chosen target
/// point. The alignment afterwards is a true bijection even when the
/// auction hit its round cap.
void qaad_greedy(const PointCloud& source, MatchingState& state, int depth, double epsilon,
                 uint32_t max_iterations, uint64_t seed);

using PredictFn = std::function<std::vector<Vec3>(std::span<const uint32_t>)>;

/// One refinement pass over a sampled query: find each prediction's
/// nearest neighbor among the sampled target rows, test the summed loss
/// of the hypothetical pairwise swap, and keep only strictly improving,
/// conflict-free swaps. Conflicts resolve by strongest loss decline:
/// a contested target goes to the best candidate, and a swap is skipped
/// when either of its rows was already exchanged by a stronger swap.
/// Returns the accepted swap count and appends it to state.swap_log.
uint32_t qaad_reassignment(std::span<const uint32_t> source_sample_ids,
                           std::span<const uint32_t> target_query_ids,
                           std::span<const Vec3> predictions, const PredictFn& predict_fn,
                           MatchingState& state);

}  // namespace nqad
