#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nqad/autodecoder.hpp"
#include "nqad/matching.hpp"
#include "nqad/pointcloud.hpp"

namespace nqad {

enum class LossKind { aligned_l2, aug_chamfer_sample };

LossKind loss_kind_from_name(const std::string& name);
const char* loss_kind_name(LossKind kind);

struct TrainConfig {
    uint32_t epochs = 100;
    uint32_t batch_size = 16;
    uint32_t sample_size = 2048;
    int depth = 3;                 // greedy-init partition depth
    double epsilon = 1.0;          // auction bid increment
    uint32_t max_iterations = 100; // auction round cap
    LossKind loss_kind = LossKind::aligned_l2;
    bool reassignment = true;
    double lr = 1e-3;
    uint64_t seed = 0;
    uint32_t checkpoint_interval = 0;  // epochs between checkpoints, 0 = off
    std::string checkpoint_dir;
    std::string config_echo;           // stored verbatim in checkpoints
    bool final_emkd = false;
    int final_emkd_depth = 2;
    double final_emkd_epsilon = 1e-3;
    uint32_t final_emkd_iterations = 100000;
};

struct LogRow {
    uint32_t epoch = 0;  // 1-based
    uint32_t batch = 0;  // 0-based within the epoch
    double loss = 0.0;
    uint32_t swaps = 0;
    double elapsed_ms = 0.0;
};

struct TrainReport {
    std::vector<double> epoch_loss;      // mean over instances
    std::vector<uint32_t> epoch_swaps;   // accepted reassignment swaps
    std::vector<double> epoch_ms;
    std::vector<LogRow> rows;
    std::vector<double> final_emkd;      // per instance, when requested
    double final_emkd_mean = 0.0;
};

/// Optimizer moments, matchings, and progress counters; everything a
/// checkpoint needs to continue a run exactly.
struct TrainState {
    AdamState adam;
    std::vector<MatchingState> matchings;
    uint64_t epochs_done = 0;
    bool greedy_done = false;
};

TrainState make_train_state(const Dataset& dataset, const FoldingNet& net,
                            const TrainConfig& cfg);
TrainState train_state_from_checkpoint(const Dataset& dataset, Checkpoint&& ck);

/// Mean Euclidean distance between prediction i and target row i, plus
/// the gradient of that mean with respect to the predictions.
std::pair<double, std::vector<Vec3>> loss_aligned(std::span<const Vec3> pred,
                                                  std::span<const Vec3> target_rows);

/// Augmented Chamfer distance between the predicted and sampled target
/// sets (sum form), with the subgradient through the realized
/// nearest-neighbor pairs and max branch (the first branch on ties).
std::pair<double, std::vector<Vec3>> loss_aug_chamfer_sample(std::span<const Vec3> pred,
                                                             std::span<const Vec3> target_sample);

/// Full training: greedy initial matching once per instance, then per
/// epoch/batch: shared per-patch-equal source sample, forward, optional
/// reassignment per instance against a fresh target sample, loss against
/// the aligned (possibly re-permuted) target rows, backward, one Adam
/// step per batch. Deterministic under cfg.seed independent of thread
/// count. Appends one CSV row per batch to log when given (no header).
TrainReport train(const Dataset& dataset, FoldingNet& net, TrainState& state,
                  const TrainConfig& cfg, std::ostream* log = nullptr);

/// Convenience wrapper: fresh state, train, return report.
TrainReport train(const Dataset& dataset, FoldingNet& net, const TrainConfig& cfg,
                  std::ostream* log = nullptr);

/// The trainable source cloud as a PointCloud snapshot.
PointCloud source_cloud(const FoldingNet& net);

}  // namespace nqad
