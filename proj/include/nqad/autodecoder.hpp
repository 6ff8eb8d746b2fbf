#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nqad/dense.hpp"
#include "nqad/pointcloud.hpp"

namespace nqad {

inline constexpr uint32_t kTrunkWidth = 256;

struct LinearLayer {
    Mat w;                   // out x in
    std::vector<double> b;   // out
};

struct FoldingNetConfig {
    uint32_t points = 0;      // M
    uint32_t patches = 0;     // K
    uint32_t latent_dim = 0;  // l
    uint32_t instances = 0;   // N
    uint64_t seed = 0;
};

/// Folding autodecoder: a trainable source cloud split into K contiguous
/// equal patches, a per-instance latent lookup table, a trunk of four
/// 256-wide layers shared by all patches, and per-patch heads taking the
/// trunk features concatenated with the raw source point. SELU
/// everywhere except the final linear output.
struct FoldingNet {
    FoldingNetConfig config;
    std::array<LinearLayer, 4> trunk;
    struct Head {
        LinearLayer hidden;  // 256 x (256+3)
        LinearLayer out;     // 3 x 256
    };
    std::vector<Head> heads;
    Mat source;  // M x 3, trainable
    Mat latent;  // N x latent_dim, trainable

    uint32_t patch_size() const { return config.points / config.patches; }
    uint32_t patch_of(uint32_t idx) const { return idx / patch_size(); }
    std::vector<uint32_t> patch_offsets() const;
};

/// Weights use fan-in-scaled normal init (self-normalizing with SELU),
/// latent rows N(0, 0.01^2), source = a copy of init_cloud. Deterministic
/// under config.seed.
FoldingNet init_network(const FoldingNetConfig& config, const PointCloud& init_cloud);

/// Gradient buffers shaped exactly like the trainable tensors.
struct Gradients {
    std::array<LinearLayer, 4> trunk;
    std::vector<FoldingNet::Head> heads;
    Mat source;
    Mat latent;

    void zero();
};

Gradients make_gradients(const FoldingNet& net);

/// Activations retained between forward and backward, grouped by patch.
struct ForwardCache {
    uint32_t instance = 0;
    struct PatchBlock {
        uint32_t patch = 0;
        std::vector<uint32_t> positions;  // index into the caller's id list
        std::vector<uint32_t> ids;        // source rows
        Mat x1, x2, x3, x4;               // post-SELU trunk activations
        Mat u1;                           // post-SELU head hidden
        Mat y;                            // predictions
    };
    std::vector<PatchBlock> blocks;
};

/// Batched grouped evaluation (all patches advance through the same
/// pipeline). Enforces equal per-patch counts; use predict_points for
/// arbitrary id sets.
std::vector<Vec3> forward(const FoldingNet& net, uint32_t instance,
                          std::span<const uint32_t> source_ids);

/// Same computation without the balance requirement; ids may repeat.
std::vector<Vec3> predict_points(const FoldingNet& net, uint32_t instance,
                                 std::span<const uint32_t> source_ids);

/// forward that retains activations for backward.
std::vector<Vec3> forward_cached(const FoldingNet& net, uint32_t instance,
                                 std::span<const uint32_t> source_ids, ForwardCache& cache);

/// Accumulates exact reverse-mode gradients for every trainable tensor
/// (trunk, heads, the instance's latent row, touched source rows) into
/// grads. upstream is dLoss/dPrediction in the caller's id order.
void backward(const FoldingNet& net, const ForwardCache& cache, std::span<const Vec3> upstream,
              Gradients& grads);

struct AdamState {
    Gradients m, v;
    uint64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState init_adam(const FoldingNet& net, double lr = 1e-3);

/// Standard Adam with bias correction over all trainable tensors.
/// Throws (naming the tensor) on non-finite gradients.
void adam_step(FoldingNet& net, AdamState& state, const Gradients& grads);

/// Training bookkeeping persisted alongside the network: epoch counter,
/// master seed, per-instance target-row permutations, and the resolved
/// config text for resume sanity checks. The RNG needs no raw state:
/// every stream is derived from (master_seed, purpose, counters).
struct TrainMeta {
    uint64_t epochs_done = 0;
    uint64_t master_seed = 0;
    bool greedy_done = false;
    std::vector<std::vector<uint32_t>> perms;  // origin map per instance
    std::string config_echo;
};

void save_checkpoint(const FoldingNet& net, const AdamState& state, const TrainMeta& meta,
                     const std::string& path);

struct Checkpoint {
    FoldingNet net;
    AdamState adam;
    TrainMeta meta;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace nqad
