#include "nqad/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "nqad/error.hpp"
#include "nqad/experiments.hpp"
#include "nqad/knn.hpp"
#include "nqad/parallel.hpp"
#include "nqad/rng.hpp"

namespace nqad {

LossKind loss_kind_from_name(const std::string& name) {
    if (name == "aligned_l2") return LossKind::aligned_l2;
    if (name == "aug_chamfer_sample") return LossKind::aug_chamfer_sample;
    throw UsageError("unknown loss '" + name + "' (aligned_l2 | aug_chamfer_sample)");
}

const char* loss_kind_name(LossKind kind) {
    return kind == LossKind::aligned_l2 ? "aligned_l2" : "aug_chamfer_sample";
}

std::pair<double, std::vector<Vec3>> loss_aligned(std::span<const Vec3> pred,
                                                  std::span<const Vec3> target_rows) {
    if (pred.size() != target_rows.size())
        throw DataError("aligned loss count mismatch: " + std::to_string(pred.size()) + " vs " +
                        std::to_string(target_rows.size()));
    if (pred.empty()) throw DataError("aligned loss on empty input");
    const double inv = 1.0 / double(pred.size());
    double total = 0.0;
    std::vector<Vec3> grads(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        const Vec3 diff = pred[i] - target_rows[i];
        const double d = std::sqrt(diff.x * diff.x + diff.y * diff.y + diff.z * diff.z);
        total += d;
        if (d > 0.0) grads[i] = diff * (inv / d);
    }
    return {total * inv, std::move(grads)};
}

std::pair<double, std::vector<Vec3>> loss_aug_chamfer_sample(std::span<const Vec3> pred,
                                                             std::span<const Vec3> target_sample) {
    if (pred.empty() || target_sample.empty())
        throw DataError("augmented Chamfer loss on empty input");
    KnnIndex pred_index(pred);
    KnnIndex target_index(target_sample);

    double sum_pt = 0.0;  // pred -> target
    std::vector<KnnIndex::Hit> nn_pt(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        nn_pt[i] = target_index.nearest(pred[i]);
        sum_pt += nn_pt[i].distance;
    }
    double sum_tp = 0.0;  // target -> pred
    std::vector<KnnIndex::Hit> nn_tp(target_sample.size());
    for (size_t j = 0; j < target_sample.size(); ++j) {
        nn_tp[j] = pred_index.nearest(target_sample[j]);
        sum_tp += nn_tp[j].distance;
    }

    std::vector<Vec3> grads(pred.size());
    if (sum_pt >= sum_tp) {
        for (size_t i = 0; i < pred.size(); ++i) {
            const Vec3 diff = pred[i] - target_sample[nn_pt[i].index];
            if (nn_pt[i].distance > 0.0) grads[i] += diff * (1.0 / nn_pt[i].distance);
        }
        return {sum_pt, std::move(grads)};
    }
    for (size_t j = 0; j < target_sample.size(); ++j) {
        const Vec3 diff = pred[nn_tp[j].index] - target_sample[j];
        if (nn_tp[j].distance > 0.0) grads[nn_tp[j].index] += diff * (1.0 / nn_tp[j].distance);
    }
    return {sum_tp, std::move(grads)};
}

PointCloud source_cloud(const FoldingNet& net) {
    PointCloud cloud;
    cloud.pts.resize(net.source.rows);
    for (uint32_t i = 0; i < net.source.rows; ++i)
        cloud.pts[i] = {net.source.at(i, 0), net.source.at(i, 1), net.source.at(i, 2)};
    return cloud;
}

TrainState make_train_state(const Dataset& dataset, const FoldingNet& net,
                            const TrainConfig& cfg) {
    if (dataset.size() != net.config.instances)
        throw DataError("dataset has " + std::to_string(dataset.size()) + " clouds, network has " +
                        std::to_string(net.config.instances) + " latent rows");
    if (dataset.points_per_cloud() != net.config.points)
        throw DataError("dataset clouds have " + std::to_string(dataset.points_per_cloud()) +
                        " points, network expects " + std::to_string(net.config.points));
    TrainState state;
    state.adam = init_adam(net, cfg.lr);
    state.matchings.reserve(dataset.size());
    for (const auto& cloud : dataset.clouds) state.matchings.emplace_back(cloud);
    return state;
}

TrainState train_state_from_checkpoint(const Dataset& dataset, Checkpoint&& ck) {
    if (ck.meta.perms.size() != dataset.size())
        throw DataError("checkpoint stores " + std::to_string(ck.meta.perms.size()) +
                        " matchings for a dataset of " + std::to_string(dataset.size()));
    TrainState state;
    state.adam = std::move(ck.adam);
    state.matchings.reserve(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i)
        state.matchings.emplace_back(dataset.clouds[i], std::move(ck.meta.perms[i]));
    state.epochs_done = ck.meta.epochs_done;
    state.greedy_done = ck.meta.greedy_done;
    return state;
}

namespace {

void append_csv_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

void write_log_row(std::ostream* log, const LogRow& row) {
    if (!log) return;
    std::string line = std::to_string(row.epoch) + "," + std::to_string(row.batch) + ",";
    append_csv_double(line, row.loss);
    line += "," + std::to_string(row.swaps) + ",";
    append_csv_double(line, row.elapsed_ms);
    line += "\n";
    (*log) << line << std::flush;
}

void add_scaled(Gradients& total, const Gradients& part, double scale) {
    for (int i = 0; i < 4; ++i) {
        for (size_t j = 0; j < total.trunk[i].w.v.size(); ++j)
            total.trunk[i].w.v[j] += scale * part.trunk[i].w.v[j];
        for (size_t j = 0; j < total.trunk[i].b.size(); ++j)
            total.trunk[i].b[j] += scale * part.trunk[i].b[j];
    }
    for (size_t k = 0; k < total.heads.size(); ++k) {
        for (size_t j = 0; j < total.heads[k].hidden.w.v.size(); ++j)
            total.heads[k].hidden.w.v[j] += scale * part.heads[k].hidden.w.v[j];
        for (size_t j = 0; j < total.heads[k].hidden.b.size(); ++j)
            total.heads[k].hidden.b[j] += scale * part.heads[k].hidden.b[j];
        for (size_t j = 0; j < total.heads[k].out.w.v.size(); ++j)
            total.heads[k].out.w.v[j] += scale * part.heads[k].out.w.v[j];
        for (size_t j = 0; j < total.heads[k].out.b.size(); ++j)
            total.heads[k].out.b[j] += scale * part.heads[k].out.b[j];
    }
    for (size_t j = 0; j < total.source.v.size(); ++j)
        total.source.v[j] += scale * part.source.v[j];
    for (size_t j = 0; j < total.latent.v.size(); ++j)
        total.latent.v[j] += scale * part.latent.v[j];
}

uint64_t derive_seed(uint64_t seed, std::string_view purpose, uint64_t a, uint64_t b = 0) {
    return Rng(seed, purpose, a, b).next();
}

void write_checkpoint_file(const FoldingNet& net, const TrainState& state, const TrainConfig& cfg,
                           const std::string& path) {
    TrainMeta meta;
    meta.epochs_done = state.epochs_done;
    meta.master_seed = cfg.seed;
    meta.greedy_done = state.greedy_done;
    meta.perms.reserve(state.matchings.size());
    for (const auto& m : state.matchings) meta.perms.push_back(m.origin);
    meta.config_echo = cfg.config_echo;
    save_checkpoint(net, state.adam, meta, path);
}

}  // namespace

TrainReport train(const Dataset& dataset, FoldingNet& net, TrainState& state,
                  const TrainConfig& cfg, std::ostream* log) {
    using clock = std::chrono::steady_clock;
    const uint32_t n = static_cast<uint32_t>(dataset.size());
    if (n == 0) throw DataError("training on an empty dataset");
    if (cfg.batch_size == 0 || cfg.batch_size > n)
        throw DataError("batch_size " + std::to_string(cfg.batch_size) +
                        " must be in [1, N=" + std::to_string(n) + "]");
    if (cfg.sample_size % net.config.patches != 0)
        throw DataError("sample_size " + std::to_string(cfg.sample_size) +
                        " not divisible by patch count " + std::to_string(net.config.patches));
    if (cfg.sample_size > net.config.points)
        throw DataError("sample_size exceeds point count");

    TrainReport report;
    if (cfg.epochs <= state.epochs_done) return report;

    if (!state.greedy_done) {
        const PointCloud source = source_cloud(net);
        parallel_for(n, [&](size_t i) {
            qaad_greedy(source, state.matchings[i], cfg.depth, cfg.epsilon, cfg.max_iterations,
                        derive_seed(cfg.seed, "greedy", i));
        });
        state.greedy_done = true;
    }

    const auto offsets = net.patch_offsets();
    const uint32_t m = net.config.points;
    const uint32_t max_batch = cfg.batch_size;

    std::vector<Gradients> slot_grads;
    slot_grads.reserve(max_batch);
    for (uint32_t i = 0; i < max_batch; ++i) slot_grads.push_back(make_gradients(net));
    Gradients total = make_gradients(net);

    for (uint32_t epoch = static_cast<uint32_t>(state.epochs_done); epoch < cfg.epochs; ++epoch) {
        const auto epoch_start = clock::now();
        std::vector<uint32_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng order_rng(cfg.seed, "epoch_order", epoch);
        order_rng.shuffle(order);

        double epoch_loss_sum = 0.0;
        uint32_t epoch_swaps = 0;
        const uint32_t n_batches = (n + max_batch - 1) / max_batch;

        for (uint32_t batch = 0; batch < n_batches; ++batch) {
            const auto batch_start = clock::now();
            const uint32_t lo = batch * max_batch;
            const uint32_t hi = std::min(n, lo + max_batch);
            const uint32_t bsize = hi - lo;

            SampleSpec squery_spec{cfg.sample_size, true,
                                   derive_seed(cfg.seed, "squery", epoch, batch)};
            const auto squery = uniform_sample_indices(m, squery_spec, offsets);
            SampleSpec tquery_spec{cfg.sample_size, false,
                                   derive_seed(cfg.seed, "tquery", epoch, batch)};
            const auto tquery = uniform_sample_indices(m, tquery_spec);

            std::vector<double> losses(bsize, 0.0);
            std::vector<uint32_t> swaps(bsize, 0);

            parallel_for(bsize, [&](size_t slot) {
                const uint32_t inst = order[lo + slot];
                MatchingState& matching = state.matchings[inst];

                ForwardCache cache;
                const std::vector<Vec3> pred = forward_cached(net, inst, squery, cache);

                if (cfg.reassignment) {
                    swaps[slot] = qaad_reassignment(
                        squery, tquery, pred,
                        [&](std::span<const uint32_t> ids) {
                            return predict_points(net, inst, ids);
                        },
                        matching);
                }

                std::vector<Vec3> aligned(squery.size());
                for (size_t i = 0; i < squery.size(); ++i) aligned[i] = matching.target[squery[i]];
                auto [loss, upstream] = cfg.loss_kind == LossKind::aligned_l2
                                            ? loss_aligned(pred, aligned)
                                            : loss_aug_chamfer_sample(pred, aligned);
                losses[slot] = loss;

                slot_grads[slot].zero();
                backward(net, cache, upstream, slot_grads[slot]);
            });

            total.zero();
            const double scale = 1.0 / double(bsize);
            for (uint32_t slot = 0; slot < bsize; ++slot)
                add_scaled(total, slot_grads[slot], scale);
            adam_step(net, state.adam, total);

            double batch_loss = 0.0;
            uint32_t batch_swaps = 0;
            for (uint32_t slot = 0; slot < bsize; ++slot) {
                batch_loss += losses[slot];
                batch_swaps += swaps[slot];
            }
            batch_loss /= double(bsize);
            epoch_loss_sum += batch_loss * bsize;
            epoch_swaps += batch_swaps;

            LogRow row;
            row.epoch = epoch + 1;
            row.batch = batch;
            row.loss = batch_loss;
            row.swaps = batch_swaps;
            row.elapsed_ms =
                std::chrono::duration<double, std::milli>(clock::now() - batch_start).count();
            report.rows.push_back(row);
            write_log_row(log, row);
        }

        state.epochs_done = epoch + 1;
        report.epoch_loss.push_back(epoch_loss_sum / double(n));
        report.epoch_swaps.push_back(epoch_swaps);
        report.epoch_ms.push_back(
            std::chrono::duration<double, std::milli>(clock::now() - epoch_start).count());

        if (cfg.checkpoint_interval > 0 && !cfg.checkpoint_dir.empty() &&
            (state.epochs_done % cfg.checkpoint_interval == 0 ||
             state.epochs_done == cfg.epochs)) {
            char name[64];
            snprintf(name, sizeof(name), "checkpoint_%06llu.nqad",
                     static_cast<unsigned long long>(state.epochs_done));
            write_checkpoint_file(net, state, cfg,
                                  (std::filesystem::path(cfg.checkpoint_dir) / name).string());
        }
    }

    if (!cfg.checkpoint_dir.empty())
        write_checkpoint_file(
            net, state, cfg,
            (std::filesystem::path(cfg.checkpoint_dir) / "checkpoint_final.nqad").string());

    if (cfg.final_emkd) {
        const EmkdEvaluation eval = evaluate_emkd(dataset, net, cfg.final_emkd_depth,
                                                  cfg.final_emkd_epsilon,
                                                  cfg.final_emkd_iterations);
        report.final_emkd = eval.per_instance;
        report.final_emkd_mean = eval.mean;
    }
    return report;
}

TrainReport train(const Dataset& dataset, FoldingNet& net, const TrainConfig& cfg,
                  std::ostream* log) {
    TrainState state = make_train_state(dataset, net, cfg);
    return train(dataset, net, state, cfg, log);
}

}  // namespace nqad
