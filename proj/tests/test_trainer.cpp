#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "nqad/error.hpp"
#include "nqad/trainer.hpp"
#include "oracles.hpp"

using namespace nqad;
namespace fs = std::filesystem;

namespace {

Dataset toy_dataset(uint32_t n, uint32_t m, uint64_t seed, bool normalize = true) {
    Dataset ds;
    for (uint32_t i = 0; i < n; ++i) {
        PointCloud c = gen_synthetic(SyntheticKind::two_scale_teeth, m, seed + i);
        if (normalize) normalize_unit_sphere(c);
        ds.clouds.push_back(std::move(c));
        ds.names.push_back("toy_" + std::to_string(i));
    }
    return ds;
}

// Log text without the elapsed_ms column (timings differ run to run).
std::string strip_elapsed(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        const size_t cut = line.rfind(',');
        out += line.substr(0, cut);
        out += '\n';
    }
    return out;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("loss_aligned: identity, single pair, finite differences") {
    std::vector<Vec3> pred = {{1, 2, 3}, {4, 5, 6}};
    std::vector<Vec3> target = pred;
    auto [zero, zero_grads] = loss_aligned(pred, target);
    CHECK(zero == 0.0);
    for (const Vec3& g : zero_grads) CHECK(g == Vec3{0, 0, 0});

    std::vector<Vec3> one_pred = {{2, 0, 0}};
    std::vector<Vec3> one_target = {{0, 0, 0}};
    auto [value, grads] = loss_aligned(one_pred, one_target);
    CHECK(value == 2.0);
    CHECK(grads[0].x == doctest::Approx(1.0).epsilon(1e-15));  // unit vector toward pred
    CHECK(grads[0].y == 0.0);

    // Finite differences on a random 16-point batch.
    const PointCloud p = oracle::random_cloud(16, 1);
    const PointCloud t = oracle::random_cloud(16, 2);
    std::vector<Vec3> pts = p.pts;
    auto [base, analytic] = loss_aligned(pts, t.pts);
    const double h = 1e-6;
    Rng pick(3, "fd_pick");
    for (int rep = 0; rep < 10; ++rep) {
        const uint32_t i = uint32_t(pick.below(16));
        const int a = int(pick.below(3));
        pts[i][a] += h;
        const double hi = loss_aligned(pts, t.pts).first;
        pts[i][a] -= 2 * h;
        const double lo = loss_aligned(pts, t.pts).first;
        pts[i][a] += h;
        CHECK(std::abs((hi - lo) / (2 * h) - analytic[i][a]) <= 1e-6);
    }
}

TEST_CASE("loss_aug_chamfer_sample: identity, argmax branch, permutation invariance") {
    std::vector<Vec3> pred = {{0, 0, 0}};
    std::vector<Vec3> target = {{1, 0, 0}, {2, 0, 0}};
    auto [value, grads] = loss_aug_chamfer_sample(pred, target);
    CHECK(value == 3.0);
    // Gradient flows from the target->pred branch: both targets pull.
    CHECK(grads[0].x == doctest::Approx(-2.0).epsilon(1e-15));

    auto [zero, zg] = loss_aug_chamfer_sample(target, target);
    CHECK(zero == 0.0);
    for (const Vec3& g : zg) CHECK(g == Vec3{0, 0, 0});

    const PointCloud a = oracle::random_cloud(24, 4);
    const PointCloud b = oracle::random_cloud(24, 5);
    std::vector<Vec3> shuffled = b.pts;
    Rng rng(6, "shuffle");
    rng.shuffle(shuffled);
    CHECK(loss_aug_chamfer_sample(a.pts, b.pts).first ==
          loss_aug_chamfer_sample(a.pts, shuffled).first);

    // Finite differences away from ties.
    std::vector<Vec3> pts = a.pts;
    auto [base, analytic] = loss_aug_chamfer_sample(pts, b.pts);
    const double h = 1e-7;
    Rng pick(7, "fd_pick2");
    for (int rep = 0; rep < 8; ++rep) {
        const uint32_t i = uint32_t(pick.below(24));
        const int axis = int(pick.below(3));
        pts[i][axis] += h;
        const double hi = loss_aug_chamfer_sample(pts, b.pts).first;
        pts[i][axis] -= 2 * h;
        const double lo = loss_aug_chamfer_sample(pts, b.pts).first;
        pts[i][axis] += h;
        CHECK(std::abs((hi - lo) / (2 * h) - analytic[i][axis]) <= 1e-5);
    }
}

TEST_CASE("train: zero epochs returns an empty report and leaves the net alone") {
    const Dataset ds = toy_dataset(2, 64, 10);
    FoldingNetConfig nc{64, 2, 4, 2, 1};
    FoldingNet net = init_network(nc, ds.clouds[0]);
    const auto before = net.trunk[0].w.v;
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.batch_size = 2;
    cfg.sample_size = 32;
    const TrainReport report = train(ds, net, cfg);
    CHECK(report.epoch_loss.empty());
    CHECK(report.rows.empty());
    CHECK(net.trunk[0].w.v == before);
}

TEST_CASE("train: config validation errors") {
    const Dataset ds = toy_dataset(2, 64, 11);
    FoldingNetConfig nc{64, 2, 4, 2, 1};
    FoldingNet net = init_network(nc, ds.clouds[0]);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 3;  // > N
    cfg.sample_size = 32;
    CHECK_THROWS_AS(train(ds, net, cfg), DataError);
    cfg.batch_size = 2;
    cfg.sample_size = 33;  // not divisible by K=2
    CHECK_THROWS_AS(train(ds, net, cfg), DataError);
}

TEST_CASE("train: toy run drops the aligned loss and mostly decreases per epoch") {
    const Dataset ds = toy_dataset(4, 1024, 20);
    FoldingNetConfig nc{1024, 4, 4, 4, 7};
    FoldingNet net = init_network(nc, ds.clouds[0]);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 4;
    cfg.sample_size = 256;
    cfg.depth = 2;
    cfg.epsilon = 0.05;
    cfg.max_iterations = 1000;
    cfg.lr = 0.01;
    cfg.seed = 3;
    const TrainReport report = train(ds, net, cfg);
    REQUIRE(report.epoch_loss.size() == 50);

    int non_increasing = 0;
    for (size_t e = 1; e < 50; ++e)
        if (report.epoch_loss[e] <= report.epoch_loss[e - 1] + 1e-12) ++non_increasing;
    // Baseline run of this config: 49/49 non-increasing, final/initial ~0.07.
    CHECK(non_increasing >= 45);  // >= 90% of the 49 consecutive pairs
    CHECK(report.epoch_loss.back() < 0.3 * report.epoch_loss.front());
}

TEST_CASE("train: fixed seed reproduces the run; checkpoints resume it") {
    const Dataset ds = toy_dataset(2, 256, 30);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 2;
    cfg.sample_size = 64;
    cfg.depth = 1;
    cfg.epsilon = 0.05;
    cfg.max_iterations = 1000;
    cfg.lr = 0.01;
    cfg.seed = 44;

    FoldingNetConfig nc{256, 2, 4, 2, 9};
    FoldingNet net_a = init_network(nc, ds.clouds[1]);
    std::ostringstream log_a;
    const TrainReport rep_a = train(ds, net_a, cfg, &log_a);

    FoldingNet net_b = init_network(nc, ds.clouds[1]);
    std::ostringstream log_b;
    const TrainReport rep_b = train(ds, net_b, cfg, &log_b);

    CHECK(rep_a.epoch_loss == rep_b.epoch_loss);
    CHECK(rep_a.epoch_swaps == rep_b.epoch_swaps);
    CHECK(strip_elapsed(log_a.str()) == strip_elapsed(log_b.str()));
    CHECK(net_a.trunk[3].w.v == net_b.trunk[3].w.v);
    CHECK(net_a.source.v == net_b.source.v);

    // Interrupted + resumed run matches the unbroken one step for step.
    FoldingNet net_c = init_network(nc, ds.clouds[1]);
    TrainState state_c = make_train_state(ds, net_c, cfg);
    TrainConfig first_half = cfg;
    first_half.epochs = 3;
    std::ostringstream log_c;
    train(ds, net_c, state_c, first_half, &log_c);

    const auto ckpt = fs::temp_directory_path() / "nqad_resume.nqad";
    TrainMeta meta;
    meta.epochs_done = state_c.epochs_done;
    meta.master_seed = cfg.seed;
    meta.greedy_done = state_c.greedy_done;
    for (const auto& m : state_c.matchings) meta.perms.push_back(m.origin);
    save_checkpoint(net_c, state_c.adam, meta, ckpt.string());

    Checkpoint ck = load_checkpoint(ckpt.string());
    FoldingNet net_d = std::move(ck.net);
    TrainState state_d = train_state_from_checkpoint(ds, std::move(ck));
    const TrainReport rep_d = train(ds, net_d, state_d, cfg, &log_c);

    REQUIRE(rep_d.epoch_loss.size() == 3);  // epochs 4..6
    for (int e = 0; e < 3; ++e) CHECK(rep_d.epoch_loss[e] == rep_a.epoch_loss[3 + e]);
    CHECK(net_d.trunk[3].w.v == net_a.trunk[3].w.v);
    CHECK(strip_elapsed(log_c.str()) == strip_elapsed(log_a.str()));
    fs::remove(ckpt);
}

TEST_CASE("train: reassignment accounting reaches the report") {
    const Dataset ds = toy_dataset(2, 128, 40);
    FoldingNetConfig nc{128, 2, 4, 2, 13};
    FoldingNet net = init_network(nc, ds.clouds[0]);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 2;
    cfg.sample_size = 64;
    cfg.depth = 1;
    cfg.epsilon = 0.05;
    cfg.max_iterations = 1000;
    cfg.lr = 0.01;
    const TrainReport report = train(ds, net, cfg);
    REQUIRE(report.epoch_swaps.size() == 3);
    uint32_t total = 0;
    for (uint32_t s : report.epoch_swaps) total += s;
    CHECK(total > 0);  // predictions start far off; some swaps must fire
}

}  // TEST_SUITE
