#include "nqad/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nqad/error.hpp"
#include "nqad/knn.hpp"
#include "nqad/metrics.hpp"
#include "nqad/rng.hpp"

namespace nqad {

StudyObjective study_objective_from_name(const std::string& name) {
    if (name == "aug_chamfer_direct") return StudyObjective::aug_chamfer_direct;
    if (name == "chamfer_proxy") return StudyObjective::chamfer_proxy;
    if (name == "mse_random_perfect") return StudyObjective::mse_random_perfect;
    throw UsageError("unknown study objective '" + name + "'");
}

const char* study_objective_name(StudyObjective o) {
    switch (o) {
        case StudyObjective::aug_chamfer_direct:
            return "aug_chamfer_direct";
        case StudyObjective::chamfer_proxy:
            return "chamfer_proxy";
        case StudyObjective::mse_random_perfect:
            return "mse_random_perfect";
    }
    return "?";
}

namespace {

// Directed nearest-neighbor sums and their subgradients w.r.t. pts.
struct ChamferTerms {
    double sum_pt = 0.0;  // pts -> target
    double sum_tp = 0.0;  // target -> pts
    std::vector<Vec3> grad_pt;
    std::vector<Vec3> grad_tp;
};

ChamferTerms chamfer_terms(const std::vector<Vec3>& pts, const std::vector<Vec3>& target) {
    ChamferTerms t;
    t.grad_pt.assign(pts.size(), {});
    t.grad_tp.assign(pts.size(), {});
    KnnIndex target_index(target);
    for (size_t i = 0; i < pts.size(); ++i) {
        const auto hit = target_index.nearest(pts[i]);
        t.sum_pt += hit.distance;
        if (hit.distance > 0.0)
            t.grad_pt[i] += (pts[i] - target[hit.index]) * (1.0 / hit.distance);
    }
    KnnIndex pts_index(pts);
    for (size_t j = 0; j < target.size(); ++j) {
        const auto hit = pts_index.nearest(target[j]);
        t.sum_tp += hit.distance;
        if (hit.distance > 0.0)
            t.grad_tp[hit.index] += (pts[hit.index] - target[j]) * (1.0 / hit.distance);
    }
    return t;
}

struct FlatAdam {
    std::vector<double> m, v;
    uint64_t step = 0;
    double lr;
    explicit FlatAdam(size_t n, double lr_) : m(n, 0.0), v(n, 0.0), lr(lr_) {}
    void update(std::vector<double>& theta, const std::vector<double>& g) {
        ++step;
        const double bc1 = 1.0 - std::pow(0.9, double(step));
        const double bc2 = 1.0 - std::pow(0.999, double(step));
        for (size_t i = 0; i < theta.size(); ++i) {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + 1e-8);
        }
    }
};

StudyCurve run_single(const ChamferStudyConfig& cfg, size_t fraction_index) {
    const double fraction = cfg.fractions[fraction_index];
    if (!(fraction > 0.0) || fraction > 1.0)
        throw DataError("study fraction must lie in (0, 1]");
    const uint32_t m_full = static_cast<uint32_t>(cfg.target.size());
    const uint32_t m = std::max<uint32_t>(2, static_cast<uint32_t>(std::llround(fraction * m_full)));

    // Subsampled target.
    PointCloud target_sub;
    if (m >= m_full) {
        target_sub = cfg.target;
    } else {
        Rng rng(cfg.seed, "study_subsample", fraction_index);
        for (uint32_t idx : rng.sample_without_replacement(m_full, m))
            target_sub.pts.push_back(cfg.target[idx]);
    }
    if (cfg.k >= target_sub.size())
        throw DataError("study: k >= subsampled target size");
    const double normalizer = sampling_normalizer(target_sub, cfg.k);

    // Unit-spacing lattice source centered on the target centroid.
    PointCloud lattice = gen_synthetic(SyntheticKind::grid_cube, m, 0);
    Vec3 tc{0, 0, 0}, lc{0, 0, 0};
    for (const Vec3& p : target_sub.pts) tc += p;
    for (const Vec3& p : lattice.pts) lc += p;
    const Vec3 shift = (tc * (1.0 / m)) - (lc * (1.0 / m));
    for (Vec3& p : lattice.pts) p += shift;

    // Fixed random bijection for the perfect-matching proxy.
    std::vector<uint32_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    if (cfg.objective == StudyObjective::mse_random_perfect) {
        Rng rng(cfg.seed, "study_perm", fraction_index);
        rng.shuffle(perm);
    }

    std::vector<double> offsets(size_t(m) * 3, 0.0);
    std::vector<double> grads(size_t(m) * 3, 0.0);
    FlatAdam adam(offsets.size(), cfg.lr);

    StudyCurve curve;
    curve.objective = cfg.objective;
    curve.fraction = fraction;
    curve.values.reserve(cfg.steps + 1);

    std::vector<Vec3> pts(m);
    auto materialize = [&] {
        for (uint32_t i = 0; i < m; ++i)
            pts[i] = lattice[i] + Vec3{offsets[size_t(i) * 3], offsets[size_t(i) * 3 + 1],
                                       offsets[size_t(i) * 3 + 2]};
    };
    auto record = [&] {
        PointCloud current;
        current.pts = pts;
        const double da = aug_chamfer(current, target_sub);
        curve.values.push_back(da > 0.0 ? std::log(da / normalizer)
                                        : -std::numeric_limits<double>::infinity());
    };

    materialize();
    record();
    for (uint32_t it = 0; it < cfg.steps; ++it) {
        std::fill(grads.begin(), grads.end(), 0.0);
        switch (cfg.objective) {
            case StudyObjective::aug_chamfer_direct: {
                const ChamferTerms t = chamfer_terms(pts, target_sub.pts);
                const auto& g = t.sum_pt >= t.sum_tp ? t.grad_pt : t.grad_tp;
                for (uint32_t i = 0; i < m; ++i) {
                    grads[size_t(i) * 3] = g[i].x;
                    grads[size_t(i) * 3 + 1] = g[i].y;
                    grads[size_t(i) * 3 + 2] = g[i].z;
                }
                break;
            }
            case StudyObjective::chamfer_proxy: {
                const ChamferTerms t = chamfer_terms(pts, target_sub.pts);
                for (uint32_t i = 0; i < m; ++i) {
                    grads[size_t(i) * 3] = t.grad_pt[i].x + t.grad_tp[i].x;
                    grads[size_t(i) * 3 + 1] = t.grad_pt[i].y + t.grad_tp[i].y;
                    grads[size_t(i) * 3 + 2] = t.grad_pt[i].z + t.grad_tp[i].z;
                }
                break;
            }
            case StudyObjective::mse_random_perfect: {
                const double scale = 2.0 / double(m);
                double mse = 0.0;
                for (uint32_t i = 0; i < m; ++i) {
                    const Vec3 diff = pts[i] - target_sub[perm[i]];
                    mse += dist2(pts[i], target_sub[perm[i]]);
                    grads[size_t(i) * 3] = scale * diff.x;
                    grads[size_t(i) * 3 + 1] = scale * diff.y;
                    grads[size_t(i) * 3 + 2] = scale * diff.z;
                }
                curve.final_aligned_mse = mse / double(m);
                break;
            }
        }
        adam.update(offsets, grads);
        materialize();
        record();
    }
    if (cfg.objective == StudyObjective::mse_random_perfect) {
        double mse = 0.0;
        for (uint32_t i = 0; i < m; ++i) mse += dist2(pts[i], target_sub[perm[i]]);
        curve.final_aligned_mse = mse / double(m);
    }
    return curve;
}

}  // namespace

std::vector<StudyCurve> chamfer_study(const ChamferStudyConfig& cfg) {
    if (cfg.target.empty()) throw DataError("study target is empty");
    if (cfg.fractions.empty()) throw DataError("study needs at least one fraction");
    std::vector<StudyCurve> out;
    out.reserve(cfg.fractions.size());
    for (size_t i = 0; i < cfg.fractions.size(); ++i) out.push_back(run_single(cfg, i));
    return out;
}

EmkdEvaluation evaluate_emkd(const Dataset& dataset, const FoldingNet& net, int depth,
                             double epsilon, uint32_t max_iterations) {
    if (dataset.points_per_cloud() != net.config.points)
        throw DataError("dataset cloud size does not match network");
    if (dataset.size() != net.config.instances)
        throw DataError("dataset instance count does not match network");
    std::vector<uint32_t> all(net.config.points);
    std::iota(all.begin(), all.end(), 0);
    EmkdEvaluation eval;
    eval.per_instance.resize(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i) {
        PointCloud recon;
        recon.pts = predict_points(net, static_cast<uint32_t>(i), all);
        eval.per_instance[i] = emkd(recon, dataset.clouds[i], depth, epsilon, max_iterations).value;
    }
    double sum = 0.0;
    for (double v : eval.per_instance) sum += v;
    eval.mean = sum / double(eval.per_instance.size());
    return eval;
}

}  // namespace nqad
