#include "nqad/autodecoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "nqad/error.hpp"
#include "nqad/rng.hpp"

namespace nqad {

namespace {

constexpr double kSeluLambda = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

inline double selu(double z) {
    return z > 0.0 ? kSeluLambda * z : kSeluLambda * kSeluAlpha * std::expm1(z);
}

// Derivative recovered from the post-activation value.
inline double selu_grad_from_output(double y) {
    return y > 0.0 ? kSeluLambda : y + kSeluLambda * kSeluAlpha;
}

void selu_inplace(Mat& m) {
    for (double& v : m.v) v = selu(v);
}

void selu_backward(const Mat& post, Mat& grad) {
    for (size_t i = 0; i < post.v.size(); ++i) grad.v[i] *= selu_grad_from_output(post.v[i]);
}

LinearLayer init_layer(uint32_t out, uint32_t in, Rng& rng) {
    LinearLayer layer;
    layer.w = Mat(out, in);
    layer.b.assign(out, 0.0);
    const double sigma = 1.0 / std::sqrt(double(in));
    for (double& v : layer.w.v) v = rng.normal(0.0, sigma);
    return layer;
}

struct TensorRef {
    double* data;
    size_t size;
    std::string name;
};

template <class Net>
void collect_layer(std::vector<TensorRef>& out, Net& layer, const std::string& prefix) {
    out.push_back({layer.w.v.data(), layer.w.v.size(), prefix + ".w"});
    out.push_back({layer.b.data(), layer.b.size(), prefix + ".b"});
}

// Canonical tensor order shared by Adam and the checkpoint format.
template <class NetLike>
std::vector<TensorRef> tensor_refs(NetLike& n) {
    std::vector<TensorRef> out;
    for (size_t i = 0; i < n.trunk.size(); ++i)
        collect_layer(out, n.trunk[i], "trunk" + std::to_string(i + 1));
    for (size_t k = 0; k < n.heads.size(); ++k) {
        collect_layer(out, n.heads[k].hidden, "head" + std::to_string(k) + ".hidden");
        collect_layer(out, n.heads[k].out, "head" + std::to_string(k) + ".out");
    }
    out.push_back({n.source.v.data(), n.source.v.size(), "source"});
    out.push_back({n.latent.v.data(), n.latent.v.size(), "latent"});
    return out;
}

}  // namespace

std::vector<uint32_t> FoldingNet::patch_offsets() const {
    std::vector<uint32_t> off(config.patches + 1);
    for (uint32_t p = 0; p <= config.patches; ++p) off[p] = p * patch_size();
    return off;
}

FoldingNet init_network(const FoldingNetConfig& config, const PointCloud& init_cloud) {
    if (config.points == 0 || config.patches == 0 || config.latent_dim == 0 ||
        config.instances == 0)
        throw DataError("network config fields must be positive");
    if (config.points % config.patches != 0)
        throw DataError("point count " + std::to_string(config.points) +
                        " not divisible by patch count " + std::to_string(config.patches));
    if (init_cloud.size() != config.points)
        throw DataError("init cloud has " + std::to_string(init_cloud.size()) +
                        " points, config expects " + std::to_string(config.points));

    FoldingNet net;
    net.config = config;
    Rng wrng(config.seed, "weights");
    net.trunk[0] = init_layer(kTrunkWidth, 3 + config.latent_dim, wrng);
    for (int i = 1; i < 4; ++i) net.trunk[i] = init_layer(kTrunkWidth, kTrunkWidth, wrng);
    net.heads.resize(config.patches);
    for (auto& head : net.heads) {
        head.hidden = init_layer(kTrunkWidth, kTrunkWidth + 3, wrng);
        head.out = init_layer(3, kTrunkWidth, wrng);
    }
    net.source = Mat(config.points, 3);
    for (uint32_t i = 0; i < config.points; ++i) {
        net.source.at(i, 0) = init_cloud[i].x;
        net.source.at(i, 1) = init_cloud[i].y;
        net.source.at(i, 2) = init_cloud[i].z;
    }
    Rng lrng(config.seed, "latent");
    net.latent = Mat(config.instances, config.latent_dim);
    for (double& v : net.latent.v) v = lrng.normal(0.0, 0.01);
    return net;
}

void Gradients::zero() {
    for (auto& layer : trunk) {
        layer.w.zero();
        std::fill(layer.b.begin(), layer.b.end(), 0.0);
    }
    for (auto& head : heads) {
        head.hidden.w.zero();
        std::fill(head.hidden.b.begin(), head.hidden.b.end(), 0.0);
        head.out.w.zero();
        std::fill(head.out.b.begin(), head.out.b.end(), 0.0);
    }
    source.zero();
    latent.zero();
}

Gradients make_gradients(const FoldingNet& net) {
    Gradients g;
    for (size_t i = 0; i < 4; ++i) {
        g.trunk[i].w = Mat(net.trunk[i].w.rows, net.trunk[i].w.cols);
        g.trunk[i].b.assign(net.trunk[i].b.size(), 0.0);
    }
    g.heads.resize(net.heads.size());
    for (size_t k = 0; k < net.heads.size(); ++k) {
        g.heads[k].hidden.w = Mat(net.heads[k].hidden.w.rows, net.heads[k].hidden.w.cols);
        g.heads[k].hidden.b.assign(net.heads[k].hidden.b.size(), 0.0);
        g.heads[k].out.w = Mat(net.heads[k].out.w.rows, net.heads[k].out.w.cols);
        g.heads[k].out.b.assign(net.heads[k].out.b.size(), 0.0);
    }
    g.source = Mat(net.source.rows, net.source.cols);
    g.latent = Mat(net.latent.rows, net.latent.cols);
    return g;
}

namespace {

std::vector<Vec3> run_forward(const FoldingNet& net, uint32_t instance,
                              std::span<const uint32_t> ids, ForwardCache* cache) {
    if (instance >= net.config.instances)
        throw DataError("instance " + std::to_string(instance) + " out of range (N=" +
                        std::to_string(net.config.instances) + ")");
    for (uint32_t id : ids)
        if (id >= net.config.points)
            throw DataError("source id " + std::to_string(id) + " out of range");

    const uint32_t k = net.config.patches;
    const uint32_t l = net.config.latent_dim;
    const double* code = net.latent.row(instance);

    // Group rows by patch, preserving input order within a patch.
    std::vector<std::vector<uint32_t>> by_patch(k);
    for (uint32_t pos = 0; pos < ids.size(); ++pos)
        by_patch[net.patch_of(ids[pos])].push_back(pos);

    std::vector<Vec3> out(ids.size());
    if (cache) {
        cache->instance = instance;
        cache->blocks.clear();
    }
    for (uint32_t p = 0; p < k; ++p) {
        const auto& positions = by_patch[p];
        if (positions.empty()) continue;
        const uint32_t bn = static_cast<uint32_t>(positions.size());

        Mat x0(bn, 3 + l);
        for (uint32_t r = 0; r < bn; ++r) {
            const uint32_t id = ids[positions[r]];
            double* row = x0.row(r);
            row[0] = net.source.at(id, 0);
            row[1] = net.source.at(id, 1);
            row[2] = net.source.at(id, 2);
            for (uint32_t c = 0; c < l; ++c) row[3 + c] = code[c];
        }
        Mat x1, x2, x3, x4, u1, y;
        linear_forward(x0, net.trunk[0].w, net.trunk[0].b, x1);
        selu_inplace(x1);
        linear_forward(x1, net.trunk[1].w, net.trunk[1].b, x2);
        selu_inplace(x2);
        linear_forward(x2, net.trunk[2].w, net.trunk[2].b, x3);
        selu_inplace(x3);
        linear_forward(x3, net.trunk[3].w, net.trunk[3].b, x4);
        selu_inplace(x4);

        Mat u0(bn, kTrunkWidth + 3);
        for (uint32_t r = 0; r < bn; ++r) {
            double* row = u0.row(r);
            std::memcpy(row, x4.row(r), kTrunkWidth * sizeof(double));
            const double* q = x0.row(r);
            row[kTrunkWidth] = q[0];
            row[kTrunkWidth + 1] = q[1];
            row[kTrunkWidth + 2] = q[2];
        }
        linear_forward(u0, net.heads[p].hidden.w, net.heads[p].hidden.b, u1);
        selu_inplace(u1);
        linear_forward(u1, net.heads[p].out.w, net.heads[p].out.b, y);

        for (uint32_t r = 0; r < bn; ++r)
            out[positions[r]] = {y.at(r, 0), y.at(r, 1), y.at(r, 2)};

        if (cache) {
            ForwardCache::PatchBlock block;
            block.patch = p;
            block.positions = positions;
            block.ids.reserve(bn);
            for (uint32_t pos : positions) block.ids.push_back(ids[pos]);
            block.x1 = std::move(x1);
            block.x2 = std::move(x2);
            block.x3 = std::move(x3);
            block.x4 = std::move(x4);
            block.u1 = std::move(u1);
            block.y = std::move(y);
            cache->blocks.push_back(std::move(block));
        }
    }
    return out;
}

}  // namespace

std::vector<Vec3> forward(const FoldingNet& net, uint32_t instance,
                          std::span<const uint32_t> source_ids) {
    std::vector<uint32_t> counts(net.config.patches, 0);
    for (uint32_t id : source_ids) {
        if (id >= net.config.points)
            throw DataError("source id " + std::to_string(id) + " out of range");
        ++counts[net.patch_of(id)];
    }
    for (uint32_t c : counts)
        if (c != counts[0])
            throw DataError("forward requires equal per-patch counts; use predict_points for "
                            "arbitrary id sets");
    return run_forward(net, instance, source_ids, nullptr);
}

std::vector<Vec3> predict_points(const FoldingNet& net, uint32_t instance,
                                 std::span<const uint32_t> source_ids) {
    return run_forward(net, instance, source_ids, nullptr);
}

std::vector<Vec3> forward_cached(const FoldingNet& net, uint32_t instance,
                                 std::span<const uint32_t> source_ids, ForwardCache& cache) {
    return run_forward(net, instance, source_ids, &cache);
}

void backward(const FoldingNet& net, const ForwardCache& cache, std::span<const Vec3> upstream,
              Gradients& grads) {
    const uint32_t l = net.config.latent_dim;
    const double* code = net.latent.row(cache.instance);
    double* dcode = grads.latent.row(cache.instance);

    for (const auto& block : cache.blocks) {
        const uint32_t bn = static_cast<uint32_t>(block.positions.size());
        const uint32_t p = block.patch;

        Mat dy(bn, 3);
        for (uint32_t r = 0; r < bn; ++r) {
            const Vec3& g = upstream[block.positions[r]];
            dy.at(r, 0) = g.x;
            dy.at(r, 1) = g.y;
            dy.at(r, 2) = g.z;
        }

        // Rebuild the two concatenated inputs from current tensors; the
        // caller must not mutate parameters between forward and backward.
        Mat x0(bn, 3 + l);
        Mat u0(bn, kTrunkWidth + 3);
        for (uint32_t r = 0; r < bn; ++r) {
            const uint32_t id = block.ids[r];
            double* xr = x0.row(r);
            xr[0] = net.source.at(id, 0);
            xr[1] = net.source.at(id, 1);
            xr[2] = net.source.at(id, 2);
            for (uint32_t c = 0; c < l; ++c) xr[3 + c] = code[c];
            double* ur = u0.row(r);
            std::memcpy(ur, block.x4.row(r), kTrunkWidth * sizeof(double));
            ur[kTrunkWidth] = xr[0];
            ur[kTrunkWidth + 1] = xr[1];
            ur[kTrunkWidth + 2] = xr[2];
        }

        Mat du1;
        linear_backward_input(dy, net.heads[p].out.w, du1);
        linear_backward_params(dy, block.u1, grads.heads[p].out.w, grads.heads[p].out.b);
        selu_backward(block.u1, du1);

        Mat du0;
        linear_backward_input(du1, net.heads[p].hidden.w, du0);
        linear_backward_params(du1, u0, grads.heads[p].hidden.w, grads.heads[p].hidden.b);

        Mat dx4(bn, kTrunkWidth);
        for (uint32_t r = 0; r < bn; ++r)
            std::memcpy(dx4.row(r), du0.row(r), kTrunkWidth * sizeof(double));
        selu_backward(block.x4, dx4);

        Mat dx3;
        linear_backward_input(dx4, net.trunk[3].w, dx3);
        linear_backward_params(dx4, block.x3, grads.trunk[3].w, grads.trunk[3].b);
        selu_backward(block.x3, dx3);

        Mat dx2;
        linear_backward_input(dx3, net.trunk[2].w, dx2);
        linear_backward_params(dx3, block.x2, grads.trunk[2].w, grads.trunk[2].b);
        selu_backward(block.x2, dx2);

        Mat dx1;
        linear_backward_input(dx2, net.trunk[1].w, dx1);
        linear_backward_params(dx2, block.x1, grads.trunk[1].w, grads.trunk[1].b);
        selu_backward(block.x1, dx1);

        Mat dx0;
        linear_backward_input(dx1, net.trunk[0].w, dx0);
        linear_backward_params(dx1, x0, grads.trunk[0].w, grads.trunk[0].b);

        for (uint32_t r = 0; r < bn; ++r) {
            const uint32_t id = block.ids[r];
            const double* dxr = dx0.row(r);
            const double* dur = du0.row(r);
            grads.source.at(id, 0) += dxr[0] + dur[kTrunkWidth];
            grads.source.at(id, 1) += dxr[1] + dur[kTrunkWidth + 1];
            grads.source.at(id, 2) += dxr[2] + dur[kTrunkWidth + 2];
            for (uint32_t c = 0; c < l; ++c) dcode[c] += dxr[3 + c];
        }
    }
}

AdamState init_adam(const FoldingNet& net, double lr) {
    AdamState s;
    s.m = make_gradients(net);
    s.v = make_gradients(net);
    s.lr = lr;
    return s;
}

void adam_step(FoldingNet& net, AdamState& state, const Gradients& grads) {
    auto params = tensor_refs(net);
    auto g = tensor_refs(const_cast<Gradients&>(grads));
    auto m = tensor_refs(state.m);
    auto v = tensor_refs(state.v);

    for (size_t t = 0; t < g.size(); ++t)
        for (size_t i = 0; i < g[t].size; ++i)
            if (!std::isfinite(g[t].data[i]))
                throw DataError("non-finite gradient in tensor '" + g[t].name + "'");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (size_t t = 0; t < params.size(); ++t) {
        double* th = params[t].data;
        const double* gr = g[t].data;
        double* mm = m[t].data;
        double* vv = v[t].data;
        for (size_t i = 0; i < params[t].size; ++i) {
            mm[i] = state.beta1 * mm[i] + (1.0 - state.beta1) * gr[i];
            vv[i] = state.beta2 * vv[i] + (1.0 - state.beta2) * gr[i] * gr[i];
            const double mhat = mm[i] / bc1;
            const double vhat = vv[i] / bc2;
            th[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

namespace {

constexpr char kMagic[8] = {'N', 'Q', 'A', 'D', 'C', 'K', 'P', 'T'};
constexpr char kTrailer[8] = {'N', 'Q', 'A', 'D', 'E', 'N', 'D', '0'};
constexpr uint32_t kVersion = 1;

void write_raw(std::ofstream& f, const void* p, size_t n) {
    f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
void write_pod(std::ofstream& f, T v) {
    write_raw(f, &v, sizeof(T));
}

void read_raw(std::ifstream& f, void* p, size_t n, const std::string& path) {
    if (!f.read(static_cast<char*>(p), static_cast<std::streamsize>(n)))
        throw DataError("truncated checkpoint '" + path + "'");
}

template <class T>
T read_pod(std::ifstream& f, const std::string& path) {
    T v;
    read_raw(f, &v, sizeof(T), path);
    return v;
}

}  // namespace

void save_checkpoint(const FoldingNet& net, const AdamState& state, const TrainMeta& meta,
                     const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    write_raw(f, kMagic, 8);
    write_pod(f, kVersion);
    write_pod<uint64_t>(f, net.config.points);
    write_pod<uint64_t>(f, net.config.patches);
    write_pod<uint64_t>(f, net.config.latent_dim);
    write_pod<uint64_t>(f, net.config.instances);
    write_pod<uint64_t>(f, net.config.seed);
    write_pod<double>(f, state.lr);
    write_pod<double>(f, state.beta1);
    write_pod<double>(f, state.beta2);
    write_pod<double>(f, state.eps);
    write_pod<uint64_t>(f, state.step);
    write_pod<uint64_t>(f, meta.epochs_done);
    write_pod<uint64_t>(f, meta.master_seed);
    write_pod<uint8_t>(f, meta.greedy_done ? 1 : 0);
    write_pod<uint64_t>(f, meta.perms.size());
    for (const auto& perm : meta.perms) {
        write_pod<uint64_t>(f, perm.size());
        write_raw(f, perm.data(), perm.size() * sizeof(uint32_t));
    }
    write_pod<uint64_t>(f, meta.config_echo.size());
    write_raw(f, meta.config_echo.data(), meta.config_echo.size());

    auto net_refs = tensor_refs(const_cast<FoldingNet&>(net));
    auto m_refs = tensor_refs(const_cast<Gradients&>(state.m));
    auto v_refs = tensor_refs(const_cast<Gradients&>(state.v));
    write_pod<uint64_t>(f, net_refs.size());
    for (const auto& refs : {net_refs, m_refs, v_refs})
        for (const auto& r : refs) {
            write_pod<uint64_t>(f, r.size);
            write_raw(f, r.data, r.size * sizeof(double));
        }
    write_raw(f, kTrailer, 8);
    if (!f) throw DataError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint '" + path + "'");
    char magic[8];
    read_raw(f, magic, 8, path);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("'" + path + "' is not a checkpoint (bad magic)");
    const uint32_t version = read_pod<uint32_t>(f, path);
    if (version != kVersion)
        throw DataError("checkpoint version " + std::to_string(version) + " unsupported (want " +
                        std::to_string(kVersion) + ")");

    FoldingNetConfig config;
    config.points = static_cast<uint32_t>(read_pod<uint64_t>(f, path));
    config.patches = static_cast<uint32_t>(read_pod<uint64_t>(f, path));
    config.latent_dim = static_cast<uint32_t>(read_pod<uint64_t>(f, path));
    config.instances = static_cast<uint32_t>(read_pod<uint64_t>(f, path));
    config.seed = read_pod<uint64_t>(f, path);

    Checkpoint ck;
    PointCloud dummy;
    dummy.pts.resize(config.points);
    ck.net = init_network(config, dummy);
    ck.adam = init_adam(ck.net);
    ck.adam.lr = read_pod<double>(f, path);
    ck.adam.beta1 = read_pod<double>(f, path);
    ck.adam.beta2 = read_pod<double>(f, path);
    ck.adam.eps = read_pod<double>(f, path);
    ck.adam.step = read_pod<uint64_t>(f, path);
    ck.meta.epochs_done = read_pod<uint64_t>(f, path);
    ck.meta.master_seed = read_pod<uint64_t>(f, path);
    ck.meta.greedy_done = read_pod<uint8_t>(f, path) != 0;
    const uint64_t n_perms = read_pod<uint64_t>(f, path);
    ck.meta.perms.resize(n_perms);
    for (auto& perm : ck.meta.perms) {
        perm.resize(read_pod<uint64_t>(f, path));
        read_raw(f, perm.data(), perm.size() * sizeof(uint32_t), path);
    }
    ck.meta.config_echo.resize(read_pod<uint64_t>(f, path));
    read_raw(f, ck.meta.config_echo.data(), ck.meta.config_echo.size(), path);

    auto net_refs = tensor_refs(ck.net);
    auto m_refs = tensor_refs(ck.adam.m);
    auto v_refs = tensor_refs(ck.adam.v);
    const uint64_t n_tensors = read_pod<uint64_t>(f, path);
    if (n_tensors != net_refs.size())
        throw DataError("checkpoint tensor count mismatch in '" + path + "'");
    for (auto* refs : {&net_refs, &m_refs, &v_refs})
        for (auto& r : *refs) {
            const uint64_t size = read_pod<uint64_t>(f, path);
            if (size != r.size)
                throw DataError("checkpoint tensor '" + r.name + "' size mismatch in '" + path +
                                "'");
            read_raw(f, r.data, r.size * sizeof(double), path);
        }
    char trailer[8];
    read_raw(f, trailer, 8, path);
    if (std::memcmp(trailer, kTrailer, 8) != 0)
        throw DataError("checkpoint '" + path + "' trailer corrupt");
    return ck;
}

}  // namespace nqad
