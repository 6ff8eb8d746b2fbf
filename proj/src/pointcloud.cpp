#include "nqad/pointcloud.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nqad/error.hpp"
#include "nqad/rng.hpp"

namespace fs = std::filesystem;

namespace nqad {

namespace {

// Shortest decimal that parses back to the same double.
void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

double parse_coord(const char* begin, const char* end, const std::string& path, size_t line_no,
                   int column) {
    double v = 0.0;
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        throw DataError(path + ":" + std::to_string(line_no) + ": cannot parse coordinate " +
                        std::to_string(column) + " '" + std::string(begin, end) + "'");
    if (!std::isfinite(v))
        throw DataError(path + ":" + std::to_string(line_no) + ": non-finite coordinate '" +
                        std::string(begin, end) + "'");
    return v;
}

PointCloud load_xyz(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    PointCloud cloud;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const char* p = line.data();
        const char* end = p + line.size();
        Vec3 v;
        for (int c = 0; c < 3; ++c) {
            const char* tok_end = static_cast<const char*>(memchr(p, ' ', end - p));
            if (c < 2) {
                if (!tok_end)
                    throw DataError(path + ":" + std::to_string(line_no) +
                                    ": expected 3 coordinates, found " + std::to_string(c + 1));
                v[c] = parse_coord(p, tok_end, path, line_no, c + 1);
                p = tok_end + 1;
            } else {
                if (tok_end)
                    throw DataError(path + ":" + std::to_string(line_no) +
                                    ": trailing content after 3 coordinates");
                v[c] = parse_coord(p, end, path, line_no, c + 1);
            }
        }
        cloud.pts.push_back(v);
    }
    if (cloud.empty()) throw DataError("'" + path + "' contains no points");
    return cloud;
}

void save_xyz(const PointCloud& cloud, const std::string& path) {
    std::string out;
    out.reserve(cloud.size() * 24);
    for (const Vec3& v : cloud.pts) {
        append_double(out, v.x);
        out.push_back(' ');
        append_double(out, v.y);
        out.push_back(' ');
        append_double(out, v.z);
        out.push_back('\n');
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write failed for '" + path + "'");
}

struct PlyProperty {
    std::string type;
    std::string name;
    bool is_list = false;
};

size_t ply_type_size(const std::string& t, const std::string& path) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64" || t == "int64" || t == "uint64") return 8;
    throw DataError("'" + path + "': unknown ply type '" + t + "'");
}

PointCloud load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || (line != "ply" && line != "ply\r"))
        throw DataError("'" + path + "': missing ply magic");

    bool binary = false;
    struct Element {
        std::string name;
        size_t count = 0;
        std::vector<PlyProperty> props;
    };
    std::vector<Element> elements;
    size_t line_no = 1;
    for (;;) {
        if (!std::getline(in, line)) throw DataError("'" + path + "': unterminated ply header");
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "end_header") break;
        if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii")
                binary = false;
            else if (fmt == "binary_little_endian")
                binary = true;
            else
                throw DataError("'" + path + "': unsupported ply format '" + fmt + "'");
        } else if (kw == "element") {
            Element e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (kw == "property") {
            if (elements.empty())
                throw DataError("'" + path + "': property before element (line " +
                                std::to_string(line_no) + ")");
            PlyProperty p;
            ls >> p.type;
            if (p.type == "list") {
                std::string count_t, val_t;
                ls >> count_t >> val_t >> p.name;
                p.is_list = true;
            } else {
                ls >> p.name;
            }
            elements.back().props.push_back(p);
        } else {
            throw DataError("'" + path + "': unknown ply header keyword '" + kw + "'");
        }
    }

    PointCloud cloud;
    for (const Element& e : elements) {
        if (e.name != "vertex") {
            if (cloud.empty()) {
                // Elements stored before the vertices must be skipped byte-exactly.
                std::cerr << "warning: '" << path << "': skipping ply element '" << e.name
                          << "'\n";
                if (binary) {
                    size_t row = 0;
                    for (const auto& p : e.props) {
                        if (p.is_list)
                            throw DataError("'" + path + "': cannot skip binary list property in '" +
                                            e.name + "'");
                        row += ply_type_size(p.type, path);
                    }
                    in.seekg(static_cast<std::streamoff>(row * e.count), std::ios::cur);
                } else {
                    for (size_t i = 0; i < e.count; ++i)
                        if (!std::getline(in, line))
                            throw DataError("'" + path + "': truncated ply element '" + e.name + "'");
                }
            } else {
                std::cerr << "warning: '" << path << "': ignoring trailing ply element '" << e.name
                          << "'\n";
                break;
            }
            continue;
        }

        int ix = -1, iy = -1, iz = -1;
        for (size_t i = 0; i < e.props.size(); ++i) {
            if (e.props[i].name == "x") ix = static_cast<int>(i);
            if (e.props[i].name == "y") iy = static_cast<int>(i);
            if (e.props[i].name == "z") iz = static_cast<int>(i);
        }
        if (ix < 0 || iy < 0 || iz < 0)
            throw DataError("'" + path + "': vertex element lacks x/y/z properties");

        cloud.pts.reserve(e.count);
        if (binary) {
            std::vector<size_t> sizes;
            size_t row = 0;
            for (const auto& p : e.props) {
                if (p.is_list)
                    throw DataError("'" + path + "': list property in vertex element unsupported");
                sizes.push_back(ply_type_size(p.type, path));
                row += sizes.back();
            }
            std::vector<char> buf(row);
            for (size_t i = 0; i < e.count; ++i) {
                if (!in.read(buf.data(), static_cast<std::streamsize>(row)))
                    throw DataError("'" + path + "': truncated ply vertex data");
                Vec3 v;
                size_t off = 0;
                for (size_t pi = 0; pi < e.props.size(); ++pi) {
                    const int coord = pi == size_t(ix) ? 0 : (pi == size_t(iy) ? 1 : (pi == size_t(iz) ? 2 : -1));
                    if (coord >= 0) {
                        double val;
                        if (sizes[pi] == 4) {
                            float fv;
                            std::memcpy(&fv, buf.data() + off, 4);
                            val = fv;
                        } else if (sizes[pi] == 8) {
                            std::memcpy(&val, buf.data() + off, 8);
                        } else {
                            throw DataError("'" + path + "': x/y/z must be float or double");
                        }
                        if (!std::isfinite(val))
                            throw DataError("'" + path + "': non-finite coordinate in vertex " +
                                            std::to_string(i));
                        v[coord] = val;
                    }
                    off += sizes[pi];
                }
                cloud.pts.push_back(v);
            }
        } else {
            for (size_t i = 0; i < e.count; ++i) {
                if (!std::getline(in, line))
                    throw DataError("'" + path + "': truncated ply vertex data");
                ++line_no;
                std::istringstream ls(line);
                Vec3 v;
                for (size_t pi = 0; pi < e.props.size(); ++pi) {
                    double val;
                    if (!(ls >> val))
                        throw DataError(path + ":" + std::to_string(line_no) +
                                        ": cannot parse vertex property " + std::to_string(pi + 1));
                    const int coord = pi == size_t(ix) ? 0 : (pi == size_t(iy) ? 1 : (pi == size_t(iz) ? 2 : -1));
                    if (coord >= 0) {
                        if (!std::isfinite(val))
                            throw DataError(path + ":" + std::to_string(line_no) +
                                            ": non-finite coordinate");
                        v[coord] = val;
                    }
                }
                cloud.pts.push_back(v);
            }
        }
    }
    if (cloud.empty()) throw DataError("'" + path + "' contains no vertices");
    return cloud;
}

void save_ply(const PointCloud& cloud, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    for (const Vec3& v : cloud.pts) {
        double c[3] = {v.x, v.y, v.z};
        f.write(reinterpret_cast<const char*>(c), 24);
    }
    if (!f) throw DataError("write failed for '" + path + "'");
}

void check_finite(const PointCloud& cloud, const std::string& path) {
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& v = cloud[i];
        if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
            throw DataError("'" + path + "': non-finite coordinate at point " + std::to_string(i));
    }
}

}  // namespace

CloudFormat format_for_path(const std::string& path) {
    const auto ext = fs::path(path).extension().string();
    return ext == ".ply" ? CloudFormat::ply : CloudFormat::xyz_ascii;
}

PointCloud load_cloud(const std::string& path, CloudFormat format) {
    PointCloud c = format == CloudFormat::ply ? load_ply(path) : load_xyz(path);
    check_finite(c, path);
    return c;
}

PointCloud load_cloud(const std::string& path) { return load_cloud(path, format_for_path(path)); }

void save_cloud(const PointCloud& cloud, const std::string& path, CloudFormat format) {
    if (format == CloudFormat::ply)
        save_ply(cloud, path);
    else
        save_xyz(cloud, path);
}

Dataset load_dataset_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir + "' does not exist");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".xyz" || ext == ".ply") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .xyz or .ply files in '" + dir + "'");
    Dataset ds;
    for (const auto& f : files) {
        ds.clouds.push_back(load_cloud(f));
        ds.names.push_back(fs::path(f).filename().string());
        if (ds.clouds.back().size() != ds.clouds.front().size())
            throw DataError("'" + f + "' has " + std::to_string(ds.clouds.back().size()) +
                            " points but '" + ds.names.front() + "' has " +
                            std::to_string(ds.clouds.front().size()));
    }
    return ds;
}

std::vector<uint32_t> uniform_sample_indices(uint32_t m, const SampleSpec& spec,
                                             std::span<const uint32_t> patch_offsets) {
    if (spec.sample_size > m)
        throw DataError("sample_size " + std::to_string(spec.sample_size) + " exceeds point count " +
                        std::to_string(m));
    Rng rng(spec.seed, "sample_indices");
    if (!spec.per_patch_equal) {
        return rng.sample_without_replacement(m, spec.sample_size);
    }
    if (patch_offsets.size() < 2)
        throw DataError("per-patch sampling requires patch boundaries");
    const uint32_t k = static_cast<uint32_t>(patch_offsets.size() - 1);
    if (spec.sample_size % k != 0)
        throw DataError("sample_size " + std::to_string(spec.sample_size) +
                        " not divisible by patch count " + std::to_string(k));
    const uint32_t per_patch = spec.sample_size / k;
    std::vector<uint32_t> out;
    out.reserve(spec.sample_size);
    for (uint32_t p = 0; p < k; ++p) {
        const uint32_t lo = patch_offsets[p], hi = patch_offsets[p + 1];
        if (hi > m || lo >= hi) throw DataError("invalid patch boundaries");
        if (per_patch > hi - lo)
            throw DataError("patch " + std::to_string(p) + " has " + std::to_string(hi - lo) +
                            " points, cannot draw " + std::to_string(per_patch));
        for (uint32_t idx : rng.sample_without_replacement(hi - lo, per_patch))
            out.push_back(lo + idx);
    }
    return out;
}

SyntheticKind synthetic_kind_from_name(const std::string& name) {
    if (name == "grid_cube") return SyntheticKind::grid_cube;
    if (name == "two_scale_teeth") return SyntheticKind::two_scale_teeth;
    if (name == "gaussian_blobs") return SyntheticKind::gaussian_blobs;
    throw UsageError("unknown synthetic kind '" + name + "'");
}

namespace {

PointCloud gen_grid_cube(uint32_t m) {
    if (m < 1) throw DataError("grid_cube requires m >= 1");
    uint32_t side = 1;
    while (side * side * side < m) ++side;
    PointCloud cloud;
    cloud.pts.reserve(m);
    for (uint32_t x = 0; x < side && cloud.size() < m; ++x)
        for (uint32_t y = 0; y < side && cloud.size() < m; ++y)
            for (uint32_t z = 0; z < side && cloud.size() < m; ++z)
                cloud.pts.push_back({double(x), double(y), double(z)});
    return cloud;
}

PointCloud gen_two_scale_teeth(uint32_t m, uint64_t seed) {
    if (m < 16) throw DataError("two_scale_teeth requires m >= 16");
    Rng rng(seed, "two_scale_teeth");
    const uint32_t n_base = (m + 1) / 2;
    const uint32_t n_teeth = m - n_base;
    const double extent = std::cbrt(double(m));  // comparable to a unit-spacing lattice

    PointCloud cloud;
    cloud.pts.reserve(m);

    // Base sheet: jittered grid over [0, extent]^2 with a smooth height field.
    const uint32_t grid = static_cast<uint32_t>(std::ceil(std::sqrt(double(n_base))));
    const double step = extent / grid;
    for (uint32_t i = 0; i < n_base; ++i) {
        const uint32_t gx = i % grid, gy = i / grid;
        const double x = (gx + 0.5) * step + rng.normal(0.0, 0.15 * step);
        const double y = (gy + 0.5) * step + rng.normal(0.0, 0.15 * step);
        const double z =
            0.15 * extent * std::sin(6.283185307179586 * x / extent) *
            std::cos(6.283185307179586 * y / extent);
        cloud.pts.push_back({x, y, z});
    }

    // Teeth: dense spikes protruding from the sheet. Cluster spread is a
    // small fraction of the sheet spacing, so the protrusion subset has a
    // much smaller mean neighbor distance than the base subset.
    const uint32_t n_clusters = std::max<uint32_t>(4, m / 512);
    std::vector<Vec3> centers(n_clusters);
    for (auto& c : centers) {
        const double x = (0.15 + 0.7 * rng.uniform01()) * extent;
        const double y = (0.15 + 0.7 * rng.uniform01()) * extent;
        const double z =
            0.15 * extent * std::sin(6.283185307179586 * x / extent) *
            std::cos(6.283185307179586 * y / extent);
        c = {x, y, z};
    }
    const double height = 0.12 * extent;
    const double radius = 0.02 * extent;
    for (uint32_t i = 0; i < n_teeth; ++i) {
        const Vec3& c = centers[i % n_clusters];
        const double t = rng.uniform01();
        const double r = radius * (1.0 - 0.7 * t);
        const double a = 6.283185307179586 * rng.uniform01();
        cloud.pts.push_back({c.x + r * std::cos(a) + rng.normal(0.0, 0.1 * radius),
                             c.y + r * std::sin(a) + rng.normal(0.0, 0.1 * radius),
                             c.z + t * height});
    }
    return cloud;
}

PointCloud gen_gaussian_blobs(uint32_t m, uint64_t seed) {
    if (m < 1) throw DataError("gaussian_blobs requires m >= 1");
    Rng rng(seed, "gaussian_blobs");
    const double extent = std::cbrt(double(m));
    const uint32_t n_blobs = 5;
    std::vector<Vec3> centers(n_blobs);
    for (auto& c : centers)
        c = {extent * rng.uniform01(), extent * rng.uniform01(), extent * rng.uniform01()};
    const double sigma = 0.08 * extent;
    PointCloud cloud;
    cloud.pts.reserve(m);
    for (uint32_t i = 0; i < m; ++i) {
        const Vec3& c = centers[rng.below(n_blobs)];
        cloud.pts.push_back(
            {rng.normal(c.x, sigma), rng.normal(c.y, sigma), rng.normal(c.z, sigma)});
    }
    return cloud;
}

}  // namespace

PointCloud gen_synthetic(SyntheticKind kind, uint32_t m, uint64_t seed) {
    switch (kind) {
        case SyntheticKind::grid_cube:
            return gen_grid_cube(m);
        case SyntheticKind::two_scale_teeth:
            return gen_two_scale_teeth(m, seed);
        case SyntheticKind::gaussian_blobs:
            return gen_gaussian_blobs(m, seed);
    }
    throw UsageError("unknown synthetic kind");
}

void normalize_unit_sphere(PointCloud& cloud) {
    if (cloud.empty()) throw DataError("cannot normalize an empty cloud");
    Vec3 c{0, 0, 0};
    for (const Vec3& p : cloud.pts) c += p;
    const double inv = 1.0 / double(cloud.size());
    c = c * inv;
    double r2 = 0.0;
    for (const Vec3& p : cloud.pts) r2 = std::max(r2, dist2(p, c));
    const double scale = r2 > 0.0 ? 1.0 / std::sqrt(r2) : 1.0;
    for (Vec3& p : cloud.pts) p = (p - c) * scale;
}

}  // namespace nqad
