#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nqad {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    bool operator==(const Vec3& o) const = default;
};

inline double dist2(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

inline double dist(const Vec3& a, const Vec3& b) { return std::sqrt(dist2(a, b)); }

/// Ordered list of 3D points. The row order is significant: matching
/// between two clouds is encoded by row alignment, so permuting rows
/// changes the matching, never the geometry.
struct PointCloud {
    std::vector<Vec3> pts;

    size_t size() const { return pts.size(); }
    bool empty() const { return pts.empty(); }
    Vec3& operator[](size_t i) { return pts[i]; }
    const Vec3& operator[](size_t i) const { return pts[i]; }
};

/// N clouds sharing one point count M.
struct Dataset {
    std::vector<PointCloud> clouds;
    std::vector<std::string> names;

    size_t size() const { return clouds.size(); }
    size_t points_per_cloud() const { return clouds.empty() ? 0 : clouds.front().size(); }
};

enum class CloudFormat { xyz_ascii, ply };

/// Parses ".ply" to ply, everything else to xyz_ascii.
CloudFormat format_for_path(const std::string& path);

PointCloud load_cloud(const std::string& path, CloudFormat format);
PointCloud load_cloud(const std::string& path);
void save_cloud(const PointCloud& cloud, const std::string& path, CloudFormat format);

/// Loads every *.xyz / *.ply file directly under dir, sorted by filename.
/// Throws DataError naming the offending file if the point counts differ.
Dataset load_dataset_dir(const std::string& dir);

struct SampleSpec {
    uint32_t sample_size = 0;
    bool per_patch_equal = false;
    uint64_t seed = 0;
};

/// Indices drawn uniformly without replacement from [0, m). With
/// per_patch_equal set, patch_offsets (K+1 boundaries of contiguous
/// patches) must be given and exactly sample_size/K indices are drawn
/// from each patch range; the result lists patches in order.
std::vector<uint32_t> uniform_sample_indices(uint32_t m, const SampleSpec& spec,
                                             std::span<const uint32_t> patch_offsets = {});

enum class SyntheticKind { grid_cube, two_scale_teeth, gaussian_blobs };

SyntheticKind synthetic_kind_from_name(const std::string& name);

/// Deterministic synthetic clouds.
///  - grid_cube: the first m lattice points (row-major, z fastest) of the
///    smallest cube of integer points holding m; nearest-neighbor spacing
///    is exactly 1 for every point (m >= 2).
///  - two_scale_teeth: a smooth low-frequency sheet (first ceil(m/2)
///    points) plus dense high-frequency protrusion clusters (remaining
///    points). The protrusion subset is sampled much more densely than
///    the base subset.
///  - gaussian_blobs: a handful of isotropic Gaussian clusters.
PointCloud gen_synthetic(SyntheticKind kind, uint32_t m, uint64_t seed);

/// Centers the cloud at its centroid and scales so max radius is 1.
void normalize_unit_sphere(PointCloud& cloud);

}  // namespace nqad
