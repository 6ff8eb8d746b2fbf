#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nqad/autodecoder.hpp"
#include "nqad/pointcloud.hpp"

namespace nqad {

enum class StudyObjective { aug_chamfer_direct, chamfer_proxy, mse_random_perfect };

StudyObjective study_objective_from_name(const std::string& name);
const char* study_objective_name(StudyObjective o);

/// Sampling-pathology study: fit a trainable offset tensor added to a
/// unit-spacing lattice cube toward (a subsample of) the target, and
/// track the normalized log augmented Chamfer distance while optimizing
/// the chosen objective with Adam.
struct ChamferStudyConfig {
    PointCloud target;
    std::vector<double> fractions = {1.0, 0.1, 0.01};
    StudyObjective objective = StudyObjective::aug_chamfer_direct;
    uint32_t steps = 2000;
    double lr = 0.02;
    uint32_t k = 5;  // neighbors for the sampling normalizer
    uint64_t seed = 0;
};

struct StudyCurve {
    StudyObjective objective = StudyObjective::aug_chamfer_direct;
    double fraction = 1.0;
    std::vector<double> values;      // steps+1 entries, index 0 = before any step
    double final_aligned_mse = 0.0;  // meaningful for mse_random_perfect
};

/// One curve per configured fraction. The lattice source is the first m
/// row-major integer lattice points of the smallest enclosing cube,
/// translated so its centroid matches the subsampled target's centroid;
/// offsets start at zero.
std::vector<StudyCurve> chamfer_study(const ChamferStudyConfig& cfg);

struct EmkdEvaluation {
    std::vector<double> per_instance;
    double mean = 0.0;
};

/// Reconstructs every instance at full resolution and measures EM-kD
/// against its dataset cloud.
EmkdEvaluation evaluate_emkd(const Dataset& dataset, const FoldingNet& net, int depth,
                             double epsilon, uint32_t max_iterations);

}  // namespace nqad
