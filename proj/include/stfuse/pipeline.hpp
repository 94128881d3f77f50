#pragma once

#include <filesystem>
#include <vector>

#include "stfuse/config.hpp"
#include "stfuse/errors.hpp"

namespace stfuse::pipeline {

struct SimulateResult {
    std::filesystem::path truth_manifest;
    std::filesystem::path observations_manifest;
};

/// Write the ground-truth sequence, water masks, per-modality observations,
/// quality rasters and the two manifests under out_dir. Byte-deterministic
/// for a fixed config.
SimulateResult run_simulate(const sim::SceneConfig& config,
                            const std::filesystem::path& out_dir);

struct FuseResult {
    std::filesystem::path filtered_dir;
    std::filesystem::path smoothed_dir;  // empty unless mode = smooth
    std::filesystem::path log_path;
    int steps = 0;  // K: rasters written for k = 0..K
};

/// Full fusion run: load inputs, estimate per-step Q, filter (and smooth)
/// per patch, write mean/variance rasters and the run log.
FuseResult run_fuse(const cfg::RunConfig& config);

struct EvalRow {
    int step = 0;
    double nrmse = 0.0;
    double miscls = 0.0;
    double water_pct = 0.0;
};

struct EvalResult {
    std::vector<EvalRow> rows;  // one per scored step, ascending
    double avg_nrmse = 0.0;
    double avg_miscls = 0.0;
};

/// Score an estimate directory against the steps listed in a truth manifest
/// and write the metrics CSV. Only steps with ground truth are scored.
EvalResult run_eval(const std::filesystem::path& truth_manifest,
                    const std::filesystem::path& estimate_dir,
                    const std::filesystem::path& out_csv);

}  // namespace stfuse::pipeline
