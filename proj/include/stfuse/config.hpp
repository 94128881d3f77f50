#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stfuse/errors.hpp"
#include "stfuse/simulator.hpp"

namespace stfuse::cfg {

/// One instrument/product class as configured for a fusion run.
struct ModalityConfig {
    std::string name;
    int bands = 0;
    int scale = 1;                    // 1 = identity degradation
    Eigen::VectorXd noise_var;        // per band, sigma^2 > 0
    Eigen::VectorXd gains;            // per band; empty => calibrate from init pair
    std::vector<int> accepted_codes;  // quality codes treated as trustworthy
    bool high_res = false;
};

enum class QMode { Constant, DataDriven };
enum class RunMode { Filter, Smooth };

struct RunConfig {
    RunMode mode = RunMode::Filter;
    int patch_size = 0;  // 0 = default (3 * coarsest modality scale)
    int jobs = 0;        // 0 = hardware concurrency
    int steps = 0;       // 0 = derive K from the observations manifest

    std::filesystem::path init_image;
    double p0_scale = 1e-10;

    QMode q_mode = QMode::Constant;
    double xi = 1e-2;     // constant mode
    int q_window = 1;     // data-driven d
    double q_floor = 1e-5;  // data-driven epsilon^2

    std::filesystem::path observations_manifest;
    std::filesystem::path archive_manifest;  // required in data-driven mode
    std::filesystem::path output_dir;

    std::vector<ModalityConfig> modalities;

    const ModalityConfig& high_res_modality() const;
    void validate() const;
};

/// Parse a run config file. Relative paths resolve against the config file's
/// directory; STFUSE_OBSERVATIONS / STFUSE_ARCHIVE / STFUSE_OUTPUT /
/// STFUSE_INIT_IMAGE environment variables override the respective paths.
RunConfig load_run_config(const std::filesystem::path& path);

/// Parse a scene config file for the simulator.
sim::SceneConfig load_scene_config(const std::filesystem::path& path);

}  // namespace stfuse::cfg
