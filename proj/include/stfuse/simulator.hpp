#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stfuse/observation.hpp"

namespace stfuse::sim {

using Eigen::VectorXd;

/// Per-modality acquisition schedule for the synthetic scene.
struct ModalitySchedule {
    std::string name;
    int scale = 1;            // 1 = identity, > 1 = uniform blur + decimation
    VectorXd noise_sigma;     // per band, standard deviation
    VectorXd gains;           // per band, spectral gain (empty = all 1)
    std::vector<int> steps;   // time indices observed; empty = every step
    bool high_res = false;

    bool observes(int k) const {
        if (steps.empty()) return true;
        for (int s : steps)
            if (s == k) return true;
        return false;
    }
};

/// Two-class reservoir scene: a water disk over land, static per-class
/// texture, and a shoreline whose radius moves linearly over time.
struct SceneConfig {
    int rows = 81, cols = 81;
    int bands = 2;
    int steps = 16;           // frames at k = 0..steps
    std::uint64_t seed = 0;

    VectorXd water_mean;      // per band, in [0,1]
    VectorXd land_mean;       // per band, in [0,1]
    double sigma_scene = 0.02;
    double initial_radius = 30.0;
    double shoreline_rate = -1.0;  // radius change per step; < 0 shrinks

    std::vector<ModalitySchedule> cadence;
    double outlier_rate = 0.0;     // fraction of coarse pixels flagged per acquisition

    void validate() const;
};

struct Scene {
    std::vector<VectorXd> frames;            // k = 0..steps, band-major L_H*N_H
    std::vector<std::vector<std::uint8_t>> water;  // per step, 1 = water pixel

    std::size_t water_count(std::size_t k) const {
        std::size_t n = 0;
        for (auto w : water[k]) n += w;
        return n;
    }
};

/// Deterministic per seed. Class means must be separated by at least
/// 4 * sigma_scene in every band so the two-class structure stays separable.
Scene generate_scene(const SceneConfig& config);

/// Degrade, scale, and perturb one scene frame into a modality acquisition.
/// Pixels whose quality code is nonzero are overwritten with the NaN sentinel.
/// Noise is drawn from the supplied engine.
obs::ModalityObservation observe(const VectorXd& frame, int rows, int cols, int bands,
                                 const ModalitySchedule& modality, int time_index,
                                 const std::vector<int>& quality_codes,
                                 std::mt19937_64& rng);

/// Quality codes for one acquisition: 0 = good, 1 = flagged, drawn i.i.d.
/// with probability `outlier_rate` from the supplied engine.
std::vector<int> draw_quality_codes(int coarse_pixels, double outlier_rate,
                                    std::mt19937_64& rng);

}  // namespace stfuse::sim
