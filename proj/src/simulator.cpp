#include "stfuse/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stfuse::sim {

namespace {

constexpr float kMaskSentinel = std::numeric_limits<float>::quiet_NaN();

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

void SceneConfig::validate() const {
    if (rows <= 0 || cols <= 0 || bands <= 0 || steps < 0)
        throw ConfigError("scene: dims, bands must be positive and steps >= 0");
    if (water_mean.size() != bands || land_mean.size() != bands)
        throw ConfigError("scene: class means must have one entry per band");
    for (int b = 0; b < bands; ++b) {
        if (water_mean[b] < 0.0 || water_mean[b] > 1.0 || land_mean[b] < 0.0 ||
            land_mean[b] > 1.0)
            throw ConfigError("scene: class mean reflectances must lie in [0,1]");
        if (std::abs(water_mean[b] - land_mean[b]) < 4.0 * sigma_scene) {
            std::ostringstream msg;
            msg << "scene: band " << b
                << " class means closer than 4*sigma_scene; classes not separable";
            throw ConfigError(msg.str());
        }
    }
    if (sigma_scene < 0.0) throw ConfigError("scene: sigma_scene must be >= 0");
    if (outlier_rate < 0.0 || outlier_rate > 1.0)
        throw ConfigError("scene: outlier_rate must lie in [0,1]");
    for (const auto& m : cadence) {
        if (m.name.empty()) throw ConfigError("scene: modality name must not be empty");
        if (m.scale < 1) throw ConfigError("scene: modality scale must be >= 1");
        if (rows % m.scale != 0 || cols % m.scale != 0)
            throw ConfigError("scene: dims not divisible by modality scale for " + m.name);
        if (m.noise_sigma.size() != bands)
            throw ConfigError("scene: noise_sigma needs one entry per band for " + m.name);
        if (m.gains.size() != 0 && m.gains.size() != bands)
            throw ConfigError("scene: gains need one entry per band for " + m.name);
    }
}

Scene generate_scene(const SceneConfig& config) {
    config.validate();
    const Eigen::Index pixels = static_cast<Eigen::Index>(config.rows) * config.cols;
    const int bands = config.bands;

    // Static per-class textures; the only temporal change is the shoreline.
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd water_tex(pixels, bands);
    Eigen::MatrixXd land_tex(pixels, bands);
    for (int b = 0; b < bands; ++b)
        for (Eigen::Index i = 0; i < pixels; ++i)
            water_tex(i, b) =
                clamp01(config.water_mean[b] + config.sigma_scene * gauss(rng));
    for (int b = 0; b < bands; ++b)
        for (Eigen::Index i = 0; i < pixels; ++i)
            land_tex(i, b) =
                clamp01(config.land_mean[b] + config.sigma_scene * gauss(rng));

    const double cr = (config.rows - 1) / 2.0;
    const double cc = (config.cols - 1) / 2.0;

    Scene scene;
    scene.frames.reserve(static_cast<std::size_t>(config.steps) + 1);
    scene.water.reserve(static_cast<std::size_t>(config.steps) + 1);
    for (int k = 0; k <= config.steps; ++k) {
        const double radius =
            std::max(config.initial_radius + k * config.shoreline_rate, 0.0);
        const double r2 = radius * radius;
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(pixels), 0);
        VectorXd frame(pixels * bands);
        for (int i = 0; i < config.rows; ++i) {
            for (int j = 0; j < config.cols; ++j) {
                const Eigen::Index px = static_cast<Eigen::Index>(i) * config.cols + j;
                const double d2 = (i - cr) * (i - cr) + (j - cc) * (j - cc);
                const bool is_water = d2 <= r2;
                mask[static_cast<std::size_t>(px)] = is_water ? 1 : 0;
                for (int b = 0; b < bands; ++b)
                    frame[static_cast<Eigen::Index>(b) * pixels + px] =
                        is_water ? water_tex(px, b) : land_tex(px, b);
            }
        }
        scene.frames.push_back(std::move(frame));
        scene.water.push_back(std::move(mask));
    }
    return scene;
}

std::vector<int> draw_quality_codes(int coarse_pixels, double outlier_rate,
                                    std::mt19937_64& rng) {
    std::vector<int> codes(static_cast<std::size_t>(coarse_pixels), 0);
    if (outlier_rate <= 0.0) return codes;
    std::bernoulli_distribution flag(std::min(outlier_rate, 1.0));
    for (auto& c : codes) c = flag(rng) ? 1 : 0;
    return codes;
}

obs::ModalityObservation observe(const VectorXd& frame, int rows, int cols, int bands,
                                 const ModalitySchedule& modality, int time_index,
                                 const std::vector<int>& quality_codes,
                                 std::mt19937_64& rng) {
    const Eigen::Index pixels = static_cast<Eigen::Index>(rows) * cols;
    if (frame.size() != pixels * bands)
        throw ConfigError("observe: frame length does not match scene dims");

    const obs::SpatialDegradation deg =
        modality.scale == 1 ? obs::SpatialDegradation::identity(pixels)
                            : obs::build_uniform_blur_decimate(rows, cols, modality.scale);
    const Eigen::Index coarse = deg.coarse_pixels();
    if (static_cast<Eigen::Index>(quality_codes.size()) != coarse)
        throw ConfigError("observe: quality code count does not match coarse pixels");

    obs::ModalityObservation out;
    out.modality = modality.name;
    out.time_index = time_index;
    out.quality_codes = quality_codes;

    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int b = 0; b < bands; ++b) {
        const double gain = modality.gains.size() > 0 ? modality.gains[b] : 1.0;
        VectorXd y = gain * (deg.matrix * frame.segment(static_cast<Eigen::Index>(b) * pixels,
                                                        pixels));
        const double sigma = modality.noise_sigma[b];
        if (sigma > 0.0)
            for (Eigen::Index i = 0; i < coarse; ++i) y[i] += sigma * gauss(rng);
        for (Eigen::Index i = 0; i < coarse; ++i)
            if (quality_codes[static_cast<std::size_t>(i)] != 0)
                y[i] = kMaskSentinel;
        out.bands.push_back(std::move(y));
    }
    return out;
}

}  // namespace stfuse::sim
