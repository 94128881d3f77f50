#include "stfuse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "stfuse/evaluation.hpp"
#include "stfuse/patching.hpp"
#include "stfuse/q_estimator.hpp"
#include "stfuse/raster.hpp"
#include "stfuse/simulator.hpp"

namespace stfuse::pipeline {

namespace fs = std::filesystem;
using Eigen::VectorXd;

namespace {

std::string step_name(const char* prefix, int step) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.mrf", prefix, step);
    return buf;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

int gcd_int(int a, int b) { return b == 0 ? a : gcd_int(b, a % b); }
int lcm_int(int a, int b) { return a / gcd_int(a, b) * b; }

struct QSummary {
    double min, median, max;
};

QSummary summarize(const VectorXd& q) {
    std::vector<double> v(q.data(), q.data() + q.size());
    std::sort(v.begin(), v.end());
    return {v.front(), v[v.size() / 2], v.back()};
}

}  // namespace

SimulateResult run_simulate(const sim::SceneConfig& config, const fs::path& out_dir) {
    config.validate();
    ensure_dir(out_dir);
    ensure_dir(out_dir / "truth");
    ensure_dir(out_dir / "obs");

    const sim::Scene scene = sim::generate_scene(config);
    const Eigen::Index pixels = static_cast<Eigen::Index>(config.rows) * config.cols;

    std::vector<io::ManifestEntry> truth_entries;
    for (int k = 0; k <= config.steps; ++k) {
        const auto frame_rel = fs::path("truth") / step_name("frame", k);
        io::write_raster(out_dir / frame_rel,
                         io::Raster::from_vector(config.rows, config.cols, config.bands,
                                                 scene.frames[static_cast<std::size_t>(k)]));
        VectorXd water(pixels);
        for (Eigen::Index i = 0; i < pixels; ++i)
            water[i] = scene.water[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
        io::write_raster(out_dir / "truth" / step_name("water", k),
                         io::Raster::from_vector(config.rows, config.cols, 1, water));
        truth_entries.push_back({k, "truth", frame_rel, {}});
    }

    // Observation stream: drawn in a fixed order (step ascending, cadence
    // order within a step; quality codes before noise) from seed + 1.
    std::mt19937_64 obs_rng(config.seed + 1);
    std::vector<io::ManifestEntry> obs_entries;
    for (int k = 0; k <= config.steps; ++k) {
        for (const auto& modality : config.cadence) {
            if (!modality.observes(k)) continue;
            const int coarse_rows = config.rows / modality.scale;
            const int coarse_cols = config.cols / modality.scale;
            const auto codes = sim::draw_quality_codes(coarse_rows * coarse_cols,
                                                       config.outlier_rate, obs_rng);
            const auto observation =
                sim::observe(scene.frames[static_cast<std::size_t>(k)], config.rows,
                             config.cols, config.bands, modality, k, codes, obs_rng);

            VectorXd stacked(static_cast<Eigen::Index>(coarse_rows) * coarse_cols *
                             config.bands);
            for (int b = 0; b < config.bands; ++b)
                stacked.segment(static_cast<Eigen::Index>(b) * coarse_rows * coarse_cols,
                                static_cast<Eigen::Index>(coarse_rows) * coarse_cols) =
                    observation.bands[static_cast<std::size_t>(b)];
            const auto y_rel = fs::path("obs") / step_name((modality.name + "_y").c_str(), k);
            io::write_raster(out_dir / y_rel,
                             io::Raster::from_vector(coarse_rows, coarse_cols,
                                                     config.bands, stacked));

            VectorXd qv(static_cast<Eigen::Index>(codes.size()));
            for (std::size_t i = 0; i < codes.size(); ++i)
                qv[static_cast<Eigen::Index>(i)] = codes[i];
            const auto q_rel = fs::path("obs") / step_name((modality.name + "_q").c_str(), k);
            io::write_raster(out_dir / q_rel,
                             io::Raster::from_vector(coarse_rows, coarse_cols, 1, qv));

            obs_entries.push_back({k, modality.name, y_rel, q_rel});
        }
    }

    SimulateResult result;
    result.truth_manifest = out_dir / "truth_manifest.csv";
    result.observations_manifest = out_dir / "observations.csv";
    io::write_manifest(result.truth_manifest, truth_entries);
    io::write_manifest(result.observations_manifest, obs_entries);
    return result;
}

namespace {

struct LoadedObservation {
    obs::ModalityObservation observation;
    const cfg::ModalityConfig* modality = nullptr;
};

// Per-band mean fill for masked entries; the initial state needs finite values.
VectorXd fill_masked(const VectorXd& samples, Eigen::Index pixels, int bands,
                     int* filled_count) {
    VectorXd out = samples;
    int filled = 0;
    for (int b = 0; b < bands; ++b) {
        double sum = 0.0;
        Eigen::Index valid = 0;
        for (Eigen::Index i = 0; i < pixels; ++i) {
            const double v = samples[static_cast<Eigen::Index>(b) * pixels + i];
            if (std::isfinite(v)) {
                sum += v;
                ++valid;
            }
        }
        if (valid == 0)
            throw ConfigError("initialization image band " + std::to_string(b) +
                              " has no valid pixels");
        const double mean = sum / static_cast<double>(valid);
        for (Eigen::Index i = 0; i < pixels; ++i) {
            auto& v = out[static_cast<Eigen::Index>(b) * pixels + i];
            if (!std::isfinite(v)) {
                v = mean;
                ++filled;
            }
        }
    }
    if (filled_count) *filled_count = filled;
    return out;
}

}  // namespace

FuseResult run_fuse(const cfg::RunConfig& config) {
    config.validate();
    const auto& high_res = config.high_res_modality();

    // Initialization image defines the latent grid.
    const io::Raster init_raster = io::read_raster(config.init_image);
    const int rows = init_raster.rows;
    const int cols = init_raster.cols;
    const int bands = init_raster.bands;
    if (bands != high_res.bands)
        throw ConfigError("initialization image band count " + std::to_string(bands) +
                          " does not match high_res modality bands " +
                          std::to_string(high_res.bands));
    const Eigen::Index pixels = static_cast<Eigen::Index>(rows) * cols;

    int init_filled = 0;
    const VectorXd init_mean = fill_masked(init_raster.samples, pixels, bands, &init_filled);

    // Load and group observations; step <= 0 rows are initialization-time
    // acquisitions and are not fused.
    const auto manifest = io::read_manifest(config.observations_manifest);
    std::map<int, std::vector<LoadedObservation>> by_step;
    int max_step = 0;
    int skipped_init_rows = 0;
    for (const auto& entry : manifest) {
        const cfg::ModalityConfig* mc = nullptr;
        for (const auto& m : config.modalities)
            if (m.name == entry.modality) mc = &m;
        if (!mc)
            throw ConfigError("manifest modality '" + entry.modality +
                              "' is not configured");
        if (entry.step <= 0) {
            ++skipped_init_rows;
            continue;
        }
        const io::Raster raster = io::read_raster(entry.raster_path);
        if (raster.bands != mc->bands)
            throw ConfigError("observation " + entry.raster_path.string() +
                              " band count does not match modality config");
        if (raster.rows != rows / mc->scale || raster.cols != cols / mc->scale)
            throw ConfigError("observation " + entry.raster_path.string() +
                              " dims do not match latent dims / scale");

        LoadedObservation lo;
        lo.modality = mc;
        lo.observation.modality = mc->name;
        lo.observation.time_index = entry.step;
        for (int b = 0; b < mc->bands; ++b)
            lo.observation.bands.push_back(
                raster.samples.segment(static_cast<Eigen::Index>(b) * raster.pixels(),
                                       raster.pixels()));
        if (!entry.quality_path.empty()) {
            const io::Raster qr = io::read_raster(entry.quality_path);
            if (qr.rows != raster.rows || qr.cols != raster.cols)
                throw ConfigError("quality raster " + entry.quality_path.string() +
                                  " dims do not match observation");
            lo.observation.quality_codes = io::codes_from_raster(qr);
        } else {
            lo.observation.quality_codes.assign(
                static_cast<std::size_t>(raster.pixels()),
                mc->accepted_codes.empty() ? 0 : mc->accepted_codes.front());
        }
        for (const auto& other : by_step[entry.step])
            if (other.modality->name == mc->name)
                throw ConfigError("duplicate manifest row for modality '" + mc->name +
                                  "' at step " + std::to_string(entry.step));
        max_step = std::max(max_step, entry.step);
        by_step[entry.step].push_back(std::move(lo));
    }
    const int K = config.steps > 0 ? config.steps : max_step;
    if (config.steps > 0 && max_step > config.steps)
        throw ConfigError("manifest contains step " + std::to_string(max_step) +
                          " beyond configured steps " + std::to_string(config.steps));

    // Static per-modality sensor models.
    std::map<std::string, std::vector<obs::SpatialDegradation>> degradations;
    std::map<std::string, Eigen::VectorXd> gains;
    for (const auto& m : config.modalities) {
        std::vector<obs::SpatialDegradation> degs;
        for (int b = 0; b < m.bands; ++b)
            degs.push_back(m.scale == 1
                               ? obs::SpatialDegradation::identity(pixels)
                               : obs::build_uniform_blur_decimate(rows, cols, m.scale));
        degradations[m.name] = std::move(degs);
    }

    // Gains: configured, or least-squares calibrated against the
    // initialization pair (the modality's step-0 acquisition), then frozen.
    for (const auto& m : config.modalities) {
        if (m.gains.size() > 0) {
            gains[m.name] = m.gains;
            continue;
        }
        const io::ManifestEntry* pair = nullptr;
        for (const auto& entry : manifest)
            if (entry.step == 0 && entry.modality == m.name) pair = &entry;
        if (!pair)
            throw ConfigError("modality '" + m.name +
                              "' requests auto gains but has no step-0 observation");
        const io::Raster raster = io::read_raster(pair->raster_path);
        std::vector<int> codes;
        if (!pair->quality_path.empty())
            codes = io::codes_from_raster(io::read_raster(pair->quality_path));
        else
            codes.assign(static_cast<std::size_t>(raster.pixels()),
                         m.accepted_codes.empty() ? 0 : m.accepted_codes.front());
        const auto selection = obs::selection_from_quality(codes, m.accepted_codes);
        if (selection.empty())
            throw ConfigError("modality '" + m.name +
                              "' auto gain: step-0 observation is fully masked");

        VectorXd g(m.bands);
        const auto& degs = degradations[m.name];
        for (int b = 0; b < m.bands; ++b) {
            // Compose the selection into the degradation so the fit only sees
            // retained coarse pixels.
            obs::SparseRowMat sliced(static_cast<Eigen::Index>(selection.retained.size()),
                                     degs[static_cast<std::size_t>(b)].matrix.cols());
            std::vector<Eigen::Triplet<double>> trips;
            for (std::size_t ri = 0; ri < selection.retained.size(); ++ri)
                for (obs::SparseRowMat::InnerIterator it(
                         degs[static_cast<std::size_t>(b)].matrix, selection.retained[ri]);
                     it; ++it)
                    trips.emplace_back(static_cast<Eigen::Index>(ri), it.col(), it.value());
            sliced.setFromTriplets(trips.begin(), trips.end());
            VectorXd y(static_cast<Eigen::Index>(selection.retained.size()));
            for (std::size_t ri = 0; ri < selection.retained.size(); ++ri)
                y[static_cast<Eigen::Index>(ri)] =
                    raster.samples[static_cast<Eigen::Index>(b) * raster.pixels() +
                                   selection.retained[ri]];
            g[b] = obs::gain_calibrate(
                init_mean.segment(static_cast<Eigen::Index>(b) * pixels, pixels), y,
                obs::SpatialDegradation::custom(std::move(sliced)));
        }
        gains[m.name] = g;
    }

    // Per-step frames for the patched pipeline.
    std::vector<std::vector<obs::ModalityFrame>> frames(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) {
        auto it = by_step.find(k);
        if (it == by_step.end()) continue;
        for (const auto& lo : it->second) {
            const auto& m = *lo.modality;
            obs::ModalityFrame frame;
            frame.observation = lo.observation;
            frame.degradations = degradations[m.name];
            for (int b = 0; b < m.bands; ++b)
                frame.spectral.push_back(
                    obs::SpectralMap::one_hot(bands, b, gains[m.name][b], m.name));
            frame.band_noise_var = m.noise_var;
            frame.selection = obs::selection_from_quality(lo.observation.quality_codes,
                                                          m.accepted_codes);
            frames[static_cast<std::size_t>(k - 1)].push_back(std::move(frame));
        }
    }

    // Per-step process noise. In data-driven mode the query is the most
    // recent high-resolution acquisition (masked pixels keep their previous
    // query values), so Q_k only changes when a new high-res image arrives.
    std::vector<state::DynamicalModel> models;
    models.reserve(static_cast<std::size_t>(K));
    std::vector<QSummary> q_log;
    if (config.q_mode == cfg::QMode::Constant) {
        const VectorXd q = VectorXd::Constant(pixels * bands, config.xi);
        for (int k = 1; k <= K; ++k) models.push_back(state::DynamicalModel::random_walk(q));
        if (K > 0) q_log.assign(static_cast<std::size_t>(K), summarize(q));
    } else {
        qest::HistoricalArchive archive;
        for (const auto& entry : io::read_manifest(config.archive_manifest)) {
            const io::Raster raster = io::read_raster(entry.raster_path);
            if (raster.samples.size() != pixels * bands)
                throw ConfigError("archive raster " + entry.raster_path.string() +
                                  " dims do not match the latent image");
            if (!raster.samples.allFinite())
                throw ConfigError("archive raster " + entry.raster_path.string() +
                                  " contains masked or non-finite pixels");
            archive.add(entry.step, raster.samples);
        }
        if (archive.empty())
            throw EstimationError("data-driven Q requested but the archive is empty");

        qest::QEstimatorConfig qc;
        qc.window = config.q_window;
        qc.variance_floor = config.q_floor;

        VectorXd query = init_mean;
        VectorXd cached;
        bool dirty = true;
        const VectorXd& hr_gains = gains[high_res.name];
        for (int k = 1; k <= K; ++k) {
            // Transition (k-1) -> k may use high-res data through step k-1.
            if (k >= 2) {
                auto it = by_step.find(k - 1);
                if (it != by_step.end()) {
                    for (const auto& lo : it->second) {
                        if (lo.modality->name != high_res.name) continue;
                        const auto sel = obs::selection_from_quality(
                            lo.observation.quality_codes, high_res.accepted_codes);
                        if (sel.empty()) continue;  // fully masked: query unchanged
                        for (int b = 0; b < bands; ++b)
                            for (int px : sel.retained)
                                query[static_cast<Eigen::Index>(b) * pixels + px] =
                                    lo.observation.bands[static_cast<std::size_t>(b)][px] /
                                    hr_gains[b];
                        dirty = true;
                    }
                }
            }
            if (dirty) {
                cached = qest::estimate_q(query, archive, qc);
                dirty = false;
            }
            models.push_back(state::DynamicalModel::random_walk(cached));
            q_log.push_back(summarize(cached));
        }
    }

    int scale_lcm = 1;
    for (const auto& m : config.modalities) scale_lcm = lcm_int(scale_lcm, m.scale);
    const int patch = config.patch_size > 0 ? config.patch_size : 3 * scale_lcm;
    const auto grid = patching::partition(rows, cols, bands, patch, patch, scale_lcm);

    const bool smooth = config.mode == cfg::RunMode::Smooth;
    const auto fused = patching::fuse_patched(
        init_mean, VectorXd::Constant(pixels * bands, config.p0_scale), models, frames,
        grid, smooth ? patching::FuseMode::Smooth : patching::FuseMode::Filter,
        config.jobs);

    // Outputs: one mean and one variance raster per step, plus the run log.
    FuseResult result;
    result.steps = K;
    ensure_dir(config.output_dir);
    result.filtered_dir = config.output_dir / "filtered";
    ensure_dir(result.filtered_dir);
    for (int k = 0; k <= K; ++k) {
        io::write_raster(result.filtered_dir / step_name("mean", k),
                         io::Raster::from_vector(rows, cols, bands,
                                                 fused.filtered_mean[static_cast<std::size_t>(k)]));
        io::write_raster(result.filtered_dir / step_name("var", k),
                         io::Raster::from_vector(rows, cols, bands,
                                                 fused.filtered_var[static_cast<std::size_t>(k)]));
    }
    if (smooth) {
        result.smoothed_dir = config.output_dir / "smoothed";
        ensure_dir(result.smoothed_dir);
        for (int k = 0; k <= K; ++k) {
            io::write_raster(result.smoothed_dir / step_name("mean", k),
                             io::Raster::from_vector(
                                 rows, cols, bands,
                                 fused.smoothed_mean[static_cast<std::size_t>(k)]));
            io::write_raster(result.smoothed_dir / step_name("var", k),
                             io::Raster::from_vector(
                                 rows, cols, bands,
                                 fused.smoothed_var[static_cast<std::size_t>(k)]));
        }
    }

    result.log_path = config.output_dir / "fuse_log.txt";
    std::ofstream log(result.log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write log: " + result.log_path.string());
    log << "mode " << (smooth ? "smooth" : "filter") << " steps " << K << " patch "
        << patch << " latent " << rows << "x" << cols << "x" << bands << "\n";
    if (init_filled > 0)
        log << "init: filled " << init_filled << " masked entries with band means\n";
    if (skipped_init_rows > 0)
        log << "init: " << skipped_init_rows
            << " manifest rows at step <= 0 used for initialization only\n";
    for (const auto& [name, g] : gains) {
        log << "gains " << name << ":";
        for (Eigen::Index b = 0; b < g.size(); ++b) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), " %.6g", g[b]);
            log << buf;
        }
        log << "\n";
    }
    for (int k = 1; k <= K; ++k) {
        log << "step " << k << ":";
        auto it = by_step.find(k);
        if (it == by_step.end() || it->second.empty()) {
            log << " no modalities";
        } else {
            for (const auto& lo : it->second) {
                const auto sel = obs::selection_from_quality(
                    lo.observation.quality_codes, lo.modality->accepted_codes);
                log << " " << lo.modality->name << "(retained=" << sel.retained_count()
                    << "/" << lo.observation.quality_codes.size() << ")";
            }
        }
        const auto& qs = q_log[static_cast<std::size_t>(k - 1)];
        char buf[96];
        std::snprintf(buf, sizeof(buf), " Q[min=%.6g,median=%.6g,max=%.6g]", qs.min,
                      qs.median, qs.max);
        log << buf << "\n";
    }
    return result;
}

EvalResult run_eval(const fs::path& truth_manifest, const fs::path& estimate_dir,
                    const fs::path& out_csv) {
    auto entries = io::read_manifest(truth_manifest);
    if (entries.empty()) throw IoError("truth manifest lists no steps");
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.step < b.step; });

    // Classifier fitted once, on the earliest truth frame; NIR = last band.
    const io::Raster first = io::read_raster(entries.front().raster_path);
    const int bands = first.bands;
    const Eigen::Index pixels = first.pixels();
    std::vector<VectorXd> px(static_cast<std::size_t>(pixels));
    for (Eigen::Index i = 0; i < pixels; ++i) {
        VectorXd v(bands);
        for (int b = 0; b < bands; ++b)
            v[b] = first.samples[static_cast<Eigen::Index>(b) * pixels + i];
        px[static_cast<std::size_t>(i)] = std::move(v);
    }
    const auto model = eval::fit_two_means(px, bands - 1);

    EvalResult result;
    for (const auto& entry : entries) {
        const fs::path est_path = estimate_dir / step_name("mean", entry.step);
        if (!fs::exists(est_path))
            throw IoError("estimate for step " + std::to_string(entry.step) +
                          " missing: " + est_path.string());
        const io::Raster truth = io::read_raster(entry.raster_path);
        const io::Raster est = io::read_raster(est_path);
        if (est.samples.size() != truth.samples.size())
            throw IoError("estimate dims differ from truth at step " +
                          std::to_string(entry.step));

        EvalRow row;
        row.step = entry.step;
        row.nrmse = eval::nrmse(truth.samples, est.samples);
        const auto est_mask = eval::classify(model, est.samples, bands);
        const auto truth_mask = eval::classify(model, truth.samples, bands);
        row.miscls = eval::misclassification_rate(est_mask, truth_mask);
        row.water_pct = eval::water_fraction_series({est_mask}).front();
        result.rows.push_back(row);
    }

    for (const auto& row : result.rows) {
        result.avg_nrmse += row.nrmse;
        result.avg_miscls += row.miscls;
    }
    result.avg_nrmse /= static_cast<double>(result.rows.size());
    result.avg_miscls /= static_cast<double>(result.rows.size());

    std::ofstream out(out_csv, std::ios::trunc);
    if (!out) throw IoError("cannot write metrics CSV: " + out_csv.string());
    out << "step,date_tag,nrmse,miscls,water_pct\n";
    char buf[160];
    for (const auto& row : result.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.4f,%.4f\n", row.step, row.step,
                      row.nrmse, row.miscls, row.water_pct);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "avg,avg,%.6f,%.4f,\n", result.avg_nrmse,
                  result.avg_miscls);
    out << buf;
    if (!out) throw IoError("failed writing metrics CSV: " + out_csv.string());
    return result;
}

}  // namespace stfuse::pipeline
