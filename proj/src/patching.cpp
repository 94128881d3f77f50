#include "stfuse/patching.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace stfuse::patching {

namespace {

// patch id of each high-resolution pixel plus its local (row-major) index.
struct PixelMap {
    std::vector<int> patch_of;
    std::vector<Eigen::Index> local_of;
};

PixelMap build_pixel_map(const PatchGrid& grid) {
    PixelMap map;
    map.patch_of.assign(static_cast<std::size_t>(grid.pixels()), -1);
    map.local_of.assign(static_cast<std::size_t>(grid.pixels()), -1);
    for (std::size_t p = 0; p < grid.patch_count(); ++p) {
        const auto& pt = grid.patches[p];
        Eigen::Index local = 0;
        for (int i = 0; i < pt.rows; ++i) {
            for (int j = 0; j < pt.cols; ++j) {
                const auto g = static_cast<std::size_t>(
                    static_cast<Eigen::Index>(pt.row0 + i) * grid.image_cols +
                    (pt.col0 + j));
                map.patch_of[g] = static_cast<int>(p);
                map.local_of[g] = local++;
            }
        }
    }
    return map;
}

}  // namespace

PatchGrid partition(int image_rows, int image_cols, int bands, int patch_rows,
                    int patch_cols, int scale) {
    if (image_rows <= 0 || image_cols <= 0 || bands <= 0)
        throw ConfigError("partition: image dims and band count must be positive");
    if (patch_rows <= 0 || patch_cols <= 0 || scale <= 0)
        throw ConfigError("partition: patch dims and scale must be positive");
    if (patch_rows % scale != 0 || patch_cols % scale != 0) {
        std::ostringstream msg;
        msg << "patch size " << patch_rows << "x" << patch_cols
            << " not divisible by scale " << scale;
        throw ConfigError(msg.str());
    }
    if (image_rows % patch_rows != 0 || image_cols % patch_cols != 0) {
        std::ostringstream msg;
        msg << "image dims " << image_rows << "x" << image_cols
            << " not divisible by patch size " << patch_rows << "x" << patch_cols;
        throw ConfigError(msg.str());
    }

    PatchGrid grid;
    grid.image_rows = image_rows;
    grid.image_cols = image_cols;
    grid.bands = bands;
    grid.patch_rows = patch_rows;
    grid.patch_cols = patch_cols;
    grid.scale = scale;
    for (int r = 0; r < image_rows; r += patch_rows)
        for (int c = 0; c < image_cols; c += patch_cols)
            grid.patches.push_back({r, c, patch_rows, patch_cols});
    return grid;
}

std::vector<Eigen::Index> patch_pixel_indices(const PatchGrid& grid, std::size_t p) {
    const auto& pt = grid.patches.at(p);
    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(pt.rows) * pt.cols);
    for (int i = 0; i < pt.rows; ++i)
        for (int j = 0; j < pt.cols; ++j)
            idx.push_back(static_cast<Eigen::Index>(pt.row0 + i) * grid.image_cols +
                          (pt.col0 + j));
    return idx;
}

std::vector<VectorXd> scatter(const VectorXd& full, const PatchGrid& grid) {
    const Eigen::Index pixels = grid.pixels();
    if (pixels == 0 || full.size() % pixels != 0)
        throw ConfigError("scatter: vector length is not a multiple of the pixel count");
    const Eigen::Index nbands = full.size() / pixels;

    std::vector<VectorXd> parts(grid.patch_count());
    for (std::size_t p = 0; p < grid.patch_count(); ++p) {
        const auto idx = patch_pixel_indices(grid, p);
        const auto ppix = static_cast<Eigen::Index>(idx.size());
        VectorXd part(ppix * nbands);
        for (Eigen::Index b = 0; b < nbands; ++b)
            for (Eigen::Index i = 0; i < ppix; ++i)
                part[b * ppix + i] = full[b * pixels + idx[static_cast<std::size_t>(i)]];
        parts[p] = std::move(part);
    }
    return parts;
}

VectorXd gather(const std::vector<VectorXd>& parts, const PatchGrid& grid) {
    if (parts.size() != grid.patch_count())
        throw ConfigError("gather: part count does not match patch count");
    const Eigen::Index pixels = grid.pixels();
    Eigen::Index nbands = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto ppix = static_cast<Eigen::Index>(grid.patches[p].rows) *
                          grid.patches[p].cols;
        if (ppix == 0 || parts[p].size() % ppix != 0)
            throw ConfigError("gather: part length is not a multiple of its patch size");
        const Eigen::Index b = parts[p].size() / ppix;
        if (p == 0)
            nbands = b;
        else if (b != nbands)
            throw ConfigError("gather: parts disagree on band count");
    }

    VectorXd full(pixels * nbands);
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto idx = patch_pixel_indices(grid, p);
        const auto ppix = static_cast<Eigen::Index>(idx.size());
        for (Eigen::Index b = 0; b < nbands; ++b)
            for (Eigen::Index i = 0; i < ppix; ++i)
                full[b * pixels + idx[static_cast<std::size_t>(i)]] = parts[p][b * ppix + i];
    }
    return full;
}

obs::ModalityFrame restrict_frame(const obs::ModalityFrame& frame,
                                  const PatchGrid& grid, std::size_t p) {
    const PixelMap map = build_pixel_map(grid);
    const auto& pt = grid.patches.at(p);
    const Eigen::Index local_pixels = static_cast<Eigen::Index>(pt.rows) * pt.cols;

    obs::ModalityFrame out;
    out.spectral = frame.spectral;
    out.band_noise_var = frame.band_noise_var;
    out.observation.time_index = frame.observation.time_index;
    out.observation.modality = frame.observation.modality;

    // Coarse rows whose entire footprint lies in patch p, in ascending global
    // order; shared across bands because all bands of a modality use one
    // selection and co-registered grids.
    std::vector<int> patch_rows;
    for (std::size_t l = 0; l < frame.degradations.size(); ++l) {
        const auto& deg = frame.degradations[l];
        std::vector<int> rows_this_band;
        for (Eigen::Index r = 0; r < deg.matrix.rows(); ++r) {
            int owner = -2;
            for (obs::SparseRowMat::InnerIterator it(deg.matrix, r); it; ++it) {
                const int pid = map.patch_of[static_cast<std::size_t>(it.col())];
                if (owner == -2) owner = pid;
                if (pid != owner) {
                    std::ostringstream msg;
                    msg << "modality " << frame.observation.modality
                        << ": coarse pixel " << r
                        << " straddles patches; operator is not patch-separable";
                    throw ConfigError(msg.str());
                }
            }
            if (owner == static_cast<int>(p)) rows_this_band.push_back(static_cast<int>(r));
        }
        if (l == 0) {
            patch_rows = std::move(rows_this_band);
        } else if (rows_this_band != patch_rows) {
            throw ConfigError("modality " + frame.observation.modality +
                              ": bands disagree on patch coarse-pixel ownership");
        }

        // Slice the degradation to (patch rows) x (patch pixels).
        obs::SparseRowMat local(static_cast<Eigen::Index>(patch_rows.size()), local_pixels);
        std::vector<Eigen::Triplet<double>> trips;
        for (std::size_t ri = 0; ri < patch_rows.size(); ++ri) {
            for (obs::SparseRowMat::InnerIterator it(deg.matrix, patch_rows[ri]); it; ++it)
                trips.emplace_back(static_cast<Eigen::Index>(ri),
                                   map.local_of[static_cast<std::size_t>(it.col())],
                                   it.value());
        }
        local.setFromTriplets(trips.begin(), trips.end());
        obs::SpatialDegradation d;
        d.kind = deg.kind;
        d.scale = deg.scale;
        d.matrix = std::move(local);
        out.degradations.push_back(std::move(d));

        VectorXd y(static_cast<Eigen::Index>(patch_rows.size()));
        for (std::size_t ri = 0; ri < patch_rows.size(); ++ri)
            y[static_cast<Eigen::Index>(ri)] =
                frame.observation.bands[l][patch_rows[ri]];
        out.observation.bands.push_back(std::move(y));
    }

    // Selection and quality codes in the local row numbering.
    std::vector<int> local_retained;
    for (std::size_t ri = 0; ri < patch_rows.size(); ++ri) {
        if (std::binary_search(frame.selection.retained.begin(),
                               frame.selection.retained.end(), patch_rows[ri]))
            local_retained.push_back(static_cast<int>(ri));
        if (patch_rows[ri] < static_cast<int>(frame.observation.quality_codes.size()))
            out.observation.quality_codes.push_back(
                frame.observation.quality_codes[static_cast<std::size_t>(patch_rows[ri])]);
    }
    out.selection = obs::QualitySelection::from_indices(
        std::move(local_retained), static_cast<int>(patch_rows.size()));
    out.selection.accepted_codes = frame.selection.accepted_codes;
    out.selection.source_codes = out.observation.quality_codes;
    return out;
}

FusedSequence fuse_patched(const VectorXd& initial_mean,
                           const VectorXd& initial_var_diag,
                           std::span<const state::DynamicalModel> models,
                           std::span<const std::vector<obs::ModalityFrame>> observations,
                           const PatchGrid& grid, FuseMode mode, int jobs) {
    if (initial_mean.size() != grid.state_dim() ||
        initial_var_diag.size() != grid.state_dim())
        throw ConfigError("fuse_patched: initial state length does not match grid");
    if (models.size() != observations.size())
        throw ConfigError("fuse_patched: one dynamical model per step required");
    for (const auto& m : models) {
        if (!m.transition.is_identity())
            throw ConfigError("fuse_patched requires identity transitions");
        if (!m.process_noise.is_diagonal())
            throw ConfigError("fuse_patched requires diagonal process noise");
    }

    const std::size_t K = models.size();
    const std::size_t npatch = grid.patch_count();
    const bool smooth = (mode == FuseMode::Smooth);

    // Per-patch restrictions of the initial state and the Q diagonals.
    const std::vector<VectorXd> mean_parts = scatter(initial_mean, grid);
    const std::vector<VectorXd> var_parts = scatter(initial_var_diag, grid);
    std::vector<std::vector<VectorXd>> q_parts(K);
    for (std::size_t k = 0; k < K; ++k)
        q_parts[k] = scatter(models[k].process_noise.diag(), grid);

    struct PatchResult {
        std::vector<VectorXd> fm, fv, sm, sv;  // per step k = 0..K
    };
    std::vector<PatchResult> results(npatch);

    auto run_patch = [&](std::size_t p) {
        state::GaussianState init;
        init.mean = mean_parts[p];
        init.covariance = Eigen::MatrixXd(var_parts[p].asDiagonal());
        init.time_index = 0;
        init.kind = state::StateKind::Posterior;

        std::vector<state::DynamicalModel> local_models(K);
        std::vector<std::vector<obs::AssembledObservation>> local_obs(K);
        for (std::size_t k = 0; k < K; ++k) {
            local_models[k] = state::DynamicalModel::random_walk(q_parts[k][p]);
            for (const auto& frame : observations[k])
                local_obs[k].push_back(obs::assemble_frame(restrict_frame(frame, grid, p)));
        }

        const state::FilterTrace trace =
            state::filter_sequence(init, local_models, local_obs);

        PatchResult& res = results[p];
        res.fm.resize(K + 1);
        res.fv.resize(K + 1);
        for (std::size_t k = 0; k <= K; ++k) {
            const auto& post = trace.posterior_at(k);
            res.fm[k] = post.mean;
            res.fv[k] = post.covariance.diagonal();
        }
        if (smooth) {
            const auto smoothed = state::rts_smooth(trace);
            res.sm.resize(K + 1);
            res.sv.resize(K + 1);
            for (std::size_t k = 0; k <= K; ++k) {
                res.sm[k] = smoothed[k].mean;
                res.sv[k] = smoothed[k].covariance.diagonal();
            }
        }
    };

    int workers = jobs;
    if (workers <= 0)
        workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min<int>(workers, static_cast<int>(npatch));

    if (workers <= 1) {
        for (std::size_t p = 0; p < npatch; ++p) run_patch(p);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&] {
            for (;;) {
                const std::size_t p = next.fetch_add(1);
                if (p >= npatch) return;
                try {
                    run_patch(p);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    FusedSequence out;
    auto gather_steps = [&](auto member) {
        std::vector<VectorXd> seq(K + 1);
        std::vector<VectorXd> parts(npatch);
        for (std::size_t k = 0; k <= K; ++k) {
            for (std::size_t p = 0; p < npatch; ++p)
                parts[p] = (results[p].*member)[k];
            seq[k] = gather(parts, grid);
        }
        return seq;
    };
    out.filtered_mean = gather_steps(&PatchResult::fm);
    out.filtered_var = gather_steps(&PatchResult::fv);
    if (smooth) {
        out.smoothed_mean = gather_steps(&PatchResult::sm);
        out.smoothed_var = gather_steps(&PatchResult::sv);
    }
    return out;
}

}  // namespace stfuse::patching
