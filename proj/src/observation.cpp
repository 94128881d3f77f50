#include "stfuse/observation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stfuse::obs {

namespace {

bool is_sorted_strict(const std::vector<int>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] <= v[i - 1]) return false;
    return true;
}

}  // namespace

SpectralMap SpectralMap::one_hot(int high_bands, int band, double gain,
                                 std::string modality_id) {
    if (band < 0 || band >= high_bands)
        throw ConfigError("spectral map band index out of range");
    if (!(gain > 0.0) || !std::isfinite(gain))
        throw ConfigError("spectral map gain must be a positive finite value");
    SpectralMap m;
    m.weights = VectorXd::Zero(high_bands);
    m.weights[band] = gain;
    m.band_index = band;
    m.modality = std::move(modality_id);
    return m;
}

SpatialDegradation SpatialDegradation::identity(Eigen::Index pixels) {
    SpatialDegradation d;
    d.kind = Kind::Identity;
    d.scale = 1;
    d.matrix.resize(pixels, pixels);
    d.matrix.setIdentity();
    return d;
}

SpatialDegradation SpatialDegradation::custom(SparseRowMat m) {
    for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
        if (SparseRowMat::InnerIterator(m, r))
            continue;
        std::ostringstream msg;
        msg << "spatial degradation has an all-zero row " << r;
        throw ConfigError(msg.str());
    }
    SpatialDegradation d;
    d.kind = Kind::Custom;
    d.matrix = std::move(m);
    return d;
}

SpatialDegradation build_uniform_blur_decimate(int rows, int cols, int scale) {
    if (scale <= 0) throw ConfigError("blur-decimate scale must be positive");
    if (rows % scale != 0 || cols % scale != 0) {
        std::ostringstream msg;
        msg << "image dims " << rows << "x" << cols
            << " not divisible by blur-decimate scale " << scale;
        throw ConfigError(msg.str());
    }
    const int crows = rows / scale;
    const int ccols = cols / scale;
    const double w = 1.0 / (static_cast<double>(scale) * scale);

    SpatialDegradation d;
    d.kind = SpatialDegradation::Kind::UniformBlurDecimate;
    d.scale = scale;
    d.matrix.resize(static_cast<Eigen::Index>(crows) * ccols,
                    static_cast<Eigen::Index>(rows) * cols);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(crows) * ccols * scale * scale);
    for (int cr = 0; cr < crows; ++cr) {
        for (int cc = 0; cc < ccols; ++cc) {
            const Eigen::Index row = static_cast<Eigen::Index>(cr) * ccols + cc;
            for (int i = 0; i < scale; ++i) {
                for (int j = 0; j < scale; ++j) {
                    const Eigen::Index col =
                        static_cast<Eigen::Index>(cr * scale + i) * cols + cc * scale + j;
                    trips.emplace_back(row, col, w);
                }
            }
        }
    }
    d.matrix.setFromTriplets(trips.begin(), trips.end());
    return d;
}

QualitySelection QualitySelection::all(int pixels) {
    QualitySelection s;
    s.retained.resize(static_cast<std::size_t>(pixels));
    for (int i = 0; i < pixels; ++i) s.retained[static_cast<std::size_t>(i)] = i;
    return s;
}

QualitySelection QualitySelection::from_indices(std::vector<int> indices, int pixels) {
    QualitySelection s;
    s.retained = std::move(indices);
    if (!is_sorted_strict(s.retained))
        throw ConfigError("quality selection indices must be strictly increasing");
    if (!s.retained.empty() &&
        (s.retained.front() < 0 || s.retained.back() >= pixels))
        throw ConfigError("quality selection index out of pixel range");
    return s;
}

QualitySelection selection_from_quality(const std::vector<int>& codes,
                                        const std::vector<int>& accepted) {
    QualitySelection s;
    s.source_codes = codes;
    s.accepted_codes = accepted;
    std::sort(s.accepted_codes.begin(), s.accepted_codes.end());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (std::binary_search(s.accepted_codes.begin(), s.accepted_codes.end(),
                               codes[i]))
            s.retained.push_back(static_cast<int>(i));
    }
    return s;
}

AssembledObservation assemble_operator(const ModalityObservation& observation,
                                       const std::vector<SpatialDegradation>& degradations,
                                       const std::vector<SpectralMap>& spectral,
                                       const VectorXd& band_noise_var,
                                       const QualitySelection& selection) {
    const int bands = observation.band_count();
    if (static_cast<int>(degradations.size()) != bands ||
        static_cast<int>(spectral.size()) != bands ||
        band_noise_var.size() != bands) {
        std::ostringstream msg;
        msg << "modality " << observation.modality << " step "
            << observation.time_index << ": per-band input counts disagree ("
            << bands << " bands, " << degradations.size() << " degradations, "
            << spectral.size() << " spectral maps, " << band_noise_var.size()
            << " noise variances)";
        throw ConfigError(msg.str());
    }
    if (bands == 0)
        throw ConfigError("modality observation carries no bands");

    const Eigen::Index high_pixels = degradations.front().high_pixels();
    const Eigen::Index high_bands = spectral.front().weights.size();
    const Eigen::Index state_dim = high_bands * high_pixels;
    const auto retained = static_cast<Eigen::Index>(selection.retained_count());

    AssembledObservation out;
    out.op.modality = observation.modality;
    out.op.time_index = observation.time_index;
    out.op.stacked.resize(retained * bands, state_dim);
    out.op.noise_diag.resize(retained * bands);
    out.measurement.resize(retained * bands);

    std::vector<Eigen::Triplet<double>> trips;
    for (int l = 0; l < bands; ++l) {
        const auto& deg = degradations[static_cast<std::size_t>(l)];
        const auto& c = spectral[static_cast<std::size_t>(l)].weights;
        const auto& y = observation.bands[static_cast<std::size_t>(l)];
        if (deg.high_pixels() != high_pixels || c.size() != high_bands)
            throw ConfigError("modality " + observation.modality +
                              ": band dimensions disagree across bands");
        if (y.size() != deg.coarse_pixels())
            throw ConfigError("modality " + observation.modality +
                              ": measurement length does not match degradation rows");
        if (!(band_noise_var[l] > 0.0))
            throw ConfigError("modality " + observation.modality +
                              ": noise variance must be positive");
        if (!selection.retained.empty() &&
            selection.retained.back() >= deg.coarse_pixels())
            throw ConfigError("modality " + observation.modality +
                              ": selection index exceeds coarse pixel count");

        // Row block l of the stacked operator: for retained coarse pixel r,
        // row = [c_0 * H_l(r,:), c_1 * H_l(r,:), ...] under band-major layout.
        for (Eigen::Index ri = 0; ri < retained; ++ri) {
            const int src_row = selection.retained[static_cast<std::size_t>(ri)];
            const Eigen::Index dst_row = static_cast<Eigen::Index>(l) * retained + ri;
            for (SparseRowMat::InnerIterator it(deg.matrix, src_row); it; ++it) {
                for (Eigen::Index b = 0; b < high_bands; ++b) {
                    const double w = c[b] * it.value();
                    if (w != 0.0)
                        trips.emplace_back(dst_row, b * high_pixels + it.col(), w);
                }
            }
            const double v = y[src_row];
            if (!std::isfinite(v)) {
                std::ostringstream msg;
                msg << "modality " << observation.modality << " step "
                    << observation.time_index << ": non-finite reflectance on retained pixel "
                    << src_row << " band " << l;
                throw ConfigError(msg.str());
            }
            out.measurement[dst_row] = v;
            out.op.noise_diag[dst_row] = band_noise_var[l];
        }
    }
    out.op.stacked.setFromTriplets(trips.begin(), trips.end());
    return out;
}

double gain_calibrate(const VectorXd& high_band, const VectorXd& low_band,
                      const SpatialDegradation& degradation) {
    if (high_band.size() != degradation.high_pixels() ||
        low_band.size() != degradation.coarse_pixels())
        throw ConfigError("gain calibration inputs do not match degradation shape");
    const VectorXd degraded = degradation.matrix * high_band;
    const double denom = degraded.squaredNorm();
    if (denom == 0.0)
        throw MetricError("gain calibration: degraded high-resolution band is identically zero");
    const double g = degraded.dot(low_band) / denom;
    if (!(g > 0.0) || !std::isfinite(g)) {
        std::ostringstream msg;
        msg << "gain calibration produced non-positive gain " << g;
        throw MetricError(msg.str());
    }
    return g;
}

}  // namespace stfuse::obs
