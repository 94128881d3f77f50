#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <string>
#include <vector>

#include "stfuse/errors.hpp"

namespace stfuse::obs {

using Eigen::VectorXd;
using SparseRowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Weights combining the high-resolution bands into one measured band.
struct SpectralMap {
    VectorXd weights;   // length L_H
    int band_index = 0; // measured band this map feeds
    std::string modality;

    /// One-to-one map: a single positive gain at the matching band position.
    static SpectralMap one_hot(int high_bands, int band, double gain,
                               std::string modality_id);
};

/// Band-wise spatial degradation: one high-resolution band -> one coarse band.
struct SpatialDegradation {
    enum class Kind { Identity, UniformBlurDecimate, Custom };

    SparseRowMat matrix;  // N_m x N_H
    Kind kind = Kind::Identity;
    int scale = 1;

    Eigen::Index coarse_pixels() const { return matrix.rows(); }
    Eigen::Index high_pixels() const { return matrix.cols(); }

    static SpatialDegradation identity(Eigen::Index pixels);
    static SpatialDegradation custom(SparseRowMat m);
};

/// Uniform blur over scale x scale blocks followed by decimation. Rows are
/// row-stochastic with exactly scale^2 entries of 1/scale^2.
SpatialDegradation build_uniform_blur_decimate(int rows, int cols, int scale);

/// Row-selection keeping trusted coarse pixels (may be empty).
struct QualitySelection {
    std::vector<int> retained;       // strictly increasing, in [0, N_m)
    std::vector<int> source_codes;   // per-pixel quality codes
    std::vector<int> accepted_codes; // sorted

    std::size_t retained_count() const { return retained.size(); }
    bool empty() const { return retained.empty(); }

    static QualitySelection all(int pixels);
    static QualitySelection from_indices(std::vector<int> indices, int pixels);
};

QualitySelection selection_from_quality(const std::vector<int>& codes,
                                        const std::vector<int>& accepted);

/// One acquisition from one instrument at one time step.
struct ModalityObservation {
    std::vector<VectorXd> bands;    // per-band measurement vectors, length N_{m,l}
    std::vector<int> quality_codes; // per coarse pixel (shared across bands)
    int time_index = 0;
    std::string modality;

    int band_count() const { return static_cast<int>(bands.size()); }
    Eigen::Index pixels_per_band() const {
        return bands.empty() ? 0 : bands.front().size();
    }
};

/// Stacked measurement operator of one modality at one time step:
/// row block l holds [(c_l^T kron D) H_l]; noise is the masked per-band
/// block diagonal, stored by its diagonal (per-band sigma^2 blocks).
struct ModalityOperator {
    SparseRowMat stacked;  // (Ntilde * L_m) x (L_H * N_H)
    VectorXd noise_diag;   // length Ntilde * L_m, entries > 0
    std::string modality;
    int time_index = 0;

    Eigen::Index rows() const { return stacked.rows(); }
    bool empty() const { return stacked.rows() == 0; }
};

struct AssembledObservation {
    ModalityOperator op;
    VectorXd measurement;  // masked measurement vector, rows match op
};

/// Build the stacked operator and masked measurement for one modality.
/// All bands of one modality share one selection. Noise per band is
/// sigma2[l] * I on the retained rows.
AssembledObservation assemble_operator(const ModalityObservation& observation,
                                       const std::vector<SpatialDegradation>& degradations,
                                       const std::vector<SpectralMap>& spectral,
                                       const VectorXd& band_noise_var,
                                       const QualitySelection& selection);

/// Least-squares gain g minimizing ||low - g * degrade(high)||_2.
double gain_calibrate(const VectorXd& high_band, const VectorXd& low_band,
                      const SpatialDegradation& degradation);

/// Everything needed to assemble one modality at one step. This is the unit
/// the patching module restricts to a patch before assembly.
struct ModalityFrame {
    ModalityObservation observation;
    std::vector<SpatialDegradation> degradations;  // per band
    std::vector<SpectralMap> spectral;             // per band
    VectorXd band_noise_var;                       // per band, sigma^2 > 0
    QualitySelection selection;                    // one per modality-time
};

inline AssembledObservation assemble_frame(const ModalityFrame& frame) {
    return assemble_operator(frame.observation, frame.degradations, frame.spectral,
                             frame.band_noise_var, frame.selection);
}

}  // namespace stfuse::obs
