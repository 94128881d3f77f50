#pragma once

#include <span>
#include <vector>

#include "stfuse/observation.hpp"
#include "stfuse/state_model.hpp"

namespace stfuse::patching {

using Eigen::VectorXd;

/// Partition of the high-resolution lattice into rectangular patches aligned
/// with the coarse-pixel footprint: every coarse pixel lies inside exactly
/// one patch.
struct PatchGrid {
    struct Patch {
        int row0, col0, rows, cols;
    };

    int image_rows = 0, image_cols = 0;
    int bands = 1;       // L_H
    int patch_rows = 0, patch_cols = 0;
    int scale = 1;       // alignment guarantee: patch dims divisible by this
    std::vector<Patch> patches;  // row-major over the patch lattice

    Eigen::Index pixels() const {
        return static_cast<Eigen::Index>(image_rows) * image_cols;
    }
    Eigen::Index state_dim() const { return pixels() * bands; }
    std::size_t patch_count() const { return patches.size(); }
};

PatchGrid partition(int image_rows, int image_cols, int bands, int patch_rows,
                    int patch_cols, int scale);

/// High-resolution pixel indices of one patch, row-major within the patch.
std::vector<Eigen::Index> patch_pixel_indices(const PatchGrid& grid, std::size_t p);

/// Band-major per-patch sub-vectors. Accepts any vector whose length is a
/// multiple of the pixel count (state vectors, single-band images, Q diagonals).
std::vector<VectorXd> scatter(const VectorXd& full, const PatchGrid& grid);

/// Inverse of scatter: gather(scatter(x)) == x bit-exact.
VectorXd gather(const std::vector<VectorXd>& parts, const PatchGrid& grid);

/// Restrict one modality frame to patch p: keeps the coarse pixels whose
/// degradation footprint lies inside the patch, remaps rows/columns to the
/// patch-local numbering. A coarse pixel straddling patches is a
/// configuration error (the operator is not patch-separable).
obs::ModalityFrame restrict_frame(const obs::ModalityFrame& frame,
                                  const PatchGrid& grid, std::size_t p);

enum class FuseMode { Filter, Smooth };

struct FusedSequence {
    std::vector<VectorXd> filtered_mean;  // k = 0..K
    std::vector<VectorXd> filtered_var;   // covariance diagonals
    std::vector<VectorXd> smoothed_mean;  // empty unless FuseMode::Smooth
    std::vector<VectorXd> smoothed_var;
};

/// Run the filter (and smoother) independently per patch and reassemble the
/// full-image means and covariance diagonals per step. Requires identity
/// transitions and diagonal process noise; patches run in a deterministic
/// parallel map of `jobs` workers (jobs <= 0 uses the hardware concurrency).
FusedSequence fuse_patched(const VectorXd& initial_mean,
                           const VectorXd& initial_var_diag,
                           std::span<const state::DynamicalModel> models,
                           std::span<const std::vector<obs::ModalityFrame>> observations,
                           const PatchGrid& grid, FuseMode mode, int jobs = 1);

}  // namespace stfuse::patching
