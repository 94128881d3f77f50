#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "stfuse/errors.hpp"

namespace stfuse::io {

/// In-memory raster: band-major, row-major within a band, NaN = masked pixel.
/// On disk this is the MRF1 format: a fixed seven-line text header
/// (magic, rows, cols, bands, dtype float32, layout, endianness) followed by
/// exactly rows*cols*bands little-endian float32 samples.
struct Raster {
    int rows = 0;
    int cols = 0;
    int bands = 0;
    Eigen::VectorXd samples;

    Eigen::Index pixels() const { return static_cast<Eigen::Index>(rows) * cols; }

    static Raster from_vector(int rows, int cols, int bands, Eigen::VectorXd data);
};

void write_raster(const std::filesystem::path& path, const Raster& raster);
Raster read_raster(const std::filesystem::path& path);

/// One row of a sequence manifest: `step,modality,raster_path,quality_path`.
/// Paths are stored relative to the manifest file and resolved on read.
struct ManifestEntry {
    int step = 0;
    std::string modality;
    std::filesystem::path raster_path;
    std::filesystem::path quality_path;  // empty when the row has no quality raster
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries);

/// Quality raster (integer codes stored as float32) -> per-pixel codes.
std::vector<int> codes_from_raster(const Raster& raster);

}  // namespace stfuse::io
