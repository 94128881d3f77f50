#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "stfuse/errors.hpp"

namespace stfuse::eval {

using Eigen::VectorXd;

/// Two-class nearest-centroid model in band space. The water centroid is the
/// one with the smaller NIR value (water is dark in NIR).
struct ClassifierModel {
    VectorXd water_centroid;
    VectorXd land_centroid;
    int nir_band = 0;
};

/// sqrt(||truth - estimate||^2 / ||truth||^2)
double nrmse(const VectorXd& truth, const VectorXd& estimate);

/// Two-means clustering with deterministic farthest-pair initialization;
/// iterates until assignments stop changing. pixels: one band vector per pixel.
ClassifierModel fit_two_means(const std::vector<VectorXd>& pixels, int nir_band);

/// Nearest-centroid water mask of a band-major image vector; ties label land.
std::vector<std::uint8_t> classify(const ClassifierModel& model, const VectorXd& image,
                                   int bands);

/// 100 * (# disagreeing pixels) / N
double misclassification_rate(const std::vector<std::uint8_t>& mask,
                              const std::vector<std::uint8_t>& reference_mask);

/// Per-step percentage of water pixels.
std::vector<double> water_fraction_series(const std::vector<std::vector<std::uint8_t>>& masks);

}  // namespace stfuse::eval
