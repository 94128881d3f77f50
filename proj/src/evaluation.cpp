#include "stfuse/evaluation.hpp"

#include <cmath>
#include <limits>

namespace stfuse::eval {

double nrmse(const VectorXd& truth, const VectorXd& estimate) {
    if (truth.size() != estimate.size())
        throw MetricError("nrmse: input lengths differ");
    const double ref = truth.squaredNorm();
    if (ref == 0.0) throw MetricError("nrmse undefined for a zero-norm reference");
    return std::sqrt((truth - estimate).squaredNorm() / ref);
}

ClassifierModel fit_two_means(const std::vector<VectorXd>& pixels, int nir_band) {
    if (pixels.size() < 2)
        throw MetricError("two-means needs at least two pixels");
    const Eigen::Index bands = pixels.front().size();
    if (nir_band < 0 || nir_band >= bands)
        throw MetricError("two-means: NIR band index out of range");

    // Farthest-pair initialization: deterministic, no seed sensitivity.
    std::size_t ia = 0, ib = 1;
    double best = -1.0;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        for (std::size_t j = i + 1; j < pixels.size(); ++j) {
            const double d = (pixels[i] - pixels[j]).squaredNorm();
            if (d > best) {
                best = d;
                ia = i;
                ib = j;
            }
        }
    }
    if (best == 0.0)
        throw MetricError("two-means: all pixels identical, classes undefined");

    VectorXd c0 = pixels[ia];
    VectorXd c1 = pixels[ib];
    std::vector<std::uint8_t> assign(pixels.size(), 0);

    const int max_iters = 200;
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < pixels.size(); ++i) {
            const double d0 = (pixels[i] - c0).squaredNorm();
            const double d1 = (pixels[i] - c1).squaredNorm();
            const std::uint8_t a = d1 < d0 ? 1 : 0;  // ties stay with cluster 0
            if (a != assign[i]) {
                assign[i] = a;
                changed = true;
            }
        }
        VectorXd s0 = VectorXd::Zero(bands), s1 = VectorXd::Zero(bands);
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < pixels.size(); ++i) {
            if (assign[i] == 0) {
                s0 += pixels[i];
                ++n0;
            } else {
                s1 += pixels[i];
                ++n1;
            }
        }
        if (n0 > 0) c0 = s0 / static_cast<double>(n0);
        if (n1 > 0) c1 = s1 / static_cast<double>(n1);
        if (!changed) break;
    }

    ClassifierModel model;
    model.nir_band = nir_band;
    if (c0[nir_band] < c1[nir_band]) {
        model.water_centroid = c0;
        model.land_centroid = c1;
    } else {
        model.water_centroid = c1;
        model.land_centroid = c0;
    }
    if (model.water_centroid == model.land_centroid)
        throw MetricError("two-means produced identical centroids");
    return model;
}

std::vector<std::uint8_t> classify(const ClassifierModel& model, const VectorXd& image,
                                   int bands) {
    if (bands <= 0 || image.size() % bands != 0)
        throw MetricError("classify: image length is not a multiple of the band count");
    if (model.water_centroid.size() != bands)
        throw MetricError("classify: band count does not match centroids");
    const Eigen::Index pixels = image.size() / bands;

    std::vector<std::uint8_t> mask(static_cast<std::size_t>(pixels), 0);
    VectorXd px(bands);
    for (Eigen::Index i = 0; i < pixels; ++i) {
        for (int b = 0; b < bands; ++b)
            px[b] = image[static_cast<Eigen::Index>(b) * pixels + i];
        const double dw = (px - model.water_centroid).squaredNorm();
        const double dl = (px - model.land_centroid).squaredNorm();
        mask[static_cast<std::size_t>(i)] = dw < dl ? 1 : 0;  // ties to land
    }
    return mask;
}

double misclassification_rate(const std::vector<std::uint8_t>& mask,
                              const std::vector<std::uint8_t>& reference_mask) {
    if (mask.size() != reference_mask.size())
        throw MetricError("misclassification_rate: mask sizes differ");
    if (mask.empty()) return 0.0;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        diff += (mask[i] != reference_mask[i]) ? 1 : 0;
    return 100.0 * static_cast<double>(diff) / static_cast<double>(mask.size());
}

std::vector<double> water_fraction_series(
    const std::vector<std::vector<std::uint8_t>>& masks) {
    std::vector<double> series;
    series.reserve(masks.size());
    for (const auto& m : masks) {
        if (m.empty()) {
            series.push_back(0.0);
            continue;
        }
        std::size_t water = 0;
        for (auto v : m) water += v ? 1 : 0;
        series.push_back(100.0 * static_cast<double>(water) /
                         static_cast<double>(m.size()));
    }
    return series;
}

}  // namespace stfuse::eval
