// Shared helpers for the unit and acceptance suites.
#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "stfuse/observation.hpp"
#include "stfuse/state_model.hpp"

namespace ts {

using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace st = stfuse::state;
namespace ob = stfuse::obs;

inline double rel_err(const VectorXd& a, const VectorXd& ref) {
    return (a - ref).norm() / std::max(ref.norm(), 1e-12);
}

inline double rel_err(const MatrixXd& a, const MatrixXd& ref) {
    return (a - ref).norm() / std::max(ref.norm(), 1e-12);
}

inline double frob_err(const MatrixXd& a, const MatrixXd& ref) {
    return (a - ref).norm();
}

inline st::GaussianState make_state(VectorXd mean, MatrixXd cov, int k,
                                    st::StateKind kind) {
    st::GaussianState s;
    s.mean = std::move(mean);
    s.covariance = std::move(cov);
    s.time_index = k;
    s.kind = kind;
    return s;
}

inline st::GaussianState scalar_state(double mean, double var, int k,
                                      st::StateKind kind) {
    return make_state(VectorXd::Constant(1, mean), MatrixXd::Constant(1, 1, var), k, kind);
}

/// Dense measurement wrapped as a modality operator.
inline ob::AssembledObservation dense_obs(const MatrixXd& h, const VectorXd& noise_diag,
                                          const VectorXd& y, int k,
                                          std::string name = "m") {
    ob::AssembledObservation o;
    o.op.stacked = h.sparseView();
    o.op.noise_diag = noise_diag;
    o.op.modality = std::move(name);
    o.op.time_index = k;
    o.measurement = y;
    return o;
}

inline ob::AssembledObservation scalar_obs(double h, double r, double y, int k,
                                           std::string name = "m") {
    return dense_obs(MatrixXd::Constant(1, 1, h), VectorXd::Constant(1, r),
                     VectorXd::Constant(1, y), k, std::move(name));
}

inline bool symmetric_within(const MatrixXd& m, double tol) {
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

inline double min_eigenvalue(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// A random small filtering problem: a high-resolution identity modality and
/// (on even grids) a coarse blur-decimate modality, random masks including
/// fully-masked acquisitions, steps with no observations at all.
struct RandomInstance {
    int rows = 0, cols = 0, bands = 0;
    st::GaussianState initial;
    std::vector<st::DynamicalModel> models;
    std::vector<std::vector<ob::AssembledObservation>> observations;
};

inline RandomInstance random_instance(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> dim_pick(0, 3);
    std::uniform_int_distribution<int> k_pick(1, 5);
    std::uniform_int_distribution<int> band_pick(1, 2);

    static constexpr int kDims[4][2] = {{2, 2}, {3, 3}, {4, 2}, {4, 4}};
    const int pick = dim_pick(rng);
    RandomInstance inst;
    inst.rows = kDims[pick][0];
    inst.cols = kDims[pick][1];
    inst.bands = band_pick(rng);
    const int pixels = inst.rows * inst.cols;
    const int n = pixels * inst.bands;
    const int steps = k_pick(rng);

    // SPD initial covariance with off-diagonal structure.
    MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = unif(rng) - 0.5;
    MatrixXd p0 = a * a.transpose() / n + 0.3 * MatrixXd::Identity(n, n);
    VectorXd mu0(n);
    for (int i = 0; i < n; ++i) mu0[i] = unif(rng);
    inst.initial = make_state(mu0, p0, 0, st::StateKind::Posterior);

    const bool coarse_possible = (inst.rows % 2 == 0) && (inst.cols % 2 == 0);
    for (int k = 1; k <= steps; ++k) {
        VectorXd q(n);
        for (int i = 0; i < n; ++i) q[i] = 1e-3 + 0.5 * unif(rng);
        st::DynamicalModel model;
        if (unif(rng) < 0.3) {
            VectorXd f(n);
            for (int i = 0; i < n; ++i) f[i] = 0.3 + 0.7 * unif(rng);
            model.transition = st::Transition::dense(MatrixXd(f.asDiagonal()));
        }
        model.process_noise = st::ProcessNoise::diagonal(q);
        inst.models.push_back(std::move(model));

        std::vector<ob::AssembledObservation> step_obs;
        auto add_modality = [&](int scale, const std::string& name, double sigma2) {
            const auto deg = scale == 1
                                 ? ob::SpatialDegradation::identity(pixels)
                                 : ob::build_uniform_blur_decimate(inst.rows, inst.cols, scale);
            const int coarse = static_cast<int>(deg.coarse_pixels());

            std::vector<int> codes(static_cast<std::size_t>(coarse), 0);
            const double mask_rate = unif(rng) < 0.15 ? 1.0 : 0.3 * unif(rng);
            for (auto& c : codes) c = unif(rng) < mask_rate ? 1 : 0;
            const auto sel = ob::selection_from_quality(codes, {0});

            ob::ModalityObservation mo;
            mo.modality = name;
            mo.time_index = k;
            mo.quality_codes = codes;
            std::vector<ob::SpatialDegradation> degs;
            std::vector<ob::SpectralMap> maps;
            VectorXd noise = VectorXd::Constant(inst.bands, sigma2);
            for (int b = 0; b < inst.bands; ++b) {
                VectorXd y(coarse);
                for (int i = 0; i < coarse; ++i) y[i] = unif(rng);
                mo.bands.push_back(std::move(y));
                degs.push_back(deg);
                if (unif(rng) < 0.5) {
                    maps.push_back(ob::SpectralMap::one_hot(inst.bands, b,
                                                            0.5 + 1.5 * unif(rng), name));
                } else {
                    ob::SpectralMap m;
                    m.weights = VectorXd::Zero(inst.bands);
                    for (int bb = 0; bb < inst.bands; ++bb)
                        m.weights[bb] = 0.2 + 0.8 * unif(rng);
                    m.band_index = b;
                    m.modality = name;
                    maps.push_back(std::move(m));
                }
            }
            step_obs.push_back(ob::assemble_operator(mo, degs, maps, noise, sel));
        };

        if (unif(rng) < 0.6) add_modality(1, "hi", 1e-4 + 1e-2 * unif(rng));
        if (coarse_possible && unif(rng) < 0.6)
            add_modality(2, "lo", 1e-3 + 1e-2 * unif(rng));
        inst.observations.push_back(std::move(step_obs));
    }
    return inst;
}

/// Stack several assembled observations into one (block rows, block noise).
inline ob::AssembledObservation stack_observations(
    const std::vector<ob::AssembledObservation>& parts) {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        rows += p.op.rows();
        cols = std::max(cols, p.op.stacked.cols());
    }
    ob::AssembledObservation out;
    out.op.modality = "stacked";
    out.op.time_index = parts.empty() ? 0 : parts.front().op.time_index;
    out.op.stacked.resize(rows, cols);
    out.op.noise_diag.resize(rows);
    out.measurement.resize(rows);
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        for (Eigen::Index r = 0; r < p.op.stacked.rows(); ++r)
            for (ob::SparseRowMat::InnerIterator it(p.op.stacked, r); it; ++it)
                trips.emplace_back(at + r, it.col(), it.value());
        out.op.noise_diag.segment(at, p.op.rows()) = p.op.noise_diag;
        out.measurement.segment(at, p.op.rows()) = p.measurement;
        at += p.op.rows();
    }
    out.op.stacked.setFromTriplets(trips.begin(), trips.end());
    return out;
}

}  // namespace ts
