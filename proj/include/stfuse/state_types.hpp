#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "stfuse/errors.hpp"

namespace stfuse::state {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class StateKind { Prior, Predicted, Posterior, Smoothed };

/// Gaussian belief over the vectorized latent image (band-major layout:
/// band b occupies entries [b*N_H, (b+1)*N_H)).
struct GaussianState {
    VectorXd mean;
    MatrixXd covariance;
    int time_index = 0;
    StateKind kind = StateKind::Prior;

    Eigen::Index dim() const { return mean.size(); }
};

/// State transition matrix; the identity (the common case) carries no storage.
class Transition {
public:
    Transition() = default;

    static Transition identity() { return Transition{}; }

    /// Dense transition. Rejects matrices with spectral norm > 1 + 1e-12.
    static Transition dense(MatrixXd f);

    bool is_identity() const { return dense_.size() == 0; }
    const MatrixXd& matrix() const { return dense_; }

    VectorXd apply(const VectorXd& x) const {
        return is_identity() ? x : dense_ * x;
    }

    /// F * P * F^T
    MatrixXd propagate(const MatrixXd& p) const {
        return is_identity() ? p : MatrixXd(dense_ * p * dense_.transpose());
    }

    /// F * M (used by the smoother gain)
    MatrixXd left_apply(const MatrixXd& m) const {
        return is_identity() ? m : MatrixXd(dense_ * m);
    }

private:
    MatrixXd dense_;  // empty = identity
};

/// Process noise covariance, diagonal or dense.
class ProcessNoise {
public:
    ProcessNoise() = default;

    static ProcessNoise zero(Eigen::Index n) { return diagonal(VectorXd::Zero(n)); }
    static ProcessNoise diagonal(VectorXd d);
    static ProcessNoise dense(MatrixXd q);

    bool is_diagonal() const { return diagonal_.size() > 0 || dense_.size() == 0; }
    const VectorXd& diag() const;
    const MatrixXd& dense_matrix() const { return dense_; }
    Eigen::Index dim() const {
        return is_diagonal() ? diagonal_.size() : dense_.rows();
    }

    void add_to(MatrixXd& p) const {
        if (is_diagonal())
            p.diagonal() += diagonal_;
        else
            p += dense_;
    }

    MatrixXd materialize() const {
        return is_diagonal() ? MatrixXd(diagonal_.asDiagonal()) : dense_;
    }

private:
    VectorXd diagonal_;
    MatrixXd dense_;
};

struct DynamicalModel {
    Transition transition;      // F_k
    ProcessNoise process_noise; // Q_k

    static DynamicalModel random_walk(VectorXd q_diag) {
        return {Transition::identity(), ProcessNoise::diagonal(std::move(q_diag))};
    }
};

/// Forward-pass record consumed by the RTS backward pass. Step j holds the
/// states at time_index initial.time_index + 1 + j together with the model
/// used for the transition into that step.
struct FilterTrace {
    struct Step {
        GaussianState predicted;
        GaussianState posterior;  // equals predicted when nothing was observed
        DynamicalModel model;     // transition k-1 -> k
    };

    GaussianState initial;  // posterior at time 0
    std::vector<Step> steps;

    std::size_t step_count() const { return steps.size(); }

    const GaussianState& posterior_at(std::size_t k) const {
        return k == 0 ? initial : steps[k - 1].posterior;
    }
};

/// Force exact symmetry after an algebraic step.
inline void symmetrize(MatrixXd& m) {
    m = ((m + m.transpose()) * 0.5).eval();
}

}  // namespace stfuse::state
