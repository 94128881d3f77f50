#include "stfuse/state_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>
#include <sstream>

namespace stfuse::state {

namespace {

constexpr double kInnovationJitter = 1e-12;
constexpr double kSpectralNormSlack = 1e-12;

void require_finite(const VectorXd& v, const char* what) {
    if (!v.allFinite())
        throw EstimationError(std::string(what) + " contains non-finite entries");
}

[[noreturn]] void throw_singular(const char* what, int time_index,
                                 const std::string& modality) {
    std::ostringstream msg;
    msg << what << " is numerically singular at step " << time_index;
    if (!modality.empty()) msg << " (modality " << modality << ")";
    throw EstimationError(msg.str());
}

}  // namespace

Transition Transition::dense(MatrixXd f) {
    if (f.rows() != f.cols())
        throw ConfigError("transition matrix must be square");
    const double norm2 = f.jacobiSvd().singularValues()(0);
    if (norm2 > 1.0 + kSpectralNormSlack) {
        std::ostringstream msg;
        msg << "transition spectral norm " << norm2 << " exceeds 1";
        throw ConfigError(msg.str());
    }
    Transition t;
    t.dense_ = std::move(f);
    return t;
}

ProcessNoise ProcessNoise::diagonal(VectorXd d) {
    if ((d.array() < 0.0).any() || !d.allFinite())
        throw ConfigError("process noise diagonal entries must be finite and >= 0");
    ProcessNoise q;
    q.diagonal_ = std::move(d);
    return q;
}

ProcessNoise ProcessNoise::dense(MatrixXd m) {
    if (m.rows() != m.cols())
        throw ConfigError("process noise matrix must be square");
    if ((m.diagonal().array() < 0.0).any() || !m.allFinite())
        throw ConfigError("process noise diagonal entries must be finite and >= 0");
    if (!m.isApprox(m.transpose(), 1e-9))
        throw ConfigError("process noise matrix must be symmetric");
    ProcessNoise q;
    q.dense_ = std::move(m);
    return q;
}

const VectorXd& ProcessNoise::diag() const {
    if (!is_diagonal())
        throw ConfigError("process noise is dense, diagonal view unavailable");
    return diagonal_;
}

GaussianState predict(const GaussianState& state, const DynamicalModel& model) {
    const Eigen::Index n = state.dim();
    if (state.covariance.rows() != n || state.covariance.cols() != n)
        throw ConfigError("state covariance shape does not match mean length");
    if (!model.transition.is_identity() && model.transition.matrix().rows() != n)
        throw ConfigError("transition dimension does not match state");
    if (model.process_noise.dim() != n)
        throw ConfigError("process noise dimension does not match state");

    GaussianState out;
    out.mean = model.transition.apply(state.mean);
    out.covariance = model.transition.propagate(state.covariance);
    model.process_noise.add_to(out.covariance);
    symmetrize(out.covariance);
    out.time_index = state.time_index + 1;
    out.kind = StateKind::Predicted;
    return out;
}

GaussianState update(const GaussianState& state, const obs::ModalityOperator& op,
                     const VectorXd& measurement) {
    if (op.rows() != measurement.size())
        throw ConfigError("operator row count does not match measurement length");

    if (op.empty()) {
        GaussianState out = state;
        out.kind = StateKind::Posterior;
        return out;
    }

    const Eigen::Index n = state.dim();
    if (op.stacked.cols() != n)
        throw ConfigError("operator column count does not match state dimension");
    if ((op.noise_diag.array() <= 0.0).any())
        throw ConfigError("measurement noise must be positive on retained rows");
    require_finite(measurement, "measurement");

    const MatrixXd hp = op.stacked * state.covariance;               // m x n
    MatrixXd t = hp * op.stacked.transpose();                        // m x m
    t.diagonal() += op.noise_diag;
    symmetrize(t);

    // Jitter only rescues a failed factorization; a healthy T is used as-is
    // so sequential and stacked updates stay equivalent to machine precision.
    Eigen::LLT<MatrixXd> llt(t);
    if (llt.info() != Eigen::Success) {
        t.diagonal().array() += kInnovationJitter;
        llt.compute(t);
        if (llt.info() != Eigen::Success)
            throw_singular("innovation covariance", state.time_index, op.modality);
    }

    const MatrixXd gain = llt.solve(hp).transpose();                 // n x m
    const VectorXd innovation = measurement - op.stacked * state.mean;

    GaussianState out;
    out.mean = state.mean + gain * innovation;
    require_finite(out.mean, "posterior mean");

    // Joseph form keeps the covariance symmetric PSD under roundoff.
    MatrixXd a = -(gain * op.stacked);
    a.diagonal().array() += 1.0;                                     // I - K H
    out.covariance = a * state.covariance * a.transpose() +
                     gain * op.noise_diag.asDiagonal() * gain.transpose();
    symmetrize(out.covariance);
    out.time_index = state.time_index;
    out.kind = StateKind::Posterior;
    return out;
}

GaussianState fuse_step(const GaussianState& predicted,
                        std::span<const obs::AssembledObservation> observations) {
    for (const auto& o : observations) {
        if (o.op.time_index != predicted.time_index) {
            std::ostringstream msg;
            msg << "observation time index " << o.op.time_index
                << " does not match state time index " << predicted.time_index
                << " (modality " << o.op.modality << ")";
            throw ConfigError(msg.str());
        }
    }
    GaussianState current = predicted;
    current.kind = StateKind::Posterior;
    for (const auto& o : observations)
        current = update(current, o.op, o.measurement);
    return current;
}

FilterTrace filter_sequence(const GaussianState& initial,
                            std::span<const DynamicalModel> models,
                            std::span<const std::vector<obs::AssembledObservation>> observations) {
    if (initial.kind != StateKind::Posterior)
        throw ConfigError("filter_sequence requires a posterior initial state");
    if (initial.time_index != 0)
        throw ConfigError("filter_sequence requires the initial state at time 0");
    if (models.size() != observations.size())
        throw ConfigError("filter_sequence: one dynamical model per observed step required");

    FilterTrace trace;
    trace.initial = initial;
    trace.steps.reserve(models.size());

    GaussianState posterior = initial;
    for (std::size_t k = 0; k < models.size(); ++k) {
        FilterTrace::Step step;
        step.model = models[k];
        step.predicted = predict(posterior, models[k]);
        step.posterior = fuse_step(step.predicted, observations[k]);
        posterior = step.posterior;
        trace.steps.push_back(std::move(step));
    }
    return trace;
}

std::vector<GaussianState> rts_smooth(const FilterTrace& trace) {
    const std::size_t K = trace.step_count();
    std::vector<GaussianState> smoothed(K + 1);

    smoothed[K] = trace.posterior_at(K);
    smoothed[K].kind = StateKind::Smoothed;

    for (std::size_t k = K; k-- > 0;) {
        const GaussianState& post = trace.posterior_at(k);
        const FilterTrace::Step& next = trace.steps[k];  // step k+1 quantities
        const Transition& f = next.model.transition;

        // G_k = P_{k|k} F^T P_{k+1|k}^{-1}, applied through an SPD solve.
        Eigen::LLT<MatrixXd> llt(next.predicted.covariance);
        if (llt.info() != Eigen::Success)
            throw_singular("predicted covariance", next.predicted.time_index, {});
        const MatrixXd gain = llt.solve(f.left_apply(post.covariance)).transpose();

        GaussianState s;
        s.mean = post.mean + gain * (smoothed[k + 1].mean - next.predicted.mean);
        s.covariance =
            post.covariance +
            gain * (smoothed[k + 1].covariance - next.predicted.covariance) *
                gain.transpose();
        symmetrize(s.covariance);
        s.time_index = post.time_index;
        s.kind = StateKind::Smoothed;
        smoothed[k] = std::move(s);
    }
    return smoothed;
}

std::vector<GaussianState> joint_gaussian_oracle(
    const GaussianState& initial, std::span<const DynamicalModel> models,
    std::span<const std::vector<obs::AssembledObservation>> observations) {
    if (models.size() != observations.size())
        throw ConfigError("oracle: one dynamical model per observed step required");

    const Eigen::Index n = initial.dim();
    const std::size_t K = models.size();
    const Eigen::Index joint_dim = static_cast<Eigen::Index>(K + 1) * n;
    if (joint_dim > 2000) {
        std::ostringstream msg;
        msg << "oracle refuses joint dimension " << joint_dim << " (cap 2000)";
        throw ConfigError(msg.str());
    }

    // Joint prior over s_{0:K}: mean by forward application of F, covariance
    // blocks by Cov(s_{k+1}, s_j) = F_k Cov(s_k, s_j).
    VectorXd mean = VectorXd::Zero(joint_dim);
    MatrixXd cov = MatrixXd::Zero(joint_dim, joint_dim);
    mean.segment(0, n) = initial.mean;
    cov.block(0, 0, n, n) = initial.covariance;
    for (std::size_t k = 0; k < K; ++k) {
        const auto& f = models[k].transition;
        const Eigen::Index row = static_cast<Eigen::Index>(k + 1) * n;
        mean.segment(row, n) = f.apply(mean.segment(static_cast<Eigen::Index>(k) * n, n));
        for (std::size_t j = 0; j <= k; ++j) {
            const Eigen::Index col = static_cast<Eigen::Index>(j) * n;
            const MatrixXd blk =
                f.left_apply(cov.block(static_cast<Eigen::Index>(k) * n, col, n, n));
            cov.block(row, col, n, n) = blk;
            cov.block(col, row, n, n) = blk.transpose();
        }
        MatrixXd diag =
            f.propagate(cov.block(static_cast<Eigen::Index>(k) * n,
                                  static_cast<Eigen::Index>(k) * n, n, n));
        models[k].process_noise.add_to(diag);
        cov.block(row, row, n, n) = diag;
    }
    symmetrize(cov);

    // Stack every observation row against its step's column block.
    Eigen::Index total_rows = 0;
    for (const auto& step_obs : observations)
        for (const auto& o : step_obs) total_rows += o.op.rows();

    if (total_rows > 0) {
        MatrixXd h = MatrixXd::Zero(total_rows, joint_dim);
        VectorXd y(total_rows);
        VectorXd r(total_rows);
        Eigen::Index row = 0;
        for (std::size_t k = 0; k < K; ++k) {
            const Eigen::Index col = static_cast<Eigen::Index>(k + 1) * n;
            for (const auto& o : observations[k]) {
                if (o.op.rows() == 0) continue;
                h.block(row, col, o.op.rows(), n) = MatrixXd(o.op.stacked);
                y.segment(row, o.op.rows()) = o.measurement;
                r.segment(row, o.op.rows()) = o.op.noise_diag;
                row += o.op.rows();
            }
        }

        MatrixXd s = h * cov * h.transpose();
        s.diagonal() += r;
        symmetrize(s);
        Eigen::LDLT<MatrixXd> ldlt(s);
        if (ldlt.info() != Eigen::Success)
            throw EstimationError("oracle: stacked innovation covariance factorization failed");
        const MatrixXd cross = cov * h.transpose();      // joint x m
        const VectorXd resid = y - h * mean;
        mean += cross * ldlt.solve(resid);
        cov -= cross * ldlt.solve(cross.transpose());
        symmetrize(cov);
    }

    std::vector<GaussianState> marginals(K + 1);
    for (std::size_t k = 0; k <= K; ++k) {
        const Eigen::Index at = static_cast<Eigen::Index>(k) * n;
        GaussianState g;
        g.mean = mean.segment(at, n);
        g.covariance = cov.block(at, at, n, n);
        g.time_index = initial.time_index + static_cast<int>(k);
        g.kind = StateKind::Smoothed;
        marginals[k] = std::move(g);
    }
    return marginals;
}

}  // namespace stfuse::state
