#pragma once

#include <span>
#include <vector>

#include "stfuse/observation.hpp"
#include "stfuse/state_types.hpp"

namespace stfuse::state {

/// Kalman prediction: mean' = F mean, P' = F P F^T + Q, time index + 1.
GaussianState predict(const GaussianState& state, const DynamicalModel& model);

/// Kalman update against one modality. Covariance is propagated in Joseph
/// form (I - K H) P (I - K H)^T + K R K^T. An empty observation (zero rows)
/// returns the input unchanged except kind = Posterior.
GaussianState update(const GaussianState& state, const obs::ModalityOperator& op,
                     const VectorXd& measurement);

/// Sequential per-modality update: each posterior feeds the next modality.
/// Equivalent to a single update with all modalities stacked.
GaussianState fuse_step(const GaussianState& predicted,
                        std::span<const obs::AssembledObservation> observations);

/// Forward pass over k = 1..K. models[k-1] drives the transition into step k;
/// observations[k-1] holds the modalities acquired at step k (possibly none).
FilterTrace filter_sequence(const GaussianState& initial,
                            std::span<const DynamicalModel> models,
                            std::span<const std::vector<obs::AssembledObservation>> observations);

/// RTS backward pass. Returns smoothed states for k = 0..K;
/// the terminal smoothed state equals the terminal posterior exactly.
std::vector<GaussianState> rts_smooth(const FilterTrace& trace);

/// Brute-force verification oracle: materializes the joint Gaussian over
/// s_{0:K}, conditions on every stacked observation at once, and returns the
/// per-step marginals. Shares no code with the filter/smoother recursions.
/// Refuses joint dimensions above 2000.
std::vector<GaussianState> joint_gaussian_oracle(
    const GaussianState& initial, std::span<const DynamicalModel> models,
    std::span<const std::vector<obs::AssembledObservation>> observations);

}  // namespace stfuse::state
