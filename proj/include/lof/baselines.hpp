#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lof/gaussian.hpp"
#include "lof/local_estimator.hpp"
#include "lof/state_space.hpp"

namespace lof {

enum class BciWeightRule { kInverseTrace, kInverseDet, kUniform };

/// Batch covariance intersection over local estimates:
/// omega_i proportional to the weight rule (inverse trace by default),
/// fused information = sum omega_i S_i^-1, fused mean from the information
/// combination.
GaussianBelief bci_fuse(const std::vector<GaussianBelief>& estimates,
                        BciWeightRule rule = BciWeightRule::kInverseTrace);

/// Centralized sequential filter step: one prediction from the prior, then
/// measurement updates applied in agent order, skipping empty observations.
GaussianBelief skf_fuse(
    const GaussianBelief& prior,
    const std::vector<std::pair<AgentPose, Observation>>& observations,
    const EvolutionModel& evo, const SensorModel& sensor,
    bool first_step = false);

}  // namespace lof
