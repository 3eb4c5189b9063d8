#pragma once

#include "entsched/env.hpp"

#include <string>
#include <vector>

namespace entsched {

/// One sampled point of an episode trajectory.
struct TrajectoryPoint {
    long step;
    int n_max;
    double epsilon;
    double mu;
};

/// Error of a stored link: 1 - F exp(-elapsed/t_mem), both times in attempt steps.
double link_error(double fidelity, double elapsed_steps, double t_mem_steps);

/// Static cost of a prospective link, with the expected 1/R wait folded in:
/// 1 - F exp(-1/(R t_mem)). R = 0 is defined as worst cost 1.
double expected_link_error(double fidelity, double success_prob, double t_mem_steps);

/// Aggregate error over established links whose both endpoints lie in the
/// current largest component.
double cluster_error(const Env& env, double t_mem_steps);

/// Cluster-state quantum-volume exponent candidate at one instant:
/// min(n_max, 1/(n_max epsilon)); epsilon = 0 gives n_max.
double mu(int n_max, double epsilon);

struct MuPeak {
    double mu_star;
    long step_star;
};

/// Maximum mu over the trajectory; earliest step on ties. Throws on empty input.
MuPeak peak_mu(const std::vector<TrajectoryPoint>& trajectory);

/// CSV rows `step,n_max,epsilon,mu`.
std::string trajectory_csv(const std::vector<TrajectoryPoint>& trajectory);

} // namespace entsched
