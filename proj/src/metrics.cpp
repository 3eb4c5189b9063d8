#include "entsched/metrics.hpp"

#include "entsched/common.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace entsched {

double link_error(double fidelity, double elapsed_steps, double t_mem_steps) {
    return 1.0 - fidelity * std::exp(-elapsed_steps / t_mem_steps);
}

double expected_link_error(double fidelity, double success_prob, double t_mem_steps) {
    if (success_prob <= 0.0)
        return 1.0;
    return 1.0 - fidelity * std::exp(-1.0 / (success_prob * t_mem_steps));
}

double cluster_error(const Env& env, double t_mem_steps) {
    const auto component = env.largest_component();
    std::vector<std::uint8_t> in_component(env.config().n_qubits, 0);
    for (int q : component.members)
        in_component[q] = 1;
    double total = 0.0;
    for (const auto& entry : env.progress()) {
        if (!in_component[entry.qubit_i] || !in_component[entry.qubit_j])
            continue;
        const double elapsed = static_cast<double>(env.step_count() - entry.success_step);
        total += link_error(env.preinfo().fidelity(entry.qubit_i, entry.qubit_j), elapsed,
                            t_mem_steps);
    }
    return total;
}

double mu(int n_max, double epsilon) {
    const double n = static_cast<double>(n_max);
    if (epsilon <= 0.0)
        return n;
    return std::min(n, 1.0 / (n * epsilon));
}

MuPeak peak_mu(const std::vector<TrajectoryPoint>& trajectory) {
    if (trajectory.empty())
        throw ConfigError("peak_mu: empty trajectory");
    MuPeak best{-std::numeric_limits<double>::infinity(), 0};
    for (const auto& point : trajectory) {
        if (point.mu > best.mu_star) {
            best.mu_star = point.mu;
            best.step_star = point.step;
        }
    }
    return best;
}

std::string trajectory_csv(const std::vector<TrajectoryPoint>& trajectory) {
    std::ostringstream out;
    out << "step,n_max,epsilon,mu\n";
    char buf[96];
    for (const auto& p : trajectory) {
        std::snprintf(buf, sizeof(buf), "%ld,%d,%.17g,%.17g", p.step, p.n_max, p.epsilon, p.mu);
        out << buf << '\n';
    }
    return out.str();
}

} // namespace entsched
