#include "entsched/schedulers.hpp"

#include "entsched/common.hpp"
#include "entsched/dsu.hpp"

#include <algorithm>

namespace entsched {

ActionMatrix masked_matrix(const Env& env) {
    ActionMatrix m(env.config().n_qubits);
    return m;
}

ActionMatrix random_matrix(const Env& env, Rng& rng, double threshold) {
    ActionMatrix m(env.config().n_qubits);
    const int n = env.config().n_qubits;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (env.established(i, j))
                continue;
            if (!env.config().allow_intra_component_links && env.same_component(i, j))
                continue;
            m.set_cost(i, j, rng.uniform(0.0, threshold));
        }
    }
    return m;
}

ActionMatrix greedy_matrix(const Env& env, const PreInfo& preinfo, double t_mem_steps) {
    ActionMatrix m(env.config().n_qubits);
    const int n = env.config().n_qubits;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (env.established(i, j))
                continue;
            if (!env.config().allow_intra_component_links && env.same_component(i, j))
                continue;
            m.set_cost(i, j, expected_link_error(preinfo.fidelity(i, j),
                                                 preinfo.success_prob(i, j), t_mem_steps));
        }
    }
    return m;
}

std::vector<PlanEdge> mst_plan(const PreInfo& preinfo, double t_mem_steps) {
    const int n = preinfo.n_qubits();
    if (n < 2)
        throw ConfigError("mst_plan: need at least 2 qubits");
    std::vector<PlanEdge> edges;
    edges.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            edges.push_back({i, j, expected_link_error(preinfo.fidelity(i, j),
                                                       preinfo.success_prob(i, j), t_mem_steps)});
    std::sort(edges.begin(), edges.end(), [](const PlanEdge& a, const PlanEdge& b) {
        if (a.weight != b.weight)
            return a.weight < b.weight;
        if (a.qubit_i != b.qubit_i)
            return a.qubit_i < b.qubit_i;
        return a.qubit_j < b.qubit_j;
    });
    DisjointSet dsu(static_cast<std::size_t>(n));
    std::vector<PlanEdge> tree;
    tree.reserve(n - 1);
    for (const auto& e : edges) {
        if (dsu.unite(e.qubit_i, e.qubit_j)) {
            tree.push_back(e);
            if (static_cast<int>(tree.size()) == n - 1)
                break;
        }
    }
    return tree;
}

ActionMatrix mst_matrix(const std::vector<PlanEdge>& plan, const Env& env) {
    ActionMatrix m(env.config().n_qubits);
    for (const auto& e : plan)
        if (!env.established(e.qubit_i, e.qubit_j))
            m.set_cost(e.qubit_i, e.qubit_j, e.weight);
    return m;
}

std::vector<Action> select_actions(const ActionMatrix& matrix, const Env& env,
                                   const StrategyConfig& config) {
    if (matrix.n_qubits() != env.config().n_qubits)
        throw ConfigError("select_actions: matrix is " + std::to_string(matrix.n_qubits()) +
                          " qubits, env is " + std::to_string(env.config().n_qubits));
    const int n = matrix.n_qubits();

    struct Candidate {
        double cost;
        int i, j;
    };
    std::vector<Candidate> candidates;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (!matrix.masked(i, j) && matrix.cost(i, j) < config.action_threshold &&
                !env.qubit_busy(i) && !env.qubit_busy(j))
                candidates.push_back({matrix.cost(i, j), i, j});
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.cost != b.cost)
            return a.cost < b.cost;
        if (a.i != b.i)
            return a.i < b.i;
        return a.j < b.j;
    });

    int slots = env.config().max_workers - static_cast<int>(env.workers().size());
    std::vector<std::uint8_t> used(n, 0);
    std::vector<Action> actions;
    for (const auto& c : candidates) {
        if (static_cast<int>(actions.size()) >= slots)
            break;
        if (used[c.i] || used[c.j])
            continue;
        used[c.i] = 1;
        used[c.j] = 1;
        actions.push_back(Action::pair(c.i, c.j));
    }
    while (static_cast<int>(actions.size()) < slots)
        actions.push_back(Action::idle());
    return actions;
}

} // namespace entsched
