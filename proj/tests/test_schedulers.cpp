#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "entsched/schedulers.hpp"

#include "support/oracles.hpp"

#include <algorithm>
#include <set>

using namespace entsched;

namespace {

PreInfo uniform_preinfo(int n, double fidelity, double rate) {
    PreInfo info(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            info.set_pair(i, j, fidelity, rate);
    return info;
}

Env make_env(int n, PreInfo info) {
    SimConfig config;
    config.n_qubits = n;
    return Env(config, std::move(info));
}

std::set<std::pair<int, int>> selected_pairs(const std::vector<Action>& actions) {
    std::set<std::pair<int, int>> pairs;
    for (const auto& a : actions)
        if (a.is_pair())
            pairs.emplace(a.qubit_i, a.qubit_j);
    return pairs;
}

} // namespace

TEST_CASE("random matrix lies below the threshold on legal pairs only") {
    Env env = make_env(5, uniform_preinfo(5, 0.98, 1.0));
    env.assign_actions({Action::pair(0, 1)});
    env.step(); // (0,1) established
    Rng rng(7);
    ActionMatrix m = random_matrix(env, rng, 0.02);
    for (int i = 0; i < 5; ++i) {
        CHECK(m.masked(i, i));
        for (int j = i + 1; j < 5; ++j) {
            if (i == 0 && j == 1) {
                CHECK(m.masked(i, j));
            } else {
                CHECK(!m.masked(i, j));
                CHECK(m.cost(i, j) >= 0.0);
                CHECK(m.cost(i, j) < 0.02);
                CHECK(m.cost(i, j) == m.cost(j, i));
            }
        }
    }
    Rng rng_a(9), rng_b(9);
    ActionMatrix ma = random_matrix(env, rng_a, 0.02);
    ActionMatrix mb = random_matrix(env, rng_b, 0.02);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            if (!ma.masked(i, j))
                CHECK(ma.cost(i, j) == mb.cost(i, j));
}

TEST_CASE("greedy matrix carries expected link errors and drives selection order") {
    PreInfo info(4);
    info.set_pair(0, 1, 0.999, 1.0);  // ~0.001 cost
    info.set_pair(2, 3, 0.99, 1.0);   // ~0.01
    info.set_pair(0, 2, 0.9, 1.0);    // above threshold
    info.set_pair(0, 3, 0.9, 1.0);
    info.set_pair(1, 2, 0.9, 1.0);
    info.set_pair(1, 3, 0.9, 1.0);
    Env env = make_env(4, info);
    ActionMatrix m = greedy_matrix(env, info, 1e9);
    CHECK(m.cost(0, 1) == doctest::Approx(expected_link_error(0.999, 1.0, 1e9)).epsilon(1e-12));

    SimConfig config;
    StrategyConfig strat;
    auto actions = select_actions(m, env, strat);
    auto pairs = selected_pairs(actions);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs.count({0, 1}) == 1); // cheapest first
    CHECK(pairs.count({2, 3}) == 1);
}

TEST_CASE("costs above the threshold idle the scheduler") {
    Env env = make_env(6, uniform_preinfo(6, 0.9, 1.0)); // every cost ~ 0.1
    StrategyConfig strat;
    auto actions = select_actions(greedy_matrix(env, env.preinfo(), 1e9), env, strat);
    CHECK(selected_pairs(actions).empty());
    CHECK(actions.size() == 3); // all capacity reported as Idle
}

TEST_CASE("mst plan picks the cheapest spanning edges") {
    // triangle weights ~ {0.01, 0.02, 0.03} via fidelities at huge t_mem
    PreInfo info(3);
    info.set_pair(0, 1, 0.99, 1.0);
    info.set_pair(0, 2, 0.98, 1.0);
    info.set_pair(1, 2, 0.97, 1.0);
    auto plan = mst_plan(info, 1e12);
    REQUIRE(plan.size() == 2);
    CHECK(plan[0].qubit_i == 0);
    CHECK(plan[0].qubit_j == 1);
    CHECK(plan[1].qubit_i == 0);
    CHECK(plan[1].qubit_j == 2);
    CHECK(plan[0].weight <= plan[1].weight);
}

TEST_CASE("mst plan equals the exhaustive optimum on random weights") {
    Rng rng(606);
    for (int round = 0; round < 60; ++round) {
        const int n = 3 + static_cast<int>(rng.below(6)); // up to 8
        PreInfo info(n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                info.set_pair(i, j, rng.uniform(0.5, 0.9999), rng.uniform(0.05, 1.0));
        const double t_mem = 1000.0;
        auto plan = mst_plan(info, t_mem);
        double total = 0.0;
        for (const auto& e : plan)
            total += e.weight;
        const double best = oracles::exhaustive_mst_weight(n, [&](int a, int b) {
            return expected_link_error(info.fidelity(a, b), info.success_prob(a, b), t_mem);
        });
        CHECK(total == doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("all-equal weights give the deterministic tie-rule tree") {
    PreInfo info = uniform_preinfo(5, 0.99, 1.0);
    auto plan = mst_plan(info, 1e9);
    REQUIRE(plan.size() == 4);
    for (int k = 0; k < 4; ++k) {
        CHECK(plan[k].qubit_i == 0);
        CHECK(plan[k].qubit_j == k + 1);
    }
}

TEST_CASE("mst matrix exposes only unbuilt plan edges") {
    PreInfo info(4);
    info.set_pair(0, 1, 0.999, 1.0);
    info.set_pair(1, 2, 0.998, 1.0);
    info.set_pair(2, 3, 0.997, 1.0);
    info.set_pair(0, 2, 0.9, 1.0);
    info.set_pair(0, 3, 0.9, 1.0);
    info.set_pair(1, 3, 0.9, 1.0);
    auto plan = mst_plan(info, 1e9);
    Env env = make_env(4, info);

    auto finite_count = [&](const ActionMatrix& m) {
        int count = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                count += !m.masked(i, j);
        return count;
    };
    CHECK(finite_count(mst_matrix(plan, env)) == 3);

    env.assign_actions({Action::pair(0, 1)});
    env.step();
    CHECK(finite_count(mst_matrix(plan, env)) == 2);

    env.assign_actions({Action::pair(1, 2)});
    env.step();
    env.assign_actions({Action::pair(2, 3)});
    env.step();
    ActionMatrix done = mst_matrix(plan, env);
    CHECK(finite_count(done) == 0);
    StrategyConfig strat;
    CHECK(selected_pairs(select_actions(done, env, strat)).empty());
}

TEST_CASE("sequential selection respects busy qubits and capacity") {
    PreInfo info(4);
    info.set_pair(0, 1, 0.999, 1.0);   // 0.001
    info.set_pair(1, 2, 0.998, 1.0);   // 0.002
    info.set_pair(2, 3, 0.997, 1.0);   // 0.003
    info.set_pair(0, 2, 0.9, 1.0);
    info.set_pair(0, 3, 0.9, 1.0);
    info.set_pair(1, 3, 0.9, 1.0);
    Env env = make_env(4, info);
    StrategyConfig strat;
    auto pairs = selected_pairs(select_actions(greedy_matrix(env, info, 1e9), env, strat));
    // (1,2) is blocked by qubit 1 already being used by (0,1)
    CHECK(pairs == std::set<std::pair<int, int>>{{0, 1}, {2, 3}});
}

TEST_CASE("single below-threshold entry yields one pair") {
    PreInfo info = uniform_preinfo(4, 0.9, 1.0);
    info.set_pair(1, 2, 0.999, 1.0);
    Env env = make_env(4, info);
    StrategyConfig strat;
    auto pairs = selected_pairs(select_actions(greedy_matrix(env, info, 1e9), env, strat));
    CHECK(pairs == std::set<std::pair<int, int>>{{1, 2}});
}

TEST_CASE("threshold law and matching validity hold on random matrices") {
    Rng rng(909);
    for (int round = 0; round < 50; ++round) {
        const int n = 4 + static_cast<int>(rng.below(9));
        PreInfo info(n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                info.set_pair(i, j, rng.uniform(0.9, 0.9999), rng.uniform(0.05, 1.0));
        Env env = make_env(n, info);
        // occupy a couple of qubits
        if (n >= 6) {
            env.assign_actions({Action::pair(0, 1)});
        }
        StrategyConfig strat;
        ActionMatrix m = greedy_matrix(env, info, 2000.0);
        auto actions = select_actions(m, env, strat);
        std::set<int> used;
        int pairs = 0;
        for (const auto& a : actions) {
            if (!a.is_pair())
                continue;
            ++pairs;
            CHECK(m.cost(a.qubit_i, a.qubit_j) < strat.action_threshold);
            CHECK(!env.qubit_busy(a.qubit_i));
            CHECK(!env.qubit_busy(a.qubit_j));
            CHECK(used.insert(a.qubit_i).second);
            CHECK(used.insert(a.qubit_j).second);
        }
        CHECK(pairs + static_cast<int>(env.workers().size()) <= env.config().max_workers);
    }
}

TEST_CASE("selection is equivariant under qubit relabeling") {
    // distinct costs so no tie-break ambiguity
    const int n = 7;
    Rng rng(313);
    PreInfo info(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            info.set_pair(i, j, rng.uniform(0.98, 0.9999), 1.0);
    const std::vector<int> perm{3, 5, 0, 6, 1, 4, 2};
    PreInfo permuted(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            permuted.set_pair(perm[i], perm[j], info.fidelity(i, j), info.success_prob(i, j));

    Env env = make_env(n, info);
    Env env_p = make_env(n, permuted);
    StrategyConfig strat;
    auto base = selected_pairs(select_actions(greedy_matrix(env, info, 1e9), env, strat));
    auto mapped = selected_pairs(select_actions(greedy_matrix(env_p, permuted, 1e9), env_p, strat));
    std::set<std::pair<int, int>> expectation;
    for (auto [i, j] : base)
        expectation.emplace(std::min(perm[i], perm[j]), std::max(perm[i], perm[j]));
    CHECK(mapped == expectation);
}
