#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "entsched/common.hpp"
#include "entsched/env.hpp"

#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace entsched;

namespace {

PreInfo uniform_preinfo(int n, double fidelity, double rate) {
    PreInfo info(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            info.set_pair(i, j, fidelity, rate);
    return info;
}

Env make_env(int n, double fidelity = 0.98, double rate = 0.5, std::uint64_t seed = 1) {
    SimConfig config;
    config.n_qubits = n;
    config.rng_seed = seed;
    return Env(config, uniform_preinfo(n, fidelity, rate));
}

std::vector<std::pair<int, int>> established_edges(const Env& env) {
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : env.progress())
        edges.emplace_back(e.qubit_i, e.qubit_j);
    return edges;
}

} // namespace

TEST_CASE("fresh environment is empty") {
    Env env = make_env(4);
    CHECK(env.step_count() == 0);
    CHECK(env.workers().empty());
    CHECK(env.progress().empty());
    CHECK(env.largest_component().size == 1);
    CHECK(env.idle_qubits() == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("max_workers defaults to half the qubits") {
    SimConfig config;
    config.n_qubits = 40;
    config.validate_and_finalize();
    CHECK(config.max_workers == 20);
    SimConfig bad;
    bad.n_qubits = 10;
    bad.max_workers = 6;
    CHECK_THROWS_AS(bad.validate_and_finalize(), ConfigError);
}

TEST_CASE("preinfo dimension mismatch is rejected") {
    SimConfig config;
    config.n_qubits = 5;
    CHECK_THROWS_AS(Env(config, uniform_preinfo(4, 0.9, 0.5)), ConfigError);
}

TEST_CASE("same seed gives bit-identical runs") {
    auto run = [](std::uint64_t seed) {
        Env env = make_env(8, 0.98, 0.3, seed);
        env.assign_actions({Action::pair(0, 1), Action::pair(2, 3), Action::pair(4, 5)});
        for (int s = 0; s < 50 && !env.is_terminal(); ++s)
            env.step();
        return env.progress_csv();
    };
    CHECK(run(99) == run(99));
    CHECK(run(99) != run(100));
}

TEST_CASE("idle qubits exclude active workers, not established links") {
    Env env = make_env(4, 0.98, 1.0);
    env.assign_actions({Action::pair(0, 1)});
    CHECK(env.idle_qubits() == std::vector<int>{2, 3});
    env.step(); // R = 1: link (0,1) lands, worker freed
    CHECK(env.established(0, 1));
    CHECK(env.idle_qubits() == std::vector<int>{0, 1, 2, 3});

    env.assign_actions({Action::pair(2, 3)});
    env.step();
    // (2,3) established, no worker on it: 2 and 3 stay idle
    CHECK(env.established(2, 3));
    CHECK(env.idle_qubits() == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("assign_actions rejects illegal batches") {
    Env env = make_env(6, 0.98, 1.0);

    SUBCASE("duplicate pair in one batch") {
        CHECK_THROWS_AS(env.assign_actions({Action::pair(0, 1), Action::pair(0, 1)}),
                        ActionError);
    }
    SUBCASE("qubit reused within the batch") {
        CHECK_THROWS_WITH_AS(env.assign_actions({Action::pair(0, 1), Action::pair(0, 2)}),
                             doctest::Contains("(0,2)"), ActionError);
    }
    SUBCASE("busy qubit from an earlier batch") {
        env.assign_actions({Action::pair(0, 1)});
        CHECK_THROWS_AS(env.assign_actions({Action::pair(1, 2)}), ActionError);
    }
    SUBCASE("established link duplicated") {
        env.assign_actions({Action::pair(0, 1)});
        env.step();
        CHECK_THROWS_AS(env.assign_actions({Action::pair(0, 1)}), ActionError);
    }
    SUBCASE("worker overflow") {
        CHECK_THROWS_AS(env.assign_actions({Action::pair(0, 1), Action::pair(2, 3),
                                            Action::pair(4, 5), Action::pair(0, 2)}),
                        ActionError);
    }
    SUBCASE("out of range index") {
        CHECK_THROWS_AS(env.assign_actions({Action::pair(0, 6)}), ActionError);
    }
    SUBCASE("failed batch commits nothing") {
        CHECK_THROWS_AS(env.assign_actions({Action::pair(0, 1), Action::pair(0, 2)}),
                        ActionError);
        CHECK(env.workers().empty());
    }
}

TEST_CASE("intra-component links are masked unless allowed") {
    SimConfig config;
    config.n_qubits = 4;
    config.allow_intra_component_links = true;
    Env open_env(config, uniform_preinfo(4, 0.98, 1.0));
    open_env.assign_actions({Action::pair(0, 1)});
    open_env.step();
    open_env.assign_actions({Action::pair(1, 2)});
    open_env.step();
    // 0-1-2 chain; cycle edge (0,2) is legal when the flag is on
    CHECK(open_env.assignable(0, 2));
    open_env.assign_actions({Action::pair(0, 2)});

    Env closed = make_env(4, 0.98, 1.0);
    closed.assign_actions({Action::pair(0, 1)});
    closed.step();
    closed.assign_actions({Action::pair(1, 2)});
    closed.step();
    CHECK(!closed.assignable(0, 2));
    CHECK_THROWS_AS(closed.assign_actions({Action::pair(0, 2)}), ActionError);
}

TEST_CASE("certain success lands on the first step") {
    Env env = make_env(4, 0.98, 1.0);
    env.assign_actions({Action::pair(0, 1)});
    const auto events = env.step();
    REQUIRE(events.size() == 1);
    CHECK(events[0].qubit_i == 0);
    CHECK(events[0].qubit_j == 1);
    CHECK(events[0].success_step == 1);
    CHECK(events[0].n_max_after == 2);
    CHECK(env.workers().empty());
}

TEST_CASE("near-zero success probability keeps the worker") {
    Env env = make_env(4, 0.98, 1e-12);
    env.assign_actions({Action::pair(0, 1)});
    for (int s = 0; s < 200; ++s)
        CHECK(env.step().empty());
    CHECK(env.workers().size() == 1);
    CHECK(env.step_count() == 200);
}

TEST_CASE("empirical success fraction matches the Bernoulli mean") {
    const int trials = 10000;
    int hits = 0;
    for (int t = 0; t < trials; ++t) {
        Env env = make_env(2, 0.98, 0.5, 1000 + t);
        env.assign_actions({Action::pair(0, 1)});
        hits += !env.step().empty();
    }
    const double p_hat = static_cast<double>(hits) / trials;
    // 3 sigma binomial bound at p = 0.5: 3 * 0.5 / sqrt(n) = 0.015
    CHECK(std::abs(p_hat - 0.5) < 0.02);
}

TEST_CASE("steps to success follow the geometric mean law") {
    const double rate = 0.2;
    const int trials = 10000;
    double total_steps = 0.0;
    for (int t = 0; t < trials; ++t) {
        Env env = make_env(2, 0.98, rate, 5000 + t);
        env.assign_actions({Action::pair(0, 1)});
        while (env.step().empty()) {
        }
        total_steps += static_cast<double>(env.step_count());
    }
    const double mean = total_steps / trials;
    const double sigma = std::sqrt((1.0 - rate) / (rate * rate) / trials);
    CHECK(std::abs(mean - 1.0 / rate) <= 3.0 * sigma);
}

TEST_CASE("largest component agrees with BFS on random growth") {
    Rng rng(2024);
    for (int round = 0; round < 200; ++round) {
        const int n = 4 + static_cast<int>(rng.below(13)); // up to 16
        Env env = make_env(n, 0.98, 1.0, 7000 + round);
        const int additions = static_cast<int>(rng.below(2 * n));
        for (int a = 0; a < additions; ++a) {
            std::vector<std::pair<int, int>> legal;
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    if (env.assignable(i, j))
                        legal.emplace_back(i, j);
            if (legal.empty())
                break;
            auto [i, j] = legal[rng.below(legal.size())];
            env.assign_actions({Action::pair(i, j)});
            env.step();
            CHECK(env.largest_component().size ==
                  oracles::bfs_largest_component_size(n, established_edges(env)));
        }
        // component membership, not just size
        auto component = env.largest_component();
        auto oracle = oracles::bfs_components(n, established_edges(env));
        for (int q : component.members)
            CHECK(oracle[q] == oracle[component.members.front()]);
    }
}

TEST_CASE("largest component ties break toward the lowest index") {
    Env env = make_env(6, 0.98, 1.0);
    env.assign_actions({Action::pair(2, 3), Action::pair(4, 5)});
    env.step();
    auto component = env.largest_component();
    CHECK(component.size == 2);
    CHECK(component.members == std::vector<int>{2, 3});
}

TEST_CASE("progress table is sorted and monotone") {
    Env env = make_env(12, 0.98, 0.25, 31);
    while (!env.is_terminal()) {
        std::vector<Action> batch;
        std::vector<std::uint8_t> used(12, 0);
        for (int i = 0; i < 12; ++i)
            for (int j = i + 1; j < 12; ++j)
                if (!used[i] && !used[j] && env.assignable(i, j) &&
                    static_cast<int>(env.workers().size() + batch.size()) < 6) {
                    batch.push_back(Action::pair(i, j));
                    used[i] = used[j] = 1;
                }
        env.assign_actions(batch);
        env.step();
    }
    const auto& progress = env.progress();
    REQUIRE(!progress.empty());
    for (std::size_t k = 1; k < progress.size(); ++k) {
        CHECK(progress[k].success_step >= progress[k - 1].success_step);
        CHECK(progress[k].n_max_after >= progress[k - 1].n_max_after);
    }
    for (const auto& e : progress)
        CHECK(e.qubit_i < e.qubit_j);
}

TEST_CASE("worker exclusivity holds") {
    Env env = make_env(10, 0.98, 0.3, 17);
    env.assign_actions({Action::pair(0, 1), Action::pair(2, 3), Action::pair(4, 5)});
    for (int s = 0; s < 30; ++s) {
        env.step();
        std::vector<int> seen;
        for (const auto& w : env.workers()) {
            seen.push_back(w.qubit_i);
            seen.push_back(w.qubit_j);
        }
        std::sort(seen.begin(), seen.end());
        CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
    }
}

TEST_CASE("terminal check follows the strict threshold and the step cap") {
    SimConfig config;
    config.n_qubits = 40;
    config.max_steps = 100000;
    Env env(config, uniform_preinfo(40, 0.98, 1.0));
    // grow a path one link at a time to control N_max exactly
    for (int k = 0; k < 29; ++k) {
        env.assign_actions({Action::pair(k, k + 1)});
        env.step();
    }
    CHECK(env.largest_component().size == 30);
    CHECK(!env.is_terminal()); // 30 > 30 is false: "exceeds" is strict
    env.assign_actions({Action::pair(29, 30)});
    env.step();
    CHECK(env.largest_component().size == 31);
    CHECK(env.is_terminal());

    SimConfig capped;
    capped.n_qubits = 4;
    capped.max_steps = 5;
    Env idle_env(capped, uniform_preinfo(4, 0.98, 0.5));
    for (int s = 0; s < 5; ++s) {
        CHECK(!idle_env.is_terminal());
        idle_env.step();
    }
    CHECK(idle_env.is_terminal()); // cap reached with no links at all
}

TEST_CASE("progress table exports the documented CSV") {
    Env env = make_env(4, 0.98, 1.0);
    env.assign_actions({Action::pair(1, 3)});
    env.step();
    CHECK(env.progress_csv() == "step,qubit_i,qubit_j,n_max_after\n1,1,3,2\n");
}
