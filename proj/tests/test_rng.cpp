#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "entsched/rng.hpp"

#include <cmath>
#include <set>

using namespace entsched;

TEST_CASE("same seed reproduces the stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i)
        CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived streams differ by tag and index") {
    std::set<std::uint64_t> firsts;
    for (auto tag : {StreamTag::Preinfo, StreamTag::Env, StreamTag::Strategy})
        for (std::uint64_t index = 0; index < 8; ++index)
            firsts.insert(Rng::derived(7, tag, index).next_u64());
    CHECK(firsts.size() == 24);
    CHECK(derive_seed(7, StreamTag::Env, 0) == derive_seed(7, StreamTag::Env, 0));
    CHECK(derive_seed(7, StreamTag::Env, 0) != derive_seed(8, StreamTag::Env, 0));
}

TEST_CASE("uniform stays in [0,1) and fills the range") {
    Rng rng(3);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 20000; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("gaussian matches requested moments") {
    Rng rng(11);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.gaussian(2.0, 3.0);
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
    CHECK(var == doctest::Approx(9.0).epsilon(0.03));
}

TEST_CASE("bernoulli hits its rate") {
    Rng rng(5);
    int hits = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
        hits += rng.bernoulli(0.3);
    CHECK(static_cast<double>(hits) / n == doctest::Approx(0.3).epsilon(0.02));
}

TEST_CASE("below respects the bound") {
    Rng rng(9);
    for (int i = 0; i < 10000; ++i)
        CHECK(rng.below(7) < 7);
}
