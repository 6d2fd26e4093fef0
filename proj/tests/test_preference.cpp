#include "doctest.h"
#include "oracles.hpp"

#include "rvc/canonical.hpp"
#include "rvc/errors.hpp"
#include "rvc/preference.hpp"
#include "rvc/reward_learning.hpp"

#include <cmath>

using namespace rvc;
namespace cn = rvc::canonical;

namespace {

Vector vstar() {
    // Gauge V*(common) = 0 at (M = 20, eps = 1/15).
    Vector v(3);
    v << 0, 285.0 / 17, 321.0 / 17;
    return v;
}

Vector canonical_r() {
    Vector r(3);
    r << 0, -1, 20;
    return r;
}

double sigma(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

TEST_SUITE("preference_model") {

TEST_CASE("trajectory validation") {
    CHECK_NOTHROW(Trajectory{{0}, {}}.validate());
    CHECK_THROWS_AS(Trajectory({{0, 1}, {}}).validate(), InvalidInput);
    CHECK_THROWS_AS(Trajectory({{}, {}}).validate(), InvalidInput);
    CHECK_THROWS_AS(transition(0, 2, 1).validate(3, 2), InvalidInput);
    CHECK_THROWS_AS(transition(0, 1, 3).validate(3, 2), InvalidInput);
}

TEST_CASE("returns") {
    const Vector r = canonical_r();
    CHECK(partial_return(Trajectory{{2}, {}}, r) == 0.0);
    CHECK(partial_return(Trajectory{{0, 1, 2}, {0, 0}}, r) == -1.0);
    const Vector c = Vector::Constant(3, 2.5);
    CHECK(partial_return(Trajectory{{0, 1, 2, 0}, {0, 0, 0}}, c) == doctest::Approx(7.5));

    const Vector v = vstar();
    CHECK(bootstrapped_return(Trajectory{{1}, {}}, r, v) == v(1));
    CHECK(bootstrapped_return(transition(0, 0, 1), r, v) == doctest::Approx(285.0 / 17));
    const Trajectory h{{0, 1, 2}, {0, 0}};
    CHECK(bootstrapped_return(h, r, Vector::Zero(3)) == partial_return(h, r));
}

TEST_CASE("bootstrapped choice probabilities") {
    const Vector r = canonical_r();
    const Vector v = vstar();
    const TrajectoryPair same{transition(0, 0, 1), transition(0, 0, 1)};
    CHECK(choice_prob_bootstrapped(same, r, v) == 0.5);

    const TrajectoryPair pair{transition(0, 0, 1), transition(0, 1, 0)};
    CHECK(choice_prob_bootstrapped(pair, r, v) == doctest::Approx(sigma(285.0 / 17)).epsilon(1e-15));

    double prev = 0.0;
    for (double gap : {0.0, 1.0, 5.0, 20.0, 40.0, 800.0}) {
        Vector w = Vector::Zero(3);
        w(1) = gap;
        const double p = choice_prob_bootstrapped(pair, r, w);
        CHECK(p >= prev);
        prev = p;
    }
    CHECK(prev == 1.0);
}

TEST_CASE("partial-return choice probabilities") {
    const TrajectoryPair same{transition(0, 0, 1), transition(0, 0, 1)};
    CHECK(choice_prob_partial(same, Vector::Constant(3, 4.0)) == 0.5);

    const TrajectoryPair pair{transition(0, 0, 1), transition(0, 1, 0)};
    const Vector rt = vstar();
    CHECK(choice_prob_partial(pair, rt) == doctest::Approx(choice_prob_partial(pair, (rt.array() + 9.0).matrix())));

    const TrajectoryPair uneven{Trajectory{{0, 1}, {0}}, Trajectory{{0, 1, 2}, {0, 0}}};
    CHECK(choice_prob_partial(uneven, Vector::Ones(3)) == doctest::Approx(sigma(-1.0)).epsilon(1e-15));
}

TEST_CASE("property: complementarity is exact") {
    oracle::Random rng(5);
    for (int trial = 0; trial < 2000; ++trial) {
        const Vector r = rng.vector(4, -50, 50);
        const Vector v = rng.vector(4, -50, 50);
        const TrajectoryPair a{transition(rng.index(4), 0, rng.index(4)), transition(rng.index(4), 1, rng.index(4))};
        const TrajectoryPair b{a.h_prime, a.h};
        REQUIRE(choice_prob_bootstrapped(a, r, v) + choice_prob_bootstrapped(b, r, v) == 1.0);
        REQUIRE(choice_prob_partial(a, r) + choice_prob_partial(b, r) == 1.0);
        const double x = rng.uniform(-800, 800);
        REQUIRE(logistic(x) + logistic(-x) == 1.0);
    }
}

TEST_CASE("property: value gauge and transition-comparison identity") {
    oracle::Random rng(6);
    for (int trial = 0; trial < 500; ++trial) {
        const Vector r = rng.vector(3);
        const Vector v = rng.vector(3, -20, 20);
        const std::size_t s0 = rng.index(3);
        const TrajectoryPair pair{transition(s0, 0, rng.index(3)), transition(s0, 1, rng.index(3))};
        const double shifted = choice_prob_bootstrapped(pair, r, (v.array() + rng.uniform(-100, 100)).matrix());
        REQUIRE(shifted == doctest::Approx(choice_prob_bootstrapped(pair, r, v)).epsilon(1e-12));
        REQUIRE(choice_prob_bootstrapped(pair, r, v) == doctest::Approx(choice_prob_partial(pair, v)).epsilon(1e-12));
    }
}

TEST_CASE("comparison distributions") {
    CHECK_THROWS_AS(ComparisonDistribution({}), InvalidInput);
    CHECK_THROWS_AS(ComparisonDistribution({{{transition(0, 0, 1), transition(0, 1, 0)}, 0.7}}), InvalidInput);
    CHECK_THROWS_AS(ComparisonDistribution({{{transition(0, 0, 1), transition(0, 1, 0)}, 1.0},
                                            {{transition(0, 0, 1), transition(0, 1, 0)}, 0.0}}),
                    InvalidInput);

    const ComparisonDistribution one({{{transition(0, 0, 1), transition(0, 1, 0)}, 1.0}});
    CHECK(compares_transitions(one));
    const ComparisonDistribution cross({{{transition(0, 0, 1), transition(1, 1, 0)}, 1.0}});
    CHECK_FALSE(compares_transitions(cross));
    const ComparisonDistribution longer({{{Trajectory{{0, 1, 2}, {0, 0}}, transition(0, 1, 0)}, 1.0}});
    CHECK_FALSE(compares_transitions(longer));
    CHECK_THROWS_AS(comparison_graph(longer, 3), InvalidInput);
}

TEST_CASE("comparison graph") {
    const auto d = canonical_comparisons();
    CHECK(compares_transitions(d));
    const auto g = comparison_graph(d, 3);
    CHECK(g.connects_all());
    CHECK(g.adjoins(0, 1));
    CHECK(g.adjoins(1, 2));
    CHECK_FALSE(g.adjoins(0, 2));
    CHECK(g.connects(0, 2));

    // Only self-comparisons: no edges between distinct states.
    const ComparisonDistribution loops({{{transition(0, 0, 1), transition(0, 1, 1)}, 1.0}});
    const auto lg = comparison_graph(loops, 3);
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t t = 0; t < 3; ++t)
            CHECK(lg.connects(s, t) == (s == t));

    const ComparisonDistribution edge({{{transition(0, 0, 0), transition(0, 1, 1)}, 1.0}});
    CHECK(connects(edge, 3, 0, 1));
    CHECK_FALSE(connects(edge, 3, 0, 2));
    CHECK_FALSE(connects(edge, 3, 1, 2));
    CHECK(comparison_graph(edge, 3).n_components() == 2);
}

TEST_CASE("sampling") {
    const Vector r = canonical_r();
    const ComparisonDistribution coin({{{transition(0, 0, 1), transition(0, 1, 1)}, 1.0}});
    const auto data = sample_dataset(coin, r, vstar(), 100'000, 42);
    double chosen = 0;
    for (const auto& rec : data)
        chosen += rec.y;
    CHECK(std::abs(chosen / 1e5 - 0.5) <= 0.005);

    const auto again = sample_dataset(coin, r, vstar(), 100'000, 42);
    bool identical = true;
    for (std::size_t i = 0; i < data.size(); ++i)
        identical = identical && data[i].y == again[i].y && data[i].h == again[i].h;
    CHECK(identical);

    const auto d = canonical_comparisons();
    const auto mixed = sample_dataset(d, r, vstar(), 100'000, 7);
    double first = 0;
    for (const auto& rec : mixed)
        first += rec.h == d.support()[0].pair.h ? 1.0 : 0.0;
    const double sd = std::sqrt(0.25 / 1e5);
    CHECK(std::abs(first / 1e5 - 0.5) <= 3 * sd);
    CHECK_THROWS_AS(sample_dataset(d, r, vstar(), 0, 1), InvalidInput);
}

TEST_CASE("sampling: frozen first records for seed 2024") {
    // Pins the documented generator mapping so datasets stay reproducible.
    const auto d = canonical_comparisons();
    const auto data = sample_dataset(d, canonical_r(), vstar(), 8, 2024);
    std::mt19937_64 rng(2024);
    for (const auto& rec : data) {
        const double u_pair = double(rng() >> 11) * 0x1.0p-53;
        const double u_choice = double(rng() >> 11) * 0x1.0p-53;
        const auto& expected = d.support()[u_pair < 0.5 ? 0 : 1].pair;
        CHECK(rec.h == expected.h);
        const double p = choice_prob_bootstrapped(expected, canonical_r(), vstar());
        CHECK(rec.y == (u_choice < p ? 1 : 0));
    }
}

} // TEST_SUITE
