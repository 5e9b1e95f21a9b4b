#include <doctest.h>

#include "../oracles.hpp"
#include "treeeic/mpt.hpp"

using namespace treeeic;

TEST_SUITE("mpt") {
    TEST_CASE("tau follows the missing rate") {
        CHECK(compute_tau(6, 6, 1.0) == 3);
        CHECK(compute_tau(6, 6, 0.0) == 6);
        CHECK(compute_tau(4, 4, 0.5) == 3);
        CHECK(compute_tau(2, 2, 1.0) == 2);
        // 3 + 3 * 0.49 = 4.47
        CHECK(compute_tau(6, 6, 0.3) == 4);
    }

    TEST_CASE("tau is non-increasing in rho") {
        for (int v = 2; v <= 8; ++v) {
            int prev = compute_tau(v, v, 0.0);
            for (int step = 1; step <= 20; ++step) {
                const int t = compute_tau(v, v, step / 20.0);
                CHECK(t <= prev);
                CHECK(t >= 2);
                prev = t;
            }
        }
    }

    TEST_CASE("tau rejects bad arguments") {
        CHECK_THROWS_AS(compute_tau(4, 5, 0.5), ContractError);
        CHECK_THROWS_AS(compute_tau(4, 1, 0.5), ContractError);
        CHECK_THROWS_AS(compute_tau(4, 4, -0.1), ContractError);
    }

    TEST_CASE("pattern counts for six views") {
        const std::vector<std::size_t> expected{6, 15, 20, 15};
        for (int tau = 1; tau <= 4; ++tau) {
            CHECK(enumerate_patterns(6, tau).patterns.size() == expected[static_cast<std::size_t>(tau - 1)]);
        }
    }

    TEST_CASE("enumeration equals the exhaustive pattern list in lexicographic order") {
        for (int v = 1; v <= 7; ++v) {
            for (int tau = 1; tau <= v; ++tau) {
                const PatternSet ps = enumerate_patterns(v, tau);
                const auto ref = oracle::patterns_with(v, tau);
                REQUIRE(ps.patterns.size() == ref.size());
                for (std::size_t j = 0; j < ref.size(); ++j) CHECK(ps.patterns[j].bits == ref[j]);
            }
        }
    }

    TEST_CASE("pruning visits fewer nodes than the full tree") {
        const PatternSet ps = enumerate_patterns(8, 2);
        CHECK(ps.nodes_visited < (std::size_t{1} << 9) - 1);
        CHECK(ps.nodes_visited >= ps.patterns.size());
    }

    TEST_CASE("bad tau is rejected") {
        CHECK_THROWS_AS(enumerate_patterns(4, 0), ContractError);
        CHECK_THROWS_AS(enumerate_patterns(4, 5), ContractError);
    }

    TEST_CASE("grouping matches brute-force membership on random masks") {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            RngStream rng(seed);
            const std::size_t v = 2 + seed % 5;
            const MaskMatrix mask = simulate_missing(60, v, rng.uniform(), rng);
            const int tau = 1 + static_cast<int>(rng.uniform_int(v));
            const PatternSet ps = enumerate_patterns(static_cast<int>(v), tau);
            const auto sets = group_samples(mask, ps);
            REQUIRE(sets.size() == ps.patterns.size());
            for (std::size_t j = 0; j < sets.size(); ++j) {
                CHECK(sets[j].sample_ids == oracle::members(mask, ps.patterns[j].bits));
                CHECK(sets[j].view_ids.size() == static_cast<std::size_t>(tau));
            }
        }
    }

    TEST_CASE("a complete sample sits in every set") {
        const MaskMatrix mask = MaskMatrix::all_observed(5, 4);
        const auto sets = group_samples(mask, enumerate_patterns(4, 2));
        CHECK(sets.size() == 6);
        for (const auto& s : sets) CHECK(s.sample_ids.size() == 5);
    }

    TEST_CASE("union size is non-increasing in tau") {
        RngStream rng(13);
        const MaskMatrix mask = simulate_missing(500, 6, 1.0, rng);
        std::size_t prev = mask.n_samples();
        for (int tau = 1; tau <= 6; ++tau) {
            const auto u = union_samples(group_samples(mask, enumerate_patterns(6, tau)));
            CHECK(u.size() <= prev);
            prev = u.size();
        }
        CHECK(prev == 0);
    }

    TEST_CASE("samples with fewer than tau views are left out") {
        const MaskMatrix mask(3, 3, {1, 0, 0, 1, 1, 0, 1, 1, 1});
        const auto u = union_samples(group_samples(mask, enumerate_patterns(3, 2)));
        CHECK(u == std::vector<std::size_t>{1, 2});
    }
}
