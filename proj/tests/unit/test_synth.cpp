#include <doctest.h>

#include <map>

#include "treeeic/synth.hpp"

using namespace treeeic;

TEST_SUITE("synth") {
    TEST_CASE("labels are balanced and views have the requested widths") {
        SynthConfig c;
        c.n_samples = 103;
        c.n_views = 3;
        c.n_clusters = 4;
        c.view_dims = {4, 8, 12};
        RngStream rng(1);
        const MultiViewDataset ds = make_synthetic(c, rng);
        CHECK(ds.view_dims() == std::vector<int>{4, 8, 12});
        std::map<int, int> counts;
        for (int y : *ds.labels) ++counts[y];
        CHECK(counts.size() == 4);
        for (const auto& [y, n] : counts) CHECK((n == 25 || n == 26));
    }

    TEST_CASE("class means sit the requested distance apart") {
        SynthConfig c;
        c.n_samples = 4000;
        c.n_views = 1;
        c.n_clusters = 2;
        c.separation = 5.0;
        RngStream rng(2);
        const MultiViewDataset ds = make_synthetic(c, rng);
        RowVector m0 = RowVector::Zero(20), m1 = RowVector::Zero(20);
        int n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < 4000; ++i) {
            if ((*ds.labels)[i] == 0) {
                m0 += ds.views[0].row(static_cast<Eigen::Index>(i));
                ++n0;
            } else {
                m1 += ds.views[0].row(static_cast<Eigen::Index>(i));
                ++n1;
            }
        }
        CHECK((m0 / n0 - m1 / n1).norm() == doctest::Approx(5.0).epsilon(0.05));
    }

    TEST_CASE("bad shapes are rejected") {
        SynthConfig c;
        c.view_dims = {3, 20, 20, 20};
        RngStream rng(0);
        CHECK_THROWS_AS(make_synthetic(c, rng), ContractError);
        c.view_dims = {20};
        CHECK_THROWS_AS(make_synthetic(c, rng), ContractError);
    }

    TEST_CASE("same seed, same data") {
        SynthConfig c;
        c.n_samples = 50;
        RngStream a(3), b(3);
        CHECK(make_synthetic(c, a).views[2] == make_synthetic(c, b).views[2]);
    }
}
