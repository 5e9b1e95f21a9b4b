#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "../gradcheck.hpp"
#include "../oracles.hpp"
#include "treeeic/cluster_losses.hpp"
#include "treeeic/nn.hpp"

using namespace treeeic;

namespace {

ViewModel small_model(int input, int k, RngStream& rng) {
    Architecture arch;
    arch.hidden = {6, 5};
    arch.embed_dim = 3;
    return make_view_model(input, k, arch, rng, 1e-2);
}

}  // namespace

TEST_SUITE("nn") {
    TEST_CASE("architecture shapes mirror the encoder in the decoder") {
        RngStream rng(1);
        const ViewModel m = small_model(7, 4, rng);
        CHECK(m.encoder.layers.size() == 3);
        CHECK(m.decoder.layers.size() == 3);
        CHECK(m.encoder.layers[0].weight.rows() == 7);
        CHECK(m.encoder.layers[1].weight.cols() == 5);
        CHECK(m.decoder.layers[0].weight.cols() == 5);
        CHECK(m.decoder.layers[2].weight.cols() == 7);
        CHECK(m.encoder.layers.back().activation == Activation::linear);
        CHECK(m.encoder.layers.front().activation == Activation::relu);
        CHECK(m.centroids.rows() == 4);
        CHECK(m.embed_dim() == 3);
    }

    TEST_CASE("Glorot bounds hold and biases start at zero") {
        RngStream rng(2);
        const Mlp mlp = make_mlp({30, 20}, rng);
        const double bound = std::sqrt(6.0 / 50.0);
        CHECK(mlp.layers[0].weight.cwiseAbs().maxCoeff() <= bound);
        CHECK(mlp.layers[0].weight.cwiseAbs().maxCoeff() > 0.5 * bound);
        CHECK(mlp.layers[0].bias.isZero());
    }

    TEST_CASE("forward pass matches the scalar oracle") {
        RngStream rng(3);
        ViewModel m = small_model(5, 3, rng);
        for (auto& layer : m.encoder.layers) layer.bias = oracle::random_matrix(1, layer.bias.cols(), rng, -1, 1);
        const Matrix x = oracle::random_matrix(9, 5, rng, -1, 1);
        CHECK((encode(m, x) - oracle::mlp_forward(m.encoder, x)).cwiseAbs().maxCoeff() < 1e-12);
        const Matrix z = encode(m, x);
        CHECK((decode(m, z) - oracle::mlp_forward(m.decoder, z)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK_THROWS_AS(encode(m, Matrix::Zero(2, 4)), ContractError);
    }

    TEST_CASE("soft assignment matches the oracle and lies on the simplex") {
        RngStream rng(4);
        const Matrix z = oracle::random_matrix(12, 3, rng, -3, 3);
        const Matrix mu = oracle::random_matrix(4, 3, rng, -3, 3);
        const Matrix q = soft_assign(z, mu);
        CHECK((q - oracle::student_t(z, mu)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((q.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    }

    TEST_CASE("an embedding on a centroid gets the largest share") {
        Matrix mu(2, 2);
        mu << 0, 0, 3, 4;
        Matrix z(1, 2);
        z << 0, 0;
        const Matrix q = soft_assign(z, mu);
        // kernels 1 and 1/26
        CHECK(q(0, 0) == doctest::Approx(26.0 / 27.0));
    }

    TEST_CASE("gradients of every loss term match finite differences") {
        const gradcheck::Toy toy = gradcheck::make_toy(17);
        const std::vector<LossSpec> specs{{1.0, 0.0, 0.0, 1.0}, {0.0, 0.01, 0.0, 1.0}, {0.0, 0.0, 0.2, 1.0},
                                          {0.0, 0.0, 0.2, 0.5}, {1.0, 0.01, 0.2, 1.0}};
        for (std::size_t v = 0; v < toy.models.size(); ++v) {
            for (const auto& spec : specs) {
                const auto err = gradcheck::check(toy.models[v], toy.x[v], toy.teacher[v], spec);
                CAPTURE(v);
                CAPTURE(spec.lambda_rec);
                CAPTURE(spec.lambda_cons);
                CAPTURE(spec.lambda_disc);
                CHECK(err.encoder <= 1e-4);
                CHECK(err.decoder <= 1e-4);
                CHECK(err.centroids <= 1e-4);
            }
        }
    }

    TEST_CASE("reported loss terms match the oracle values") {
        const gradcheck::Toy toy = gradcheck::make_toy(18);
        const ViewLoss l = backward(toy.models[0], toy.x[0], &toy.teacher[0], LossSpec{}, nullptr);
        CHECK(l.rec == doctest::Approx(oracle::view_objective(toy.models[0], toy.x[0], toy.teacher[0], 1, 0, 0, 1)));
        CHECK(l.cons == doctest::Approx(oracle::view_objective(toy.models[0], toy.x[0], toy.teacher[0], 0, 1, 0, 1)));
        CHECK(l.disc == doctest::Approx(oracle::view_objective(toy.models[0], toy.x[0], toy.teacher[0], 0, 0, 1, 1)));
    }

    TEST_CASE("a single-row batch skips the discrimination term") {
        const gradcheck::Toy toy = gradcheck::make_toy(19);
        const Matrix x = toy.x[0].topRows(1);
        const Matrix p = toy.teacher[0].topRows(1);
        ViewGradients g = ViewGradients::zeros_like(toy.models[0]);
        const ViewLoss l = backward(toy.models[0], x, &p, LossSpec{1.0, 0.01, 0.2, 1.0}, &g);
        CHECK(l.disc == 0.0);
        CHECK(g.params.back().allFinite());
    }

    TEST_CASE("first Adam step moves each parameter by about lr against its gradient") {
        RngStream rng(5);
        ViewModel m = small_model(4, 2, rng);
        const ViewModel before = m;
        ViewGradients g = ViewGradients::zeros_like(m);
        for (auto& p : g.params) p.setConstant(0.3);
        g.params.back().setConstant(-2.0);
        adam_step(m, g);
        const auto after = parameter_list(std::as_const(m));
        const auto orig = parameter_list(before);
        CHECK((*after[0] - *orig[0]).maxCoeff() == doctest::Approx(-1e-2).epsilon(1e-4));
        CHECK((*after.back() - *orig.back()).minCoeff() == doctest::Approx(1e-2).epsilon(1e-4));
        CHECK(m.adam.step == 1);
    }

    TEST_CASE("pretraining lowers reconstruction error") {
        RngStream rng(6);
        MultiViewDataset ds;
        ds.n_clusters = 2;
        ds.views = {oracle::random_matrix(64, 5, rng), oracle::random_matrix(64, 3, rng)};
        RngStream mrng(7);
        const MaskMatrix mask = simulate_missing(64, 2, 0.5, mrng);
        std::vector<ViewModel> models{small_model(5, 2, rng), small_model(3, 2, rng)};
        const double start = reconstruction_loss(models, ds, mask);
        const auto trace = pretrain(models, ds, mask, PretrainOptions{40, 16}, rng);
        CHECK(trace.size() == 40);
        CHECK(reconstruction_loss(models, ds, mask) < 0.5 * start);
    }

    TEST_CASE("missing rows stay zero in observed embeddings and assignments") {
        RngStream rng(8);
        const ViewModel m = small_model(3, 2, rng);
        const Matrix x = oracle::random_matrix(4, 3, rng);
        const MaskMatrix mask(4, 2, {1, 1, 0, 1, 1, 1, 0, 1});
        const Matrix z = embed_observed(m, x, mask, 0);
        CHECK(z.row(1).isZero());
        CHECK(z.row(3).isZero());
        CHECK_FALSE(z.row(0).isZero());
        const Matrix q = assign_observed(m, x, mask, 0);
        CHECK(q.row(1).isZero());
        CHECK(q.row(2).sum() == doctest::Approx(1.0));
    }

    TEST_CASE("centroid initialisation needs K observed samples") {
        RngStream rng(9);
        MultiViewDataset ds;
        ds.n_clusters = 3;
        ds.views = {oracle::random_matrix(4, 3, rng), oracle::random_matrix(4, 3, rng)};
        std::vector<ViewModel> models{small_model(3, 3, rng), small_model(3, 3, rng)};
        const MaskMatrix ok = MaskMatrix::all_observed(4, 2);
        init_centroids(models, ds, ok, 3, rng);
        CHECK(models[0].centroids.allFinite());
        const MaskMatrix thin(4, 2, {1, 1, 1, 0, 0, 1, 0, 1});
        CHECK_THROWS_AS(init_centroids(models, ds, thin, 3, rng), ContractError);
    }

    TEST_CASE("relabelling clusters permutes assignment columns") {
        RngStream rng(10);
        ViewModel m = small_model(3, 3, rng);
        m.centroids = oracle::random_matrix(3, 3, rng, -1, 1);
        const Matrix x = oracle::random_matrix(5, 3, rng);
        const Matrix q = soft_assign(encode(m, x), m.centroids);
        permute_clusters(m, {2, 0, 1});
        const Matrix q2 = soft_assign(encode(m, x), m.centroids);
        CHECK((q2.col(0) - q.col(2)).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((q2.col(1) - q.col(0)).cwiseAbs().maxCoeff() < 1e-15);
        CHECK_THROWS_AS(permute_clusters(m, {0, 0, 1}), ContractError);
    }

    TEST_CASE("checkpoints restore every value bit-exactly") {
        RngStream rng(11);
        std::vector<ViewModel> models{small_model(4, 2, rng), small_model(2, 2, rng)};
        ViewGradients g = ViewGradients::zeros_like(models[0]);
        for (auto& p : g.params) p = oracle::random_matrix(p.rows(), p.cols(), rng, -1, 1);
        adam_step(models[0], g);
        adam_step(models[0], g);
        const auto path = std::filesystem::temp_directory_path() / "treeeic_nn_checkpoint.bin";
        save_checkpoint(path, models);
        const auto back = load_checkpoint(path);
        REQUIRE(back.size() == 2);
        for (std::size_t v = 0; v < 2; ++v) {
            const auto a = parameter_list(models[v]);
            const auto b = parameter_list(back[v]);
            REQUIRE(a.size() == b.size());
            for (std::size_t p = 0; p < a.size(); ++p) CHECK(*a[p] == *b[p]);
            CHECK(back[v].adam.step == models[v].adam.step);
            CHECK(back[v].adam.m.size() == models[v].adam.m.size());
            for (std::size_t p = 0; p < models[v].adam.m.size(); ++p) {
                CHECK(back[v].adam.m[p] == models[v].adam.m[p]);
                CHECK(back[v].adam.v[p] == models[v].adam.v[p]);
            }
            CHECK(back[v].encoder.layers[0].activation == models[v].encoder.layers[0].activation);
        }
        std::ofstream(path, std::ios::binary) << "garbage";
        CHECK_THROWS(load_checkpoint(path));
    }
}

TEST_SUITE("cluster_losses") {
    TEST_CASE("consistency is the summed squared row difference") {
        Matrix p(2, 2), q(2, 2);
        p << 1, 0, 0.5, 0.5;
        q << 0.75, 0.25, 0.5, 0.5;
        Matrix dq;
        CHECK(consistency_rows(p, q, &dq) == doctest::Approx(0.125));
        CHECK(dq(0, 0) == doctest::Approx(-0.5));
    }

    TEST_CASE("InfoNCE matches the scalar oracle") {
        RngStream rng(12);
        for (int trial = 0; trial < 20; ++trial) {
            const Eigen::Index k = 2 + trial % 4;
            const Matrix p = oracle::random_simplex_rows(10, k, rng);
            const Matrix q = oracle::random_simplex_rows(10, k, rng);
            const double t = 0.5 + 0.1 * trial;
            CHECK(std::abs(infonce_columns(p, q, t) - oracle::infonce(p, q, t)) < 1e-10);
        }
    }

    TEST_CASE("InfoNCE gradient matches finite differences") {
        RngStream rng(13);
        const Matrix p = oracle::random_simplex_rows(6, 3, rng);
        Matrix q = oracle::random_simplex_rows(6, 3, rng);
        Matrix dq;
        infonce_columns(p, q, 0.7, &dq);
        const double h = 1e-6;
        for (Eigen::Index i = 0; i < q.size(); ++i) {
            const double saved = q.data()[i];
            q.data()[i] = saved + h;
            const double up = oracle::infonce(p, q, 0.7);
            q.data()[i] = saved - h;
            const double down = oracle::infonce(p, q, 0.7);
            q.data()[i] = saved;
            CHECK(dq.data()[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
        }
    }

    TEST_CASE("aligned columns give a lower loss than swapped ones") {
        Matrix p(4, 2);
        p << 0.9, 0.1, 0.8, 0.2, 0.1, 0.9, 0.2, 0.8;
        Matrix swapped = p;
        swapped.col(0) = p.col(1);
        swapped.col(1) = p.col(0);
        CHECK(infonce_columns(p, p, 1.0) < infonce_columns(p, swapped, 1.0));
    }

    TEST_CASE("a zero column is reported and yields no NaN") {
        Matrix p = Matrix::Constant(3, 2, 0.5);
        Matrix q(3, 2);
        q << 1, 0, 1, 0, 1, 0;
        Diagnostics diag;
        Matrix dq;
        const double l = infonce_columns(p, q, 1.0, &dq, &diag);
        CHECK(std::isfinite(l));
        CHECK(dq.allFinite());
        CHECK_FALSE(diag.warnings.empty());
    }
}
