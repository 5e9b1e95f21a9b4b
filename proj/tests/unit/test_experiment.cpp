#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "treeeic/experiment.hpp"

using namespace treeeic;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_run() {
    RunConfig c;
    SynthConfig s;
    s.n_samples = 90;
    s.n_views = 3;
    s.n_clusters = 3;
    s.view_dims = {5, 5, 5};
    s.separation = 6.0;
    c.synth = s;
    c.k = 3;
    c.rho = 0.5;
    c.seeds = {0, 1};
    c.hidden = {12};
    c.embed_dim = 4;
    c.pretrain_epochs = 5;
    c.epochs = 4;
    c.interval = 2;
    c.batch = 32;
    c.lr = 5e-3;
    c.kmeans_restarts = 2;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE("experiment") {
    TEST_CASE("config survives a JSON round trip") {
        RunConfig c = tiny_run();
        c.tau = 2;
        c.dump_groups = "groups";
        const nlohmann::json j = to_json(c);
        CHECK(to_json(run_config_from_json(j)) == j);
        CHECK(j.contains("lambda1"));
        CHECK(j.at("interval") == 2);
    }

    TEST_CASE("missing keys keep defaults and unknown keys are rejected") {
        const RunConfig c = run_config_from_json(nlohmann::json{{"rho", 0.3}});
        CHECK(c.rho == 0.3);
        CHECK(c.lambda2 == 0.2);
        CHECK(c.hidden == std::vector<int>{500, 500, 2000});
        CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"lamda1", 0.1}}), ContractError);
        CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"synth", {{"views", 3}}}}), ContractError);
    }

    TEST_CASE("validation catches bad values") {
        RunConfig c = tiny_run();
        c.rho = 1.2;
        CHECK_THROWS_AS(c.validate(), ContractError);
        c = tiny_run();
        c.seeds.clear();
        CHECK_THROWS_AS(c.validate(), ContractError);
        c = tiny_run();
        c.scaling = "log";
        CHECK_THROWS_AS(c.validate(), ContractError);
    }

    TEST_CASE("ablation flags map onto training settings") {
        RunConfig c = tiny_run();
        c.no_cons = c.no_disc = c.no_mpt = c.no_mde = true;
        const TrainConfig t = make_train_config(c, 3);
        CHECK(t.loss.lambda1 == 0.0);
        CHECK(t.loss.lambda2 == 0.0);
        CHECK_FALSE(t.use_mpt);
        CHECK(t.weighting == Weighting::uniform);
        CHECK(t.arch.hidden == std::vector<int>{12});
    }

    TEST_CASE("masks depend on the seed only, not on the variant") {
        RunConfig a = tiny_run();
        RunConfig b = a;
        b.no_mpt = true;
        b.lambda1 = 0.5;
        CHECK(mask_for_seed(a, 90, 3, 4) == mask_for_seed(b, 90, 3, 4));
        CHECK_FALSE(mask_for_seed(a, 90, 3, 4) == mask_for_seed(a, 90, 3, 5));
    }

    TEST_CASE("run reports every seed and population statistics") {
        const RunReport r = run(tiny_run());
        REQUIRE(r.runs.size() == 2);
        REQUIRE(r.acc);
        const double mean = (r.runs[0].eval->acc + r.runs[1].eval->acc) / 2;
        CHECK(r.acc->mean == doctest::Approx(mean));
        CHECK(r.acc->std == doctest::Approx(std::abs(r.runs[0].eval->acc - mean)));
    }

    TEST_CASE("summaries use the population deviation") {
        const MetricSummary s = summarize({1.0, 3.0});
        CHECK(s.mean == 2.0);
        CHECK(s.std == 1.0);
    }

    TEST_CASE("reruns and parallel seeds give identical reports") {
        RunConfig c = tiny_run();
        const auto a = to_json(run(c), false);
        const auto b = to_json(run(c), false);
        CHECK(a == b);
        c.parallel_seeds = 2;
        auto p = to_json(run(c), false);
        p["config"]["parallel_seeds"] = 1;
        CHECK(p == a);
    }

    TEST_CASE("the reduced pipeline equals a direct call") {
        RunConfig c = tiny_run();
        c.seeds = {3};
        c.no_mpt = c.no_cons = c.no_disc = true;
        const RunReport r = run(c);
        const MultiViewDataset ds = load_dataset(c);
        const MaskMatrix mask = mask_for_seed(c, ds.n_samples(), ds.n_views(), 3);
        TrainConfig t = make_train_config(c, 3);
        CHECK(t.loss.lambda1 == 0.0);
        RngStream root(3);
        root.split();
        RngStream rng = root.split();
        const TrainResult direct = train(ds, mask, t, rng);
        CHECK(direct.report.predictions == r.runs[0].train.predictions);
    }

    TEST_CASE("outputs land in the output directory") {
        const fs::path dir = fs::temp_directory_path() / "treeeic_experiment_out";
        fs::remove_all(dir);
        RunConfig c = tiny_run();
        c.out_dir = dir.string();
        c.dump_groups = (dir / "groups").string();
        c.dump_ensemble = (dir / "ensemble.csv").string();
        c.checkpoint_dir = (dir / "ckpt").string();
        run(c);
        CHECK(fs::exists(dir / "report.json"));
        CHECK(fs::exists(dir / "predictions_seed1.csv"));
        CHECK(fs::exists(dir / "ckpt" / "seed0_final.bin"));
        CHECK(fs::exists(dir / "ckpt" / "seed1_round1.bin"));
        CHECK_FALSE(fs::is_empty(dir / "groups"));
        const std::string pred = slurp(dir / "predictions.csv");
        CHECK(pred.rfind("sample_id,label\n0,", 0) == 0);
        CHECK(std::count(pred.begin(), pred.end(), '\n') == 91);
        const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
        CHECK(report.at("runs").size() == 2);
        CHECK(run_config_from_json(report.at("config")).seeds == c.seeds);
        CHECK(slurp(dir / "ensemble.csv").size() > 0);
    }

    TEST_CASE("ablation table has four loss rows and three model rows") {
        RunConfig c = tiny_run();
        c.seeds = {0};
        const AblationReport a = ablate(c, load_dataset(c));
        REQUIRE(a.rows.size() == 7);
        CHECK(std::count_if(a.rows.begin(), a.rows.end(), [](const AblationRow& r) { return r.table == "loss"; }) == 4);
        CHECK(a.rows[3].acc.mean == a.rows[6].acc.mean);
        CHECK(a.rows[6].variant == "MPT+MDE");
    }

    TEST_CASE("structure-only tau sweep for six views") {
        RunConfig c;
        c.rho = 1.0;
        c.seeds = {0, 1};
        c.allow_singleton_views = true;
        const auto rows = tau_sweep_structure(c, 400, 6, {1, 2, 3, 4});
        REQUIRE(rows.size() == 4);
        const std::vector<std::size_t> counts{6, 15, 20, 15};
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(rows[j].n_patterns == counts[j]);
            CHECK(std::isnan(rows[j].acc_all));
            if (j > 0) CHECK(rows[j].union_size <= rows[j - 1].union_size);
        }
        c.allow_singleton_views = false;
        CHECK_THROWS_AS(tau_sweep_structure(c, 400, 6, {1}), ContractError);
    }

    TEST_CASE("trained tau sweep reports union and full metrics") {
        RunConfig c = tiny_run();
        c.seeds = {0};
        const auto rows = tau_sweep(c, load_dataset(c), {2, 3}, true);
        REQUIRE(rows.size() == 2);
        for (const auto& r : rows) {
            CHECK(r.acc_all >= 0.0);
            CHECK(r.acc_union >= 0.0);
        }
        CHECK(rows[1].union_size <= rows[0].union_size);
    }
}
