// treeic: command-line front end for training, ablations, tau sweeps and evaluation.

#include <cstring>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "treeeic/experiment.hpp"
#include "treeeic/mpt.hpp"

using namespace treeeic;
using nlohmann::json;

namespace {

struct SynthFlags {
    bool enabled = false;
    SynthConfig cfg;
};

void add_run_options(CLI::App& cmd, RunConfig& c, SynthFlags& synth, std::optional<int>& tau) {
    cmd.add_option("--config", "JSON config; explicit flags override its values");
    cmd.add_option("--views", c.views, "comma-separated per-view CSV files")->delimiter(',');
    cmd.add_option("--labels", c.labels, "label CSV, one integer per row");
    cmd.add_flag("--header", c.header, "skip one header line in every CSV");
    cmd.add_option("--k", c.k, "number of clusters");
    cmd.add_flag("--synth", synth.enabled, "use the built-in synthetic generator instead of --views");
    cmd.add_option("--synth-n", synth.cfg.n_samples, "synthetic sample count");
    cmd.add_option("--synth-views", synth.cfg.n_views, "synthetic view count");
    cmd.add_option("--synth-k", synth.cfg.n_clusters, "synthetic cluster count");
    cmd.add_option("--synth-sep", synth.cfg.separation, "distance between class means in noise units");
    cmd.add_option("--synth-seed", c.synth_seed, "seed of the synthetic generator");
    cmd.add_option("--rho", c.rho, "fraction of samples with missing views");
    cmd.add_option("--mask-sampling", c.mask_sampling, "count or pattern");
    cmd.add_option("--mask-file", c.mask_file, "use a fixed 0/1 mask CSV instead of simulating one");
    cmd.add_option("--seeds", c.seeds, "comma-separated seeds")->delimiter(',');
    cmd.add_option("--scaling", c.scaling, "none, minmax or zscore");
    cmd.add_option("--tau-max", c.tau_max, "upper bound of the adaptive tau (0 = min(V, 6))");
    cmd.add_option("--tau", tau, "fixed tau, overriding the adaptive rule");
    cmd.add_flag("--allow-singleton-views", c.allow_singleton_views, "permit tau = 1");
    cmd.add_option("--interval", c.interval, "epochs between ensemble rounds");
    cmd.add_option("--lambda1", c.lambda1, "weight of the consistency loss");
    cmd.add_option("--lambda2", c.lambda2, "weight of the discrimination loss");
    cmd.add_option("--temp", c.temperature, "InfoNCE temperature");
    cmd.add_option("--pretrain-epochs", c.pretrain_epochs);
    cmd.add_option("--epochs", c.epochs, "distillation epochs");
    cmd.add_option("--batch", c.batch);
    cmd.add_option("--lr", c.lr);
    cmd.add_option("--embed-dim", c.embed_dim);
    cmd.add_option("--hidden", c.hidden, "comma-separated encoder widths")->delimiter(',');
    cmd.add_option("--kmeans-restarts", c.kmeans_restarts);
    cmd.add_option("--nmi-norm", c.nmi_norm, "geometric or arithmetic");
    cmd.add_flag("--no-mpt", c.no_mpt, "per-view decisions instead of pattern groups");
    cmd.add_flag("--no-mde", c.no_mde, "uniform ensemble weights");
    cmd.add_flag("--no-cons", c.no_cons, "drop the consistency loss");
    cmd.add_flag("--no-disc", c.no_disc, "drop the discrimination loss");
    cmd.add_option("--dump-groups", c.dump_groups, "directory for per-set decision CSVs");
    cmd.add_option("--dump-ensemble", c.dump_ensemble, "CSV file for ensemble decisions per round");
    cmd.add_option("--checkpoint-dir", c.checkpoint_dir, "directory for per-round model checkpoints");
    cmd.add_option("--parallel-seeds", c.parallel_seeds, "seeds trained concurrently");
    cmd.add_option("--out", c.out_dir, "output directory");
}

// Settle config-file, synthetic and tau flags into the final RunConfig.
void finish_config(RunConfig& c, const SynthFlags& synth, const std::optional<int>& tau) {
    if (synth.enabled) c.synth = synth.cfg;
    if (tau) c.tau = tau;
    if (c.synth && c.k == 0) c.k = c.synth->n_clusters;
}

std::optional<std::string> config_path(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
        if (arg.rfind("--config=", 0) == 0) return arg.substr(std::strlen("--config="));
    }
    return std::nullopt;
}

void write_json(const json& j, const std::string& out_dir, const char* name) {
    if (out_dir.empty()) {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::filesystem::create_directories(out_dir);
    std::ofstream(std::filesystem::path(out_dir) / name) << j.dump(2) << '\n';
}

std::vector<int> read_predictions(const std::string& path) {
    const Matrix m = read_csv_matrix(path, true);
    if (m.cols() != 2) throw LoadError(path + ": expected two columns (sample_id,label)");
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = static_cast<int>(m(r, 1));
    return out;
}

int fail(const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", {{"type", kind}, {"message", message}}}}.dump() << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Imputation-free incomplete multi-view clustering"};
    app.require_subcommand(1);

    RunConfig cfg;
    SynthFlags synth;
    std::optional<int> tau;
    try {
        if (auto path = config_path(argc, argv)) {
            cfg = load_run_config(*path);
            if (cfg.synth) {
                synth.enabled = true;
                synth.cfg = *cfg.synth;
            }
            tau = cfg.tau;
        }
    } catch (const std::exception& e) {
        return fail("config", e.what());
    }

    auto* run_cmd = app.add_subcommand("run", "train and evaluate on every seed");
    add_run_options(*run_cmd, cfg, synth, tau);

    auto* ablate_cmd = app.add_subcommand("ablate", "loss and model ablations on shared seeds");
    add_run_options(*ablate_cmd, cfg, synth, tau);

    auto* sweep_cmd = app.add_subcommand("tau-sweep", "grouping statistics and accuracy per tau");
    add_run_options(*sweep_cmd, cfg, synth, tau);
    std::vector<int> taus;
    bool structure_only = false;
    std::size_t shape_n = 0;
    std::size_t shape_v = 0;
    sweep_cmd->add_option("--taus", taus, "comma-separated tau values")->delimiter(',')->required();
    sweep_cmd->add_flag("--structure-only", structure_only, "skip training; report grouping statistics only");
    sweep_cmd->add_option("--n-samples", shape_n, "sample count for a structure-only sweep without data");
    sweep_cmd->add_option("--n-views", shape_v, "view count for a structure-only sweep without data");

    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset as CSV");
    SynthConfig synth_out;
    std::uint64_t synth_seed = 0;
    std::string synth_dir;
    synth_cmd->add_option("--n", synth_out.n_samples);
    synth_cmd->add_option("--views", synth_out.n_views);
    synth_cmd->add_option("--k", synth_out.n_clusters);
    synth_cmd->add_option("--dims", synth_out.view_dims, "comma-separated per-view widths")->delimiter(',');
    synth_cmd->add_option("--sep", synth_out.separation);
    synth_cmd->add_option("--noise", synth_out.noise);
    synth_cmd->add_option("--seed", synth_seed);
    synth_cmd->add_option("--out", synth_dir)->required();

    auto* patterns_cmd = app.add_subcommand("patterns", "list the missing patterns kept for a tau");
    int pattern_views = 0;
    int pattern_tau = 0;
    patterns_cmd->add_option("--views", pattern_views)->required();
    patterns_cmd->add_option("--tau", pattern_tau)->required();

    auto* eval_cmd = app.add_subcommand("eval", "score a predictions file against labels");
    std::string pred_path;
    std::string label_path;
    std::string eval_norm = "geometric";
    eval_cmd->add_option("--pred", pred_path)->required();
    eval_cmd->add_option("--labels", label_path)->required();
    eval_cmd->add_option("--nmi-norm", eval_norm, "geometric or arithmetic");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*run_cmd) {
            finish_config(cfg, synth, tau);
            const RunReport report = run(cfg);
            if (cfg.out_dir.empty()) {
                std::cout << to_json(report).dump(2) << '\n';
            } else if (report.acc) {
                std::cout << "ACC " << report.acc->mean << " +- " << report.acc->std << "  NMI " << report.nmi->mean
                          << " +- " << report.nmi->std << "  ARI " << report.ari->mean << " +- " << report.ari->std
                          << '\n';
            }
        } else if (*ablate_cmd) {
            finish_config(cfg, synth, tau);
            cfg.validate();
            write_json(to_json(ablate(cfg, load_dataset(cfg))), cfg.out_dir, "ablation.json");
        } else if (*sweep_cmd) {
            finish_config(cfg, synth, tau);
            std::vector<TauRow> rows;
            if (structure_only && !cfg.synth && cfg.views.empty()) {
                if (shape_n == 0 || shape_v == 0) {
                    throw ContractError("a structure-only sweep without data needs --n-samples and --n-views");
                }
                rows = tau_sweep_structure(cfg, shape_n, shape_v, taus);
            } else {
                cfg.validate();
                const MultiViewDataset ds = load_dataset(cfg);
                rows = tau_sweep(cfg, ds, taus, !structure_only);
            }
            write_json(to_json(rows), cfg.out_dir, "tau_sweep.json");
        } else if (*synth_cmd) {
            RngStream rng(synth_seed);
            const MultiViewDataset ds = make_synthetic(synth_out, rng);
            std::filesystem::create_directories(synth_dir);
            const std::filesystem::path dir(synth_dir);
            for (std::size_t v = 0; v < ds.views.size(); ++v) {
                write_csv_matrix(dir / ("view" + std::to_string(v) + ".csv"), ds.views[v]);
            }
            std::ofstream labels(dir / "labels.csv");
            for (int y : *ds.labels) labels << y << '\n';
        } else if (*patterns_cmd) {
            const PatternSet ps = enumerate_patterns(pattern_views, pattern_tau);
            for (const auto& p : ps.patterns) std::cout << p.str() << '\n';
            std::cout << "count " << ps.patterns.size() << '\n';
        } else if (*eval_cmd) {
            const std::vector<int> pred = read_predictions(pred_path);
            const std::vector<int> truth = read_labels(label_path);
            const NmiNorm norm = eval_norm == "arithmetic" ? NmiNorm::arithmetic : NmiNorm::geometric;
            if (eval_norm != "arithmetic" && eval_norm != "geometric") {
                throw ContractError("unknown NMI normalisation '" + eval_norm + "'");
            }
            const EvalResult r = evaluate(pred, truth, norm);
            std::cout << json{{"acc", r.acc}, {"nmi", r.nmi}, {"ari", r.ari}}.dump(2) << '\n';
        }
    } catch (const ContractError& e) {
        return fail("contract", e.what());
    } catch (const LoadError& e) {
        return fail("load", e.what());
    } catch (const PipelineError& e) {
        return fail("pipeline", e.what());
    } catch (const std::exception& e) {
        return fail("runtime", e.what());
    }
    return 0;
}
