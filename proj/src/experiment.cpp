#include "treeeic/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace treeeic {

using nlohmann::json;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

json synth_to_json(const SynthConfig& s) {
    return json{{"n_samples", s.n_samples},   {"n_views", s.n_views},
                {"n_clusters", s.n_clusters}, {"view_dims", s.view_dims},
                {"separation", s.separation}, {"view_separation", s.view_separation},
                {"noise", s.noise}};
}

SynthConfig synth_from_json(const json& j) {
    SynthConfig s;
    const json known = synth_to_json(s);
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw ContractError("unknown synth config key '" + key + "'");
    }
    if (j.contains("n_samples")) s.n_samples = j.at("n_samples").get<int>();
    if (j.contains("n_views")) s.n_views = j.at("n_views").get<int>();
    if (j.contains("n_clusters")) s.n_clusters = j.at("n_clusters").get<int>();
    if (j.contains("view_dims")) s.view_dims = j.at("view_dims").get<std::vector<int>>();
    if (j.contains("separation")) s.separation = j.at("separation").get<double>();
    if (j.contains("view_separation")) s.view_separation = j.at("view_separation").get<std::vector<double>>();
    if (j.contains("noise")) s.noise = j.at("noise").get<double>();
    return s;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
        out.reset();
    } else {
        out = j.at(key).get<T>();
    }
}

MaskSampling parse_mask_sampling(const std::string& s) {
    if (s == "count") return MaskSampling::count_uniform;
    if (s == "pattern") return MaskSampling::pattern_uniform;
    throw ContractError("unknown mask sampling '" + s + "' (expected count or pattern)");
}

NmiNorm parse_nmi_norm(const std::string& s) {
    if (s == "geometric") return NmiNorm::geometric;
    if (s == "arithmetic") return NmiNorm::arithmetic;
    throw ContractError("unknown NMI normalisation '" + s + "'");
}

json summary_json(const std::optional<MetricSummary>& m) {
    if (!m) return nullptr;
    return json{{"mean", m->mean}, {"std", m->std}};
}

json train_report_json(const TrainReport& r, bool include_timing) {
    json epochs = json::array();
    for (const auto& e : r.epochs) {
        epochs.push_back({{"total", e.total}, {"rec", e.rec}, {"cons", e.cons}, {"disc", e.disc}});
    }
    json rounds = json::array();
    for (const auto& rr : r.rounds) {
        rounds.push_back({{"round", rr.round},
                          {"n_sets", rr.n_sets},
                          {"n_skipped", rr.n_skipped},
                          {"union_size", rr.union_size},
                          {"ensemble_acc", rr.ensemble_acc},
                          {"ensemble_nmi", rr.ensemble_nmi},
                          {"total_acc", rr.total_acc},
                          {"warnings", rr.warnings}});
    }
    json j{{"tau", r.tau},
           {"n_patterns", r.n_patterns},
           {"pretrain_loss", r.pretrain_loss},
           {"epochs", epochs},
           {"rounds", rounds},
           {"view_acc_before", r.view_acc_before}};
    if (include_timing) j["seconds"] = r.seconds;
    return j;
}

std::string csv_row(const Eigen::Ref<const RowVector>& row) {
    std::ostringstream out;
    out.precision(17);
    for (Eigen::Index c = 0; c < row.size(); ++c) out << ',' << row(c);
    return out.str();
}

}  // namespace

void RunConfig::validate() const {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ContractError("rho must lie in [0, 1]");
    if (seeds.empty()) throw ContractError("at least one seed is required");
    if (!synth && views.empty()) throw ContractError("no view files given");
    if (!synth && k < 2) throw ContractError("K must be at least 2");
    if (embed_dim < 1) throw ContractError("embedding width must be positive");
    for (int h : hidden) {
        if (h < 1) throw ContractError("hidden widths must be positive");
    }
    if (pretrain_epochs < 1) throw ContractError("pretrain epochs must be at least 1");
    if (kmeans_restarts < 1) throw ContractError("kmeans restarts must be at least 1");
    if (parallel_seeds < 1) throw ContractError("parallel seeds must be at least 1");
    if (!(lr > 0.0)) throw ContractError("learning rate must be positive");
    parse_scaling(scaling);
    parse_mask_sampling(mask_sampling);
    parse_nmi_norm(nmi_norm);
    LossConfig{lambda1, lambda2, temperature, interval, epochs, batch}.validate();
}

json to_json(const RunConfig& c) {
    return json{{"views", c.views},
                {"labels", optional_json(c.labels)},
                {"header", c.header},
                {"k", c.k},
                {"synth", c.synth ? synth_to_json(*c.synth) : json(nullptr)},
                {"synth_seed", c.synth_seed},
                {"rho", c.rho},
                {"mask_sampling", c.mask_sampling},
                {"mask_file", optional_json(c.mask_file)},
                {"seeds", c.seeds},
                {"scaling", c.scaling},
                {"tau_max", c.tau_max},
                {"tau", optional_json(c.tau)},
                {"allow_singleton_views", c.allow_singleton_views},
                {"interval", c.interval},
                {"lambda1", c.lambda1},
                {"lambda2", c.lambda2},
                {"temperature", c.temperature},
                {"pretrain_epochs", c.pretrain_epochs},
                {"epochs", c.epochs},
                {"batch", c.batch},
                {"lr", c.lr},
                {"embed_dim", c.embed_dim},
                {"hidden", c.hidden},
                {"kmeans_restarts", c.kmeans_restarts},
                {"nmi_norm", c.nmi_norm},
                {"no_mpt", c.no_mpt},
                {"no_mde", c.no_mde},
                {"no_cons", c.no_cons},
                {"no_disc", c.no_disc},
                {"out_dir", c.out_dir},
                {"dump_groups", optional_json(c.dump_groups)},
                {"dump_ensemble", optional_json(c.dump_ensemble)},
                {"checkpoint_dir", optional_json(c.checkpoint_dir)},
                {"parallel_seeds", c.parallel_seeds}};
}

RunConfig run_config_from_json(const json& j) {
    if (!j.is_object()) throw ContractError("config must be a JSON object");
    RunConfig c;
    const json known = to_json(c);
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw ContractError("unknown config key '" + key + "'");
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("views", c.views);
    read_optional(j, "labels", c.labels);
    get("header", c.header);
    get("k", c.k);
    if (j.contains("synth") && !j.at("synth").is_null()) c.synth = synth_from_json(j.at("synth"));
    get("synth_seed", c.synth_seed);
    get("rho", c.rho);
    get("mask_sampling", c.mask_sampling);
    read_optional(j, "mask_file", c.mask_file);
    get("seeds", c.seeds);
    get("scaling", c.scaling);
    get("tau_max", c.tau_max);
    read_optional(j, "tau", c.tau);
    get("allow_singleton_views", c.allow_singleton_views);
    get("interval", c.interval);
    get("lambda1", c.lambda1);
    get("lambda2", c.lambda2);
    get("temperature", c.temperature);
    get("pretrain_epochs", c.pretrain_epochs);
    get("epochs", c.epochs);
    get("batch", c.batch);
    get("lr", c.lr);
    get("embed_dim", c.embed_dim);
    get("hidden", c.hidden);
    get("kmeans_restarts", c.kmeans_restarts);
    get("nmi_norm", c.nmi_norm);
    get("no_mpt", c.no_mpt);
    get("no_mde", c.no_mde);
    get("no_cons", c.no_cons);
    get("no_disc", c.no_disc);
    get("out_dir", c.out_dir);
    read_optional(j, "dump_groups", c.dump_groups);
    read_optional(j, "dump_ensemble", c.dump_ensemble);
    read_optional(j, "checkpoint_dir", c.checkpoint_dir);
    get("parallel_seeds", c.parallel_seeds);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError(path.string() + ": cannot open");
    try {
        return run_config_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

MultiViewDataset load_dataset(const RunConfig& cfg) {
    MultiViewDataset ds;
    if (cfg.synth) {
        RngStream rng(cfg.synth_seed);
        ds = make_synthetic(*cfg.synth, rng);
    } else {
        std::vector<std::filesystem::path> paths(cfg.views.begin(), cfg.views.end());
        std::optional<std::filesystem::path> labels;
        if (cfg.labels) labels = *cfg.labels;
        ds = load_views(paths, labels, cfg.k, cfg.header);
    }
    return normalize_features(ds, parse_scaling(cfg.scaling));
}

TrainConfig make_train_config(const RunConfig& cfg, int n_clusters) {
    TrainConfig t;
    t.n_clusters = n_clusters;
    t.arch.hidden = cfg.hidden;
    t.arch.embed_dim = cfg.embed_dim;
    t.learning_rate = cfg.lr;
    t.pretrain_epochs = cfg.pretrain_epochs;
    t.loss = LossConfig{cfg.no_cons ? 0.0 : cfg.lambda1,
                        cfg.no_disc ? 0.0 : cfg.lambda2,
                        cfg.temperature,
                        cfg.interval,
                        cfg.epochs,
                        cfg.batch};
    t.tau_max = cfg.tau_max;
    t.tau = cfg.tau;
    t.allow_singleton_views = cfg.allow_singleton_views;
    t.use_mpt = !cfg.no_mpt;
    t.weighting = cfg.no_mde ? Weighting::uniform : Weighting::entropy;
    t.group_kmeans.n_init = cfg.kmeans_restarts;
    t.init_kmeans.n_init = cfg.kmeans_restarts;
    return t;
}

MaskMatrix mask_for_seed(const RunConfig& cfg, std::size_t n, std::size_t v, std::uint64_t seed) {
    if (cfg.mask_file) {
        MaskMatrix m = load_mask(*cfg.mask_file);
        if (m.n_samples() != n || m.n_views() != v) {
            throw LoadError(*cfg.mask_file + ": mask shape does not match the dataset");
        }
        return m;
    }
    RngStream root(seed);
    RngStream mask_rng = root.split();
    return simulate_missing(n, v, cfg.rho, mask_rng, parse_mask_sampling(cfg.mask_sampling));
}

MetricSummary summarize(const std::vector<double>& values) {
    MetricSummary s;
    if (values.empty()) return s;
    for (double x : values) s.mean += x;
    s.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double x : values) var += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(var / static_cast<double>(values.size()));
    return s;
}

RunReport run(const RunConfig& cfg, const MultiViewDataset& ds, const RoundHook& observer) {
    const auto start = std::chrono::steady_clock::now();
    cfg.validate();
    ds.validate();
    const int k = cfg.k > 0 ? cfg.k : ds.n_clusters;
    if (ds.labels && k != ds.n_clusters) throw ContractError("K does not match the dataset's label count");
    const TrainConfig tcfg = make_train_config(cfg, k);
    const NmiNorm norm = parse_nmi_norm(cfg.nmi_norm);

    for (const auto& dir : {cfg.dump_groups, cfg.checkpoint_dir}) {
        if (dir) std::filesystem::create_directories(*dir);
    }

    RunReport report;
    report.config = cfg;
    report.runs.resize(cfg.seeds.size());
    std::vector<std::string> ensemble_dumps(cfg.seeds.size());

    auto one_seed = [&](std::size_t idx) {
        const std::uint64_t seed = cfg.seeds[idx];
        const MaskMatrix mask = mask_for_seed(cfg, ds.n_samples(), ds.n_views(), seed);
        RngStream root(seed);
        root.split();  // consumed by the mask
        RngStream train_rng = root.split();

        std::string& dump = ensemble_dumps[idx];
        RoundHook hook = [&](int round, const EnsembleRound& er, const std::vector<ViewModel>& models) {
            const std::string tag = "seed" + std::to_string(seed) + "_round" + std::to_string(round);
            if (cfg.dump_groups) {
                for (const auto& g : er.groups) {
                    if (g.skipped) continue;
                    std::ofstream out(std::filesystem::path(*cfg.dump_groups) /
                                      (tag + "_set" + std::to_string(g.set_index) + ".csv"));
                    for (std::size_t r = 0; r < g.sample_ids.size(); ++r) {
                        const auto row = static_cast<Eigen::Index>(r);
                        out << g.sample_ids[r] << csv_row(g.soft.row(row)) << csv_row(g.sharpened.row(row)) << '\n';
                    }
                }
            }
            if (cfg.dump_ensemble) {
                std::ostringstream out;
                for (std::size_t r = 0; r < er.teacher.sample_ids.size(); ++r) {
                    out << seed << ',' << round << ',' << er.teacher.sample_ids[r]
                        << csv_row(er.teacher.probs.row(static_cast<Eigen::Index>(r))) << '\n';
                }
                dump += out.str();
            }
            if (cfg.checkpoint_dir) {
                save_checkpoint(std::filesystem::path(*cfg.checkpoint_dir) / (tag + ".bin"), models);
            }
            if (observer) observer(round, er, models);
        };

        TrainResult tr = train(ds, mask, tcfg, train_rng, hook);
        if (cfg.checkpoint_dir) {
            save_checkpoint(std::filesystem::path(*cfg.checkpoint_dir) / ("seed" + std::to_string(seed) + "_final.bin"),
                            tr.models);
        }
        SeedRun& sr = report.runs[idx];
        sr.seed = seed;
        if (ds.labels) sr.eval = evaluate(tr.report.predictions, *ds.labels, norm);
        sr.train = std::move(tr.report);
    };

    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.parallel_seeds), cfg.seeds.size());
    if (n_workers <= 1) {
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) one_seed(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(cfg.seeds.size());
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < n_workers; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
                    try {
                        one_seed(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : workers) t.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    if (cfg.dump_ensemble) {
        std::ofstream out(*cfg.dump_ensemble);
        for (const auto& d : ensemble_dumps) out << d;
    }

    if (ds.labels) {
        std::vector<double> acc, nmi_v, ari_v;
        for (const auto& r : report.runs) {
            acc.push_back(r.eval->acc);
            nmi_v.push_back(r.eval->nmi);
            ari_v.push_back(r.eval->ari);
        }
        report.acc = summarize(acc);
        report.nmi = summarize(nmi_v);
        report.ari = summarize(ari_v);
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!cfg.out_dir.empty()) write_run_outputs(report, cfg.out_dir);
    return report;
}

RunReport run(const RunConfig& cfg) {
    cfg.validate();
    return run(cfg, load_dataset(cfg));
}

json to_json(const RunReport& report, bool include_timing) {
    json runs = json::array();
    for (const auto& r : report.runs) {
        json e = nullptr;
        if (r.eval) e = json{{"acc", r.eval->acc}, {"nmi", r.eval->nmi}, {"ari", r.eval->ari}};
        runs.push_back({{"seed", r.seed}, {"eval", e}, {"train", train_report_json(r.train, include_timing)}});
    }
    json j{{"config", to_json(report.config)},
           {"runs", runs},
           {"acc", summary_json(report.acc)},
           {"nmi", summary_json(report.nmi)},
           {"ari", summary_json(report.ari)}};
    if (include_timing) j["seconds"] = report.seconds;
    return j;
}

void write_predictions(const std::filesystem::path& path, const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) throw LoadError(path.string() + ": cannot open for writing");
    out << "sample_id,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

void write_run_outputs(const RunReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "report.json");
        out << to_json(report).dump(2) << '\n';
    }
    if (report.runs.empty()) return;
    write_predictions(dir / "predictions.csv", report.runs.front().train.predictions);
    if (report.runs.size() > 1) {
        for (const auto& r : report.runs) {
            write_predictions(dir / ("predictions_seed" + std::to_string(r.seed) + ".csv"), r.train.predictions);
        }
    }
}

AblationReport ablate(const RunConfig& cfg, const MultiViewDataset& ds, const RoundHook& observer) {
    RunConfig base = cfg;
    base.no_mpt = base.no_mde = base.no_cons = base.no_disc = false;
    base.out_dir.clear();
    base.dump_groups.reset();
    base.dump_ensemble.reset();
    base.checkpoint_dir.reset();

    auto row = [](std::string table, std::string variant, const RunReport& r) {
        return AblationRow{std::move(table), std::move(variant), r.acc.value_or(MetricSummary{kNaN, kNaN}),
                           r.nmi.value_or(MetricSummary{kNaN, kNaN}), r.ari.value_or(MetricSummary{kNaN, kNaN})};
    };
    auto variant = [&](bool no_cons, bool no_disc, bool no_mpt, bool no_mde) {
        RunConfig c = base;
        c.no_cons = no_cons;
        c.no_disc = no_disc;
        c.no_mpt = no_mpt;
        c.no_mde = no_mde;
        return run(c, ds, observer);
    };

    const RunReport full = variant(false, false, false, false);
    AblationReport out;
    out.rows.push_back(row("loss", "none", variant(true, true, false, false)));
    out.rows.push_back(row("loss", "cons", variant(false, true, false, false)));
    out.rows.push_back(row("loss", "disc", variant(true, false, false, false)));
    out.rows.push_back(row("loss", "cons+disc", full));
    out.rows.push_back(row("model", "without MPT", variant(false, false, true, false)));
    out.rows.push_back(row("model", "without MDE", variant(false, false, false, true)));
    out.rows.push_back(row("model", "MPT+MDE", full));
    return out;
}

json to_json(const AblationReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"table", r.table},
                        {"variant", r.variant},
                        {"acc", {{"mean", r.acc.mean}, {"std", r.acc.std}}},
                        {"nmi", {{"mean", r.nmi.mean}, {"std", r.nmi.std}}},
                        {"ari", {{"mean", r.ari.mean}, {"std", r.ari.std}}}});
    }
    return json{{"rows", rows}};
}

namespace {

void check_sweep_tau(const RunConfig& cfg, std::size_t v, int tau) {
    if (tau < 1 || tau > static_cast<int>(v)) {
        throw ContractError("tau " + std::to_string(tau) + " outside 1.." + std::to_string(v));
    }
    if (tau == 1 && !cfg.allow_singleton_views) {
        throw ContractError("tau = 1 needs --allow-singleton-views");
    }
}

TauRow structure_row(const RunConfig& cfg, std::size_t n, std::size_t v, int tau) {
    TauRow row;
    row.tau = tau;
    const PatternSet ps = enumerate_patterns(static_cast<int>(v), tau);
    row.n_patterns = ps.patterns.size();
    for (std::uint64_t seed : cfg.seeds) {
        const MaskMatrix mask = mask_for_seed(cfg, n, v, seed);
        const auto sets = group_samples(mask, ps);
        double total = 0.0;
        for (const auto& s : sets) total += static_cast<double>(s.sample_ids.size());
        row.mean_set_size += total / static_cast<double>(sets.size());
        row.union_size += static_cast<double>(union_samples(sets).size());
    }
    row.mean_set_size /= static_cast<double>(cfg.seeds.size());
    row.union_size /= static_cast<double>(cfg.seeds.size());
    row.acc_union = row.acc_all = row.nmi_union = row.nmi_all = row.ari_union = row.ari_all = kNaN;
    return row;
}

}  // namespace

std::vector<TauRow> tau_sweep_structure(const RunConfig& cfg, std::size_t n, std::size_t v,
                                        const std::vector<int>& taus) {
    if (cfg.seeds.empty()) throw ContractError("at least one seed is required");
    std::vector<TauRow> rows;
    for (int tau : taus) {
        check_sweep_tau(cfg, v, tau);
        rows.push_back(structure_row(cfg, n, v, tau));
    }
    return rows;
}

std::vector<TauRow> tau_sweep(const RunConfig& cfg, const MultiViewDataset& ds, const std::vector<int>& taus,
                              bool train_models) {
    cfg.validate();
    std::vector<TauRow> rows = tau_sweep_structure(cfg, ds.n_samples(), ds.n_views(), taus);
    if (!train_models || !ds.labels) return rows;
    const NmiNorm norm = parse_nmi_norm(cfg.nmi_norm);
    const int k = cfg.k > 0 ? cfg.k : ds.n_clusters;

    for (auto& row : rows) {
        RunConfig c = cfg;
        c.tau = row.tau;
        const TrainConfig tcfg = make_train_config(c, k);
        std::vector<double> acc_u, acc_n, nmi_u, nmi_n, ari_u, ari_n;
        for (std::uint64_t seed : cfg.seeds) {
            const MaskMatrix mask = mask_for_seed(c, ds.n_samples(), ds.n_views(), seed);
            RngStream root(seed);
            root.split();
            RngStream train_rng = root.split();
            EnsembleDecision last;
            TrainResult tr = train(ds, mask, tcfg, train_rng,
                                   [&](int, const EnsembleRound& er, const std::vector<ViewModel>&) {
                                       last = er.teacher;
                                   });
            std::vector<int> pred, truth;
            for (std::size_t r = 0; r < last.sample_ids.size(); ++r) {
                const auto row_i = static_cast<Eigen::Index>(r);
                Eigen::Index best = 0;
                for (Eigen::Index kk = 1; kk < last.probs.cols(); ++kk) {
                    if (last.probs(row_i, kk) > last.probs(row_i, best)) best = kk;
                }
                pred.push_back(static_cast<int>(best));
                truth.push_back((*ds.labels)[last.sample_ids[r]]);
            }
            const EvalResult on_union = evaluate(pred, truth, norm);
            const EvalResult on_all = evaluate(tr.report.predictions, *ds.labels, norm);
            acc_u.push_back(on_union.acc);
            nmi_u.push_back(on_union.nmi);
            ari_u.push_back(on_union.ari);
            acc_n.push_back(on_all.acc);
            nmi_n.push_back(on_all.nmi);
            ari_n.push_back(on_all.ari);
        }
        row.acc_union = summarize(acc_u).mean;
        row.acc_all = summarize(acc_n).mean;
        row.nmi_union = summarize(nmi_u).mean;
        row.nmi_all = summarize(nmi_n).mean;
        row.ari_union = summarize(ari_u).mean;
        row.ari_all = summarize(ari_n).mean;
    }
    return rows;
}

json to_json(const std::vector<TauRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back({{"tau", r.tau},
                       {"n_patterns", r.n_patterns},
                       {"mean_set_size", r.mean_set_size},
                       {"union_size", r.union_size},
                       {"acc_union", r.acc_union},
                       {"acc_all", r.acc_all},
                       {"nmi_union", r.nmi_union},
                       {"nmi_all", r.nmi_all},
                       {"ari_union", r.ari_union},
                       {"ari_all", r.ari_all}});
    }
    return out;
}

}  // namespace treeeic
