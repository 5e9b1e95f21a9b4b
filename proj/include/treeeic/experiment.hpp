#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "treeeic/distill.hpp"
#include "treeeic/metrics.hpp"
#include "treeeic/synth.hpp"

/**
 * @file experiment.hpp
 *
 * @brief Seeded experiment runner: missing-view simulation, training, evaluation, ablations and
 * tau sweeps, with every hyperparameter echoed into the JSON report.
 */
namespace treeeic {

struct RunConfig {
    std::vector<std::string> views;
    std::optional<std::string> labels;
    bool header = false;
    int k = 0;
    /// generate data instead of reading `views`
    std::optional<SynthConfig> synth;
    std::uint64_t synth_seed = 0;

    double rho = 0.5;
    std::string mask_sampling = "count";
    std::optional<std::string> mask_file;
    std::vector<std::uint64_t> seeds = {0};
    std::string scaling = "minmax";

    int tau_max = 0;
    std::optional<int> tau;
    bool allow_singleton_views = false;
    int interval = 100;
    double lambda1 = 0.01;
    double lambda2 = 0.2;
    double temperature = 1.0;
    int pretrain_epochs = 200;
    int epochs = 700;
    int batch = 256;
    double lr = 1e-4;
    int embed_dim = 128;
    std::vector<int> hidden = {500, 500, 2000};
    int kmeans_restarts = 10;
    std::string nmi_norm = "geometric";

    bool no_mpt = false;
    bool no_mde = false;
    bool no_cons = false;
    bool no_disc = false;

    std::string out_dir;
    std::optional<std::string> dump_groups;
    std::optional<std::string> dump_ensemble;
    std::optional<std::string> checkpoint_dir;
    int parallel_seeds = 1;

    void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// The dataset a config describes, after feature scaling.
MultiViewDataset load_dataset(const RunConfig& cfg);

/// Training settings for a config with ablation flags applied.
TrainConfig make_train_config(const RunConfig& cfg, int n_clusters);

/// The mask used for `seed`. Depends only on the seed, N, V, rho and the sampling mode.
MaskMatrix mask_for_seed(const RunConfig& cfg, std::size_t n, std::size_t v, std::uint64_t seed);

struct SeedRun {
    std::uint64_t seed = 0;
    std::optional<EvalResult> eval;
    TrainReport train;
};

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;
};

struct RunReport {
    RunConfig config;
    std::vector<SeedRun> runs;
    std::optional<MetricSummary> acc;
    std::optional<MetricSummary> nmi;
    std::optional<MetricSummary> ari;
    double seconds = 0.0;
};

/// Population mean and standard deviation.
MetricSummary summarize(const std::vector<double>& values);

/**
 * One training run per seed on `ds`; writes outputs when cfg.out_dir is set.
 * `observer` sees every ensemble round of every seed; with parallel seeds it is called concurrently.
 */
RunReport run(const RunConfig& cfg, const MultiViewDataset& ds, const RoundHook& observer = {});
RunReport run(const RunConfig& cfg);

/// `include_timing = false` drops wall-clock fields so reruns compare equal.
nlohmann::json to_json(const RunReport& report, bool include_timing = true);
void write_predictions(const std::filesystem::path& path, const std::vector<int>& labels);
void write_run_outputs(const RunReport& report, const std::filesystem::path& dir);

struct AblationRow {
    std::string table;  // "loss" or "model"
    std::string variant;
    MetricSummary acc;
    MetricSummary nmi;
    MetricSummary ari;
};

struct AblationReport {
    std::vector<AblationRow> rows;
};

/// Loss variants {none, cons, disc, cons+disc} and model variants {without MPT, without MDE, MPT+MDE}
/// on shared seeds; the full model is trained once and reported in both tables.
AblationReport ablate(const RunConfig& cfg, const MultiViewDataset& ds, const RoundHook& observer = {});
nlohmann::json to_json(const AblationReport& report);

struct TauRow {
    int tau = 0;
    std::size_t n_patterns = 0;
    double mean_set_size = 0.0;
    double union_size = 0.0;
    /// NaN when the sweep only inspects grouping structure or labels are absent
    double acc_union = 0.0;
    double acc_all = 0.0;
    double nmi_union = 0.0;
    double nmi_all = 0.0;
    double ari_union = 0.0;
    double ari_all = 0.0;
};

/**
 * For each tau: pattern count, mean decision-set size and union size on each seed's mask,
 * averaged over seeds. With `train_models`, also runs the full procedure at that tau and reports
 * the final teacher's metrics on the union set and the final predictions' metrics on all samples.
 */
std::vector<TauRow> tau_sweep(const RunConfig& cfg, const MultiViewDataset& ds, const std::vector<int>& taus,
                              bool train_models);
/// Structure-only sweep on a dataset shape, without loading features.
std::vector<TauRow> tau_sweep_structure(const RunConfig& cfg, std::size_t n, std::size_t v,
                                        const std::vector<int>& taus);
nlohmann::json to_json(const std::vector<TauRow>& rows);

}  // namespace treeeic
