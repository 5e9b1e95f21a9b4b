#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treeeic/dataset.hpp"
#include "treeeic/ensemble.hpp"
#include "treeeic/groupwise.hpp"
#include "treeeic/mpt.hpp"
#include "treeeic/nn.hpp"

/**
 * @file distill.hpp
 *
 * @brief Ensemble-to-individual distillation and the end-to-end training procedure.
 *
 * Training runs in ensemble rounds. Each round groups samples by missing pattern, clusters every
 * group on the current embeddings, fuses the aligned group decisions into a teacher P, and then
 * trains every view model for `ensemble_interval` epochs against P (reconstruction + consistency +
 * cluster-level InfoNCE). P stays fixed inside a round.
 */
namespace treeeic {

struct LossConfig {
    double lambda1 = 0.01;
    double lambda2 = 0.2;
    double temperature = 1.0;
    int ensemble_interval = 100;
    int e2i_epochs = 700;
    int batch_size = 256;

    void validate() const;
};

enum class Weighting { entropy, uniform };

struct TrainConfig {
    int n_clusters = 0;
    Architecture arch;
    double learning_rate = 1e-4;
    int pretrain_epochs = 200;
    LossConfig loss;
    /// 0 picks min(V, 6)
    int tau_max = 0;
    std::optional<int> tau;
    bool allow_singleton_views = false;
    /// Missing rate fed to the tau rule; defaults to the mask's incomplete fraction.
    std::optional<double> rho;
    /// false: every view model's own sharpened assignments form one decision set per view
    bool use_mpt = true;
    Weighting weighting = Weighting::entropy;
    double entropy_eps = 1e-12;
    KMeansOptions group_kmeans{100, 1e-6, 10};
    KMeansOptions init_kmeans{100, 1e-6, 10};
};

/// Everything produced by one ensemble round.
struct EnsembleRound {
    std::vector<DecisionSet> sets;
    std::vector<GroupDecision> groups;
    DecisionTensor tensor;
    WeightTensor weights;
    EnsembleDecision teacher;
    std::size_t n_skipped = 0;
    std::vector<std::string> warnings;
};

struct EpochLoss {
    double total = 0.0;
    double rec = 0.0;
    double cons = 0.0;
    double disc = 0.0;
};

struct RoundReport {
    int round = 0;
    std::size_t n_sets = 0;
    std::size_t n_skipped = 0;
    std::size_t union_size = 0;
    /// teacher argmax on the union set; NaN without labels
    double ensemble_acc = 0.0;
    double ensemble_nmi = 0.0;
    /// view-model prediction on all samples at the start of the round; NaN without labels
    double total_acc = 0.0;
    std::vector<std::string> warnings;
};

struct TrainReport {
    int tau = 0;
    std::size_t n_patterns = 0;
    std::vector<double> pretrain_loss;
    std::vector<EpochLoss> epochs;
    std::vector<RoundReport> rounds;
    /// per-view accuracy on observed samples after centroid initialisation; empty without labels
    std::vector<double> view_acc_before;
    std::vector<int> predictions;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<ViewModel> models;
    TrainReport report;
};

/// Called after the teacher of each round is built and before that round's training epochs.
using RoundHook = std::function<void(int round, const EnsembleRound&, const std::vector<ViewModel>&)>;

/// Soft assignments of every view as N x K matrices with zero rows where the view is missing.
std::vector<Matrix> view_assignments(const std::vector<ViewModel>& models, const MultiViewDataset& ds,
                                     const MaskMatrix& mask);

/// Sum over views of ||p_i - q_i^v||^2 for samples in the teacher's union that observe view v.
double consistency_loss(const EnsembleDecision& p, const std::vector<Matrix>& q, const MaskMatrix& mask);

/// Cluster-level InfoNCE for view v over teacher samples observing v (needs at least two).
double infonce_loss(const EnsembleDecision& p, const Matrix& q_view, const MaskMatrix& mask, std::size_t v,
                    double temperature, Diagnostics* diag = nullptr);

double discrimination_loss(const EnsembleDecision& p, const std::vector<Matrix>& q, const MaskMatrix& mask,
                           double temperature, Diagnostics* diag = nullptr);

/**
 * rec + lambda1 * cons + lambda2 * disc over the batch samples (ids into the dataset), each
 * view using the batch members it observes. Batch members must belong to the teacher's union.
 */
EpochLoss total_loss(const std::vector<ViewModel>& models, const MultiViewDataset& ds, const MaskMatrix& mask,
                     const EnsembleDecision& p, const LossConfig& cfg, std::span<const std::size_t> batch);

/// argmax_k of the sum of observed views' assignments; ties go to the lowest cluster.
std::vector<int> predict_labels(const std::vector<ViewModel>& models, const MultiViewDataset& ds,
                                const MaskMatrix& mask);

/// The tau used for a run: the override if set, otherwise the adaptive rule.
/**
 * Relabel every view model's clusters to agree with the teacher's columns: Hungarian matching on
 * the soft co-assignment sum_i p_{i,a} q^v_{i,b} over teacher samples observed in view v.
 * Returns one permutation per view (empty when the view sees no teacher sample).
 */
std::vector<std::vector<int>> align_views_to_teacher(std::vector<ViewModel>& models, const MultiViewDataset& ds,
                                                     const MaskMatrix& mask, const EnsembleDecision& teacher);

int resolve_tau(const TrainConfig& cfg, const MaskMatrix& mask);

/// Group, cluster, align, weight and fuse on the models' current embeddings.
EnsembleRound build_ensemble(const std::vector<ViewModel>& models, const MultiViewDataset& ds, const MaskMatrix& mask,
                             const PatternSet& patterns, const TrainConfig& cfg, RngStream& rng);

/// Fresh view models, pretrained and with K-means centroids.
std::vector<ViewModel> initialise_models(const MultiViewDataset& ds, const MaskMatrix& mask, const TrainConfig& cfg,
                                         RngStream& rng, std::vector<double>* pretrain_trace = nullptr);

/// The full procedure: initialise, then ensemble rounds of distillation, then predict.
TrainResult train(const MultiViewDataset& ds, const MaskMatrix& mask, const TrainConfig& cfg, RngStream& rng,
                  const RoundHook& hook = {});

}  // namespace treeeic
