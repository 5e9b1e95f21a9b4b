#include "treeeic/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "treeeic/cluster_losses.hpp"
#include "treeeic/metrics.hpp"

namespace treeeic {

namespace {

std::unordered_map<std::size_t, Eigen::Index> index_rows(const std::vector<std::size_t>& ids) {
    std::unordered_map<std::size_t, Eigen::Index> rows;
    rows.reserve(ids.size());
    for (std::size_t r = 0; r < ids.size(); ++r) rows.emplace(ids[r], static_cast<Eigen::Index>(r));
    return rows;
}

int argmax_row(const Matrix& m, Eigen::Index i) {
    int best = 0;
    for (Eigen::Index k = 1; k < m.cols(); ++k) {
        if (m(i, k) > m(i, best)) best = static_cast<int>(k);
    }
    return best;
}

// Rows of the teacher's samples that observe view v, with matching teacher rows.
struct ViewRows {
    std::vector<std::size_t> sample_ids;
    Matrix teacher;
};

ViewRows select_rows(const EnsembleDecision& p, std::span<const std::size_t> candidates,
                     const std::unordered_map<std::size_t, Eigen::Index>& teacher_row, const MaskMatrix& mask,
                     std::size_t v) {
    ViewRows out;
    for (std::size_t id : candidates) {
        if (mask.available(id, v)) out.sample_ids.push_back(id);
    }
    out.teacher.resize(static_cast<Eigen::Index>(out.sample_ids.size()), p.probs.cols());
    for (std::size_t r = 0; r < out.sample_ids.size(); ++r) {
        const auto it = teacher_row.find(out.sample_ids[r]);
        if (it == teacher_row.end()) {
            throw ContractError("sample " + std::to_string(out.sample_ids[r]) + " is not covered by the ensemble");
        }
        out.teacher.row(static_cast<Eigen::Index>(r)) = p.probs.row(it->second);
    }
    return out;
}

}  // namespace

void LossConfig::validate() const {
    if (lambda1 < 0.0 || lambda2 < 0.0) throw ContractError("loss weights must be non-negative");
    if (!(temperature > 0.0)) throw ContractError("temperature must be positive");
    if (ensemble_interval < 1) throw ContractError("ensemble interval must be at least 1");
    if (e2i_epochs < 1) throw ContractError("E2I epochs must be at least 1");
    if (batch_size < 2) throw ContractError("batch size must be at least 2");
}

std::vector<Matrix> view_assignments(const std::vector<ViewModel>& models, const MultiViewDataset& ds,
                                     const MaskMatrix& mask) {
    std::vector<Matrix> q;
    for (std::size_t v = 0; v < models.size(); ++v) {
        q.push_back(assign_observed(models[v], ds.views[v], mask, v));
    }
    return q;
}

double consistency_loss(const EnsembleDecision& p, const std::vector<Matrix>& q, const MaskMatrix& mask) {
    double total = 0.0;
    for (std::size_t r = 0; r < p.sample_ids.size(); ++r) {
        const std::size_t i = p.sample_ids[r];
        for (std::size_t v = 0; v < q.size(); ++v) {
            if (!mask.available(i, v)) continue;
            total += (p.probs.row(static_cast<Eigen::Index>(r)) - q[v].row(static_cast<Eigen::Index>(i))).squaredNorm();
        }
    }
    return total;
}

double infonce_loss(const EnsembleDecision& p, const Matrix& q_view, const MaskMatrix& mask, std::size_t v,
                    double temperature, Diagnostics* diag) {
    const auto rows = index_rows(p.sample_ids);
    const ViewRows sel = select_rows(p, p.sample_ids, rows, mask, v);
    if (sel.sample_ids.size() < 2) {
        throw ContractError("infonce_loss: view " + std::to_string(v) + " has fewer than two teacher samples");
    }
    return infonce_columns(sel.teacher, take_rows(q_view, sel.sample_ids), temperature, nullptr, diag);
}

double discrimination_loss(const EnsembleDecision& p, const std::vector<Matrix>& q, const MaskMatrix& mask,
                           double temperature, Diagnostics* diag) {
    const auto rows = index_rows(p.sample_ids);
    double total = 0.0;
    for (std::size_t v = 0; v < q.size(); ++v) {
        const ViewRows sel = select_rows(p, p.sample_ids, rows, mask, v);
        if (sel.sample_ids.size() < 2) continue;
        total += infonce_columns(sel.teacher, take_rows(q[v], sel.sample_ids), temperature, nullptr, diag);
    }
    return total;
}

EpochLoss total_loss(const std::vector<ViewModel>& models, const MultiViewDataset& ds, const MaskMatrix& mask,
                     const EnsembleDecision& p, const LossConfig& cfg, std::span<const std::size_t> batch) {
    const auto rows = index_rows(p.sample_ids);
    EpochLoss out;
    for (std::size_t v = 0; v < models.size(); ++v) {
        const ViewRows sel = select_rows(p, batch, rows, mask, v);
        if (sel.sample_ids.empty()) continue;
        const ViewLoss l = backward(models[v], take_rows(ds.views[v], sel.sample_ids), &sel.teacher, LossSpec{},
                                    nullptr);
        out.rec += l.rec;
        out.cons += l.cons;
        out.disc += l.disc;
    }
    out.total = out.rec + cfg.lambda1 * out.cons + cfg.lambda2 * out.disc;
    return out;
}

std::vector<int> predict_labels(const std::vector<ViewModel>& models, const MultiViewDataset& ds,
                                const MaskMatrix& mask) {
    const auto q = view_assignments(models, ds, mask);
    Matrix sum = Matrix::Zero(static_cast<Eigen::Index>(ds.n_samples()), q.front().cols());
    for (const auto& qv : q) sum += qv;
    std::vector<int> labels(ds.n_samples());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = argmax_row(sum, static_cast<Eigen::Index>(i));
    return labels;
}

std::vector<std::vector<int>> align_views_to_teacher(std::vector<ViewModel>& models, const MultiViewDataset& ds,
                                                     const MaskMatrix& mask, const EnsembleDecision& teacher) {
    const auto rows = index_rows(teacher.sample_ids);
    std::vector<std::vector<int>> orders;
    for (std::size_t v = 0; v < models.size(); ++v) {
        const ViewRows sel = select_rows(teacher, teacher.sample_ids, rows, mask, v);
        if (sel.sample_ids.empty()) {
            orders.emplace_back();
            continue;
        }
        const Matrix q = soft_assign(encode(models[v], take_rows(ds.views[v], sel.sample_ids)), models[v].centroids);
        // cost[a][b]: negative agreement between teacher column a and view column b
        const Matrix cost = -(sel.teacher.transpose() * q);
        std::vector<int> order = hungarian(cost);
        permute_clusters(models[v], order);
        orders.push_back(std::move(order));
    }
    return orders;
}

int resolve_tau(const TrainConfig& cfg, const MaskMatrix& mask) {
    const int n_views = static_cast<int>(mask.n_views());
    if (cfg.tau) {
        const int tau = *cfg.tau;
        if (tau < 1 || tau > n_views) {
            throw ContractError("tau " + std::to_string(tau) + " outside 1.." + std::to_string(n_views));
        }
        if (tau == 1 && !cfg.allow_singleton_views) {
            throw ContractError("tau = 1 needs allow_singleton_views");
        }
        return tau;
    }
    const int tau_max = cfg.tau_max > 0 ? cfg.tau_max : std::min(n_views, 6);
    return compute_tau(n_views, tau_max, cfg.rho.value_or(mask.incomplete_fraction()));
}

EnsembleRound build_ensemble(const std::vector<ViewModel>& models, const MultiViewDataset& ds, const MaskMatrix& mask,
                             const PatternSet& patterns, const TrainConfig& cfg, RngStream& rng) {
    EnsembleRound er;
    Diagnostics diag;
    const int k = cfg.n_clusters;
    if (cfg.use_mpt) {
        std::vector<Matrix> embeddings;
        for (std::size_t v = 0; v < models.size(); ++v) {
            embeddings.push_back(embed_observed(models[v], ds.views[v], mask, v));
        }
        er.sets = group_samples(mask, patterns);
        for (std::size_t j = 0; j < er.sets.size(); ++j) {
            RngStream child = rng.split();
            er.groups.push_back(cluster_group(er.sets[j], j, embeddings, mask, k, child, cfg.group_kmeans, &diag));
        }
    } else {
        for (std::size_t v = 0; v < models.size(); ++v) {
            DecisionSet set;
            set.pattern.bits.assign(models.size(), 0);
            set.pattern.bits[v] = 1;
            set.view_ids = {v};
            set.sample_ids = mask.observed(v);
            GroupDecision g;
            g.set_index = v;
            g.sample_ids = set.sample_ids;
            if (g.sample_ids.size() < static_cast<std::size_t>(k)) {
                g.skipped = true;
            } else {
                g.centroids = models[v].centroids;
                g.soft = soft_assign(encode(models[v], take_rows(ds.views[v], g.sample_ids)), g.centroids);
                g.sharpened = sharpen(g.soft, &diag);
            }
            er.sets.push_back(std::move(set));
            er.groups.push_back(std::move(g));
        }
    }
    for (const auto& g : er.groups) er.n_skipped += g.skipped ? 1 : 0;
    er.tensor = align_decisions(er.groups, &diag);
    er.weights = cfg.weighting == Weighting::entropy ? uncertainty_weights(er.tensor, cfg.entropy_eps)
                                                     : uniform_weights(er.tensor);
    er.teacher = ensemble_decision(er.tensor, er.weights);
    er.warnings = std::move(diag.warnings);
    return er;
}

std::vector<ViewModel> initialise_models(const MultiViewDataset& ds, const MaskMatrix& mask, const TrainConfig& cfg,
                                         RngStream& rng, std::vector<double>* pretrain_trace) {
    ds.validate();
    if (mask.n_samples() != ds.n_samples() || mask.n_views() != ds.n_views()) {
        throw ContractError("mask shape does not match dataset");
    }
    if (cfg.n_clusters < 2) throw ContractError("K must be at least 2");
    RngStream init_rng = rng.split();
    std::vector<ViewModel> models;
    for (const auto& x : ds.views) {
        models.push_back(make_view_model(static_cast<int>(x.cols()), cfg.n_clusters, cfg.arch, init_rng,
                                         cfg.learning_rate));
    }
    RngStream pre_rng = rng.split();
    auto trace = pretrain(models, ds, mask, PretrainOptions{cfg.pretrain_epochs, cfg.loss.batch_size}, pre_rng);
    if (pretrain_trace) *pretrain_trace = std::move(trace);
    RngStream km_rng = rng.split();
    init_centroids(models, ds, mask, cfg.n_clusters, km_rng, cfg.init_kmeans);
    return models;
}

TrainResult train(const MultiViewDataset& ds, const MaskMatrix& mask, const TrainConfig& cfg, RngStream& rng,
                  const RoundHook& hook) {
    const auto start = std::chrono::steady_clock::now();
    cfg.loss.validate();
    TrainResult result;
    TrainReport& report = result.report;

    report.tau = resolve_tau(cfg, mask);
    const PatternSet patterns = enumerate_patterns(static_cast<int>(ds.n_views()), report.tau);
    report.n_patterns = patterns.patterns.size();

    RngStream init_rng = rng.split();
    auto& models = result.models;
    models = initialise_models(ds, mask, cfg, init_rng, &report.pretrain_loss);

    const auto& labels = ds.labels;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (labels) {
        const auto q = view_assignments(models, ds, mask);
        for (std::size_t v = 0; v < models.size(); ++v) {
            std::vector<int> pred, truth;
            for (std::size_t i : mask.observed(v)) {
                pred.push_back(argmax_row(q[v], static_cast<Eigen::Index>(i)));
                truth.push_back((*labels)[i]);
            }
            report.view_acc_before.push_back(accuracy(pred, truth).acc);
        }
    }

    RngStream round_rng = rng.split();
    RngStream batch_rng = rng.split();
    const LossConfig& lc = cfg.loss;
    const LossSpec spec{1.0, lc.lambda1, lc.lambda2, lc.temperature};
    const int n_rounds = (lc.e2i_epochs + lc.ensemble_interval - 1) / lc.ensemble_interval;
    const auto batch = static_cast<std::size_t>(lc.batch_size);

    for (int round = 0; round < n_rounds; ++round) {
        EnsembleRound er = build_ensemble(models, ds, mask, patterns, cfg, round_rng);
        const EnsembleDecision& teacher = er.teacher;
        align_views_to_teacher(models, ds, mask, teacher);

        RoundReport rr;
        rr.round = round;
        rr.n_sets = er.groups.size();
        rr.n_skipped = er.n_skipped;
        rr.union_size = teacher.sample_ids.size();
        rr.ensemble_acc = rr.ensemble_nmi = rr.total_acc = nan;
        if (labels) {
            std::vector<int> pred, truth;
            for (std::size_t r = 0; r < teacher.sample_ids.size(); ++r) {
                pred.push_back(argmax_row(teacher.probs, static_cast<Eigen::Index>(r)));
                truth.push_back((*labels)[teacher.sample_ids[r]]);
            }
            rr.ensemble_acc = accuracy(pred, truth).acc;
            rr.ensemble_nmi = nmi(pred, truth);
            rr.total_acc = accuracy(predict_labels(models, ds, mask), *labels).acc;
        }
        rr.warnings = er.warnings;
        report.rounds.push_back(std::move(rr));
        if (hook) hook(round, er, models);

        const auto teacher_row = index_rows(teacher.sample_ids);
        std::vector<std::size_t> order = teacher.sample_ids;
        const int epochs = std::min(lc.ensemble_interval, lc.e2i_epochs - round * lc.ensemble_interval);
        for (int epoch = 0; epoch < epochs; ++epoch) {
            batch_rng.shuffle(order);
            EpochLoss el;
            for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
                const std::span<const std::size_t> members(order.data() + b0, std::min(batch, order.size() - b0));
                for (std::size_t v = 0; v < models.size(); ++v) {
                    const ViewRows sel = select_rows(teacher, members, teacher_row, mask, v);
                    if (sel.sample_ids.empty()) continue;
                    ViewGradients g = ViewGradients::zeros_like(models[v]);
                    const ViewLoss l =
                        backward(models[v], take_rows(ds.views[v], sel.sample_ids), &sel.teacher, spec, &g);
                    el.rec += l.rec;
                    el.cons += l.cons;
                    el.disc += l.disc;
                    adam_step(models[v], g);
                }
            }
            el.total = el.rec + lc.lambda1 * el.cons + lc.lambda2 * el.disc;
            report.epochs.push_back(el);
        }
    }

    report.predictions = predict_labels(models, ds, mask);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace treeeic
