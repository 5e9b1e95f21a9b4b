#include "treeeic/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

namespace treeeic {

std::vector<int> hungarian(const Matrix& cost) {
    if (cost.rows() != cost.cols()) {
        throw ContractError("hungarian: cost matrix must be square");
    }
    require_finite(cost, "hungarian cost");
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; p[j] is the row matched to column j
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> perm(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j) {
        if (p[j] != 0) perm[static_cast<std::size_t>(p[j] - 1)] = j - 1;
    }
    return perm;
}

double assignment_cost(const Matrix& cost, const std::vector<int>& perm) {
    double total = 0.0;
    for (std::size_t r = 0; r < perm.size(); ++r) {
        total += cost(static_cast<Eigen::Index>(r), perm[r]);
    }
    return total;
}

DecisionTensor align_decisions(const std::vector<GroupDecision>& groups, Diagnostics* diag) {
    std::vector<const GroupDecision*> active;
    for (const auto& g : groups) {
        if (!g.skipped) active.push_back(&g);
    }
    if (active.empty()) {
        throw PipelineError("every decision set was skipped; no group has at least K samples");
    }
    const auto k = static_cast<Eigen::Index>(active.front()->sharpened.cols());

    DecisionTensor t;
    for (const auto* g : active) {
        t.sample_ids.insert(t.sample_ids.end(), g->sample_ids.begin(), g->sample_ids.end());
    }
    std::sort(t.sample_ids.begin(), t.sample_ids.end());
    t.sample_ids.erase(std::unique(t.sample_ids.begin(), t.sample_ids.end()), t.sample_ids.end());
    std::unordered_map<std::size_t, Eigen::Index> row_of;
    for (std::size_t r = 0; r < t.sample_ids.size(); ++r) {
        row_of[t.sample_ids[r]] = static_cast<Eigen::Index>(r);
    }
    const auto n_union = static_cast<Eigen::Index>(t.sample_ids.size());

    std::size_t ref = 0;
    for (std::size_t a = 1; a < active.size(); ++a) {
        if (active[a]->sample_ids.size() > active[ref]->sample_ids.size()) ref = a;
    }

    Matrix consensus = Matrix::Zero(n_union, k);
    std::vector<std::uint8_t> covered(static_cast<std::size_t>(n_union), 0);
    std::vector<std::vector<int>> perms(active.size());
    std::vector<bool> done(active.size(), false);

    auto absorb = [&](std::size_t a, const std::vector<int>& perm) {
        const GroupDecision& g = *active[a];
        for (std::size_t r = 0; r < g.sample_ids.size(); ++r) {
            const Eigen::Index row = row_of.at(g.sample_ids[r]);
            for (Eigen::Index c = 0; c < k; ++c) {
                consensus(row, c) += g.sharpened(static_cast<Eigen::Index>(r), perm[static_cast<std::size_t>(c)]);
            }
            covered[static_cast<std::size_t>(row)] = 1;
        }
        perms[a] = perm;
        done[a] = true;
    };

    std::vector<int> identity(static_cast<std::size_t>(k));
    for (int c = 0; c < static_cast<int>(k); ++c) identity[static_cast<std::size_t>(c)] = c;
    absorb(ref, identity);

    for (std::size_t step = 1; step < active.size(); ++step) {
        std::size_t pick = active.size();
        std::size_t best_overlap = 0;
        for (std::size_t a = 0; a < active.size(); ++a) {
            if (done[a]) continue;
            std::size_t overlap = 0;
            for (std::size_t id : active[a]->sample_ids) overlap += covered[static_cast<std::size_t>(row_of.at(id))];
            if (pick == active.size() || overlap > best_overlap) {
                pick = a;
                best_overlap = overlap;
            }
        }
        const GroupDecision& g = *active[pick];
        if (best_overlap == 0) {
            if (diag) {
                diag->warn("decision set " + std::to_string(g.set_index) +
                           " shares no samples with aligned sets; labels left unaligned");
            }
            absorb(pick, identity);
            continue;
        }
        Matrix agreement = Matrix::Zero(k, k);
        for (std::size_t r = 0; r < g.sample_ids.size(); ++r) {
            const Eigen::Index row = row_of.at(g.sample_ids[r]);
            if (!covered[static_cast<std::size_t>(row)]) continue;
            agreement.noalias() += consensus.row(row).transpose() * g.sharpened.row(static_cast<Eigen::Index>(r));
        }
        absorb(pick, hungarian(-agreement));
    }

    for (std::size_t a = 0; a < active.size(); ++a) {
        const GroupDecision& g = *active[a];
        Matrix slice = Matrix::Zero(n_union, k);
        std::vector<std::uint8_t> present(static_cast<std::size_t>(n_union), 0);
        for (std::size_t r = 0; r < g.sample_ids.size(); ++r) {
            const Eigen::Index row = row_of.at(g.sample_ids[r]);
            for (Eigen::Index c = 0; c < k; ++c) {
                slice(row, c) = g.sharpened(static_cast<Eigen::Index>(r), perms[a][static_cast<std::size_t>(c)]);
            }
            present[static_cast<std::size_t>(row)] = 1;
        }
        t.set_indices.push_back(g.set_index);
        t.decisions.push_back(std::move(slice));
        t.presence.push_back(std::move(present));
        t.alignment.push_back(perms[a]);
    }
    return t;
}

namespace {

WeightTensor normalise(const DecisionTensor& d, const std::vector<Eigen::VectorXd>& raw) {
    const auto n = static_cast<Eigen::Index>(d.n_samples());
    Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
    for (const auto& r : raw) total += r;
    WeightTensor w;
    const auto k = d.decisions.empty() ? 0 : d.decisions.front().cols();
    for (const auto& r : raw) {
        Matrix slice(n, k);
        for (Eigen::Index i = 0; i < n; ++i) {
            slice.row(i).setConstant(total(i) > 0.0 ? r(i) / total(i) : 0.0);
        }
        w.weights.push_back(std::move(slice));
    }
    return w;
}

}  // namespace

WeightTensor uncertainty_weights(const DecisionTensor& d, double eps) {
    if (!(eps > 0.0)) {
        throw ContractError("uncertainty_weights: eps must be positive");
    }
    std::vector<Eigen::VectorXd> raw;
    for (std::size_t s = 0; s < d.n_slices(); ++s) {
        const Matrix& dec = d.decisions[s];
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dec.rows());
        for (Eigen::Index i = 0; i < dec.rows(); ++i) {
            if (!d.presence[s][static_cast<std::size_t>(i)]) continue;
            double h = 0.0;
            for (Eigen::Index c = 0; c < dec.cols(); ++c) {
                h -= dec(i, c) * std::log(dec(i, c) + eps);
            }
            e(i) = 1.0 / std::max(h, eps);
        }
        raw.push_back(std::move(e));
    }
    return normalise(d, raw);
}

WeightTensor uniform_weights(const DecisionTensor& d) {
    std::vector<Eigen::VectorXd> raw;
    for (std::size_t s = 0; s < d.n_slices(); ++s) {
        Eigen::VectorXd e(static_cast<Eigen::Index>(d.n_samples()));
        for (std::size_t i = 0; i < d.n_samples(); ++i) {
            e(static_cast<Eigen::Index>(i)) = d.presence[s][i] ? 1.0 : 0.0;
        }
        raw.push_back(std::move(e));
    }
    return normalise(d, raw);
}

EnsembleDecision ensemble_decision(const DecisionTensor& d, const WeightTensor& e) {
    if (e.weights.size() != d.n_slices() || d.n_slices() == 0) {
        throw ContractError("ensemble_decision: weight and decision tensors disagree");
    }
    Matrix raw = Matrix::Zero(d.decisions.front().rows(), d.decisions.front().cols());
    for (std::size_t s = 0; s < d.n_slices(); ++s) {
        if (e.weights[s].rows() != raw.rows() || e.weights[s].cols() != raw.cols()) {
            throw ContractError("ensemble_decision: weight slice shape mismatch");
        }
        raw.array() += e.weights[s].array() * d.decisions[s].array();
    }
    EnsembleDecision out;
    out.sample_ids = d.sample_ids;
    out.probs = row_normalize(raw);
    return out;
}

}  // namespace treeeic
