#include "treeeic/groupwise.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "treeeic/nn.hpp"

namespace treeeic {

namespace {

Matrix seed_plus_plus(const Matrix& z, int k, RngStream& rng) {
    const Eigen::Index n = z.rows();
    Matrix centroids(k, z.cols());
    centroids.row(0) = z.row(static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n))));
    Eigen::VectorXd closest(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        closest(i) = (z.row(i) - centroids.row(0)).squaredNorm();
    }
    for (int c = 1; c < k; ++c) {
        const double total = closest.sum();
        Eigen::Index pick = n - 1;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += closest(i);
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
        }
        centroids.row(c) = z.row(pick);
        for (Eigen::Index i = 0; i < n; ++i) {
            closest(i) = std::min(closest(i), (z.row(i) - centroids.row(c)).squaredNorm());
        }
    }
    return centroids;
}

double assign(const Matrix& z, const Matrix& centroids, std::vector<int>& labels, Eigen::VectorXd& dist) {
    const Matrix d = pairwise_sqdist(z, centroids);
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        Eigen::Index best = 0;
        d.row(i).minCoeff(&best);
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        dist(i) = d(i, best);
        inertia += dist(i);
    }
    return inertia;
}

KMeansResult lloyd(const Matrix& z, int k, RngStream& rng, const KMeansOptions& opts) {
    const Eigen::Index n = z.rows();
    KMeansResult r;
    r.centroids = seed_plus_plus(z, k, rng);
    r.labels.assign(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd dist(n);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0;; ++it) {
        r.inertia = assign(z, r.centroids, r.labels, dist);
        r.inertia_trace.push_back(r.inertia);
        const bool converged = std::isfinite(prev) && (prev - r.inertia) <= opts.tol * prev;
        if (converged || it + 1 >= opts.max_iter) {
            break;
        }
        prev = r.inertia;

        Matrix sums = Matrix::Zero(k, z.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = r.labels[static_cast<std::size_t>(i)];
            sums.row(c) += z.row(i);
            ++counts[static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                r.centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
                continue;
            }
            // empty: take the worst-fit point from a cluster that can spare it
            Eigen::Index far = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto owner = static_cast<std::size_t>(r.labels[static_cast<std::size_t>(i)]);
                if (counts[owner] > 1 && (far < 0 || dist(i) > dist(far))) {
                    far = i;
                }
            }
            if (far >= 0) {
                const auto owner = static_cast<std::size_t>(r.labels[static_cast<std::size_t>(far)]);
                r.centroids.row(static_cast<Eigen::Index>(owner)) =
                    (sums.row(static_cast<Eigen::Index>(owner)) - z.row(far)) / (counts[owner] - 1);
                sums.row(static_cast<Eigen::Index>(owner)) -= z.row(far);
                --counts[owner];
                r.labels[static_cast<std::size_t>(far)] = c;
                counts[static_cast<std::size_t>(c)] = 1;
                r.centroids.row(c) = z.row(far);
                dist(far) = 0.0;
            }
        }
    }
    return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& z, int k, RngStream& rng, const KMeansOptions& opts) {
    if (k < 1) {
        throw ContractError("kmeans: K must be positive");
    }
    if (z.rows() < k) {
        throw ContractError("kmeans: " + std::to_string(z.rows()) + " points for " + std::to_string(k) + " clusters");
    }
    if (opts.max_iter < 1 || opts.n_init < 1) {
        throw ContractError("kmeans: max_iter and n_init must be positive");
    }
    KMeansResult best;
    for (int run = 0; run < opts.n_init; ++run) {
        KMeansResult r = lloyd(z, k, rng, opts);
        if (run == 0 || r.inertia < best.inertia) {
            best = std::move(r);
        }
    }
    return best;
}

Matrix concat_embeddings(const DecisionSet& set, const std::vector<Matrix>& embeddings, const MaskMatrix& mask) {
    Eigen::Index width = 0;
    for (std::size_t v : set.view_ids) {
        if (v >= embeddings.size()) {
            throw ContractError("concat_embeddings: view id out of range");
        }
        width += embeddings[v].cols();
    }
    Matrix out(static_cast<Eigen::Index>(set.sample_ids.size()), width);
    for (std::size_t r = 0; r < set.sample_ids.size(); ++r) {
        const std::size_t i = set.sample_ids[r];
        Eigen::Index offset = 0;
        for (std::size_t v : set.view_ids) {
            if (!mask.available(i, v)) {
                throw ContractError("concat_embeddings: sample " + std::to_string(i) + " is missing view " +
                                    std::to_string(v));
            }
            const Matrix& e = embeddings[v];
            out.row(static_cast<Eigen::Index>(r)).segment(offset, e.cols()) = e.row(static_cast<Eigen::Index>(i));
            offset += e.cols();
        }
    }
    return out;
}

Matrix group_soft_assign(const Matrix& z, const Matrix& centroids) { return soft_assign(z, centroids); }

Matrix sharpen(const Matrix& p, Diagnostics* diag) {
    RowVector freq = p.colwise().sum();
    for (Eigen::Index k = 0; k < freq.size(); ++k) {
        if (!(freq(k) > 0.0)) {
            freq(k) = 1e-12;
            if (diag) diag->warn("sharpen: cluster " + std::to_string(k) + " has zero frequency");
        }
    }
    Matrix d = p.array().square().rowwise() / freq.array();
    return row_normalize(d);
}

GroupDecision cluster_group(const DecisionSet& set, std::size_t set_index, const std::vector<Matrix>& embeddings,
                            const MaskMatrix& mask, int k, RngStream& rng, const KMeansOptions& opts,
                            Diagnostics* diag) {
    GroupDecision g;
    g.set_index = set_index;
    g.sample_ids = set.sample_ids;
    if (set.sample_ids.size() < static_cast<std::size_t>(k)) {
        g.skipped = true;
        return g;
    }
    const Matrix z = concat_embeddings(set, embeddings, mask);
    const KMeansResult km = kmeans(z, k, rng, opts);
    g.centroids = km.centroids;
    g.soft = group_soft_assign(z, g.centroids);
    g.sharpened = sharpen(g.soft, diag);
    return g;
}

}  // namespace treeeic
