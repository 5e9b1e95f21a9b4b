#pragma once

#include <cstddef>
#include <vector>

#include "treeeic/dataset.hpp"
#include "treeeic/mpt.hpp"
#include "treeeic/numkernel.hpp"

namespace treeeic {

struct KMeansOptions {
    int max_iter = 100;
    /// Stop once the relative drop in inertia falls below this.
    double tol = 1e-6;
    /// Independent k-means++ restarts; the lowest final inertia wins.
    int n_init = 1;
};

struct KMeansResult {
    Matrix centroids;
    std::vector<int> labels;
    double inertia = 0.0;
    /// Inertia after every assignment step of the winning restart.
    std::vector<double> inertia_trace;
};

/**
 * Lloyd's algorithm with k-means++ seeding.
 *
 * A cluster that empties during an update is moved onto the point farthest from its assigned
 * centroid. Ties in assignment go to the lowest centroid index.
 */
KMeansResult kmeans(const Matrix& z, int k, RngStream& rng, const KMeansOptions& opts = {});

/**
 * Rows of the set's samples, each the concatenation of its embeddings over the set's views in
 * ascending view order. Throws ContractError if a sample is not observed in one of those views.
 */
Matrix concat_embeddings(const DecisionSet& set, const std::vector<Matrix>& embeddings, const MaskMatrix& mask);

/// Student-t assignment against group centroids; identical kernel to soft_assign.
Matrix group_soft_assign(const Matrix& z, const Matrix& centroids);

/**
 * Target-distribution sharpening: d_ik proportional to p_ik^2 / f_k, f_k = sum_i p_ik.
 * A zero cluster frequency is replaced by 1e-12 and reported through `diag`.
 */
Matrix sharpen(const Matrix& p, Diagnostics* diag = nullptr);

struct GroupDecision {
    std::size_t set_index = 0;
    std::vector<std::size_t> sample_ids;
    Matrix soft;
    Matrix sharpened;
    Matrix centroids;
    /// Set had fewer samples than clusters and produced no decision.
    bool skipped = false;
};

/// concat -> kmeans -> soft assignment -> sharpening for one decision set.
GroupDecision cluster_group(const DecisionSet& set, std::size_t set_index, const std::vector<Matrix>& embeddings,
                            const MaskMatrix& mask, int k, RngStream& rng, const KMeansOptions& opts = {},
                            Diagnostics* diag = nullptr);

}  // namespace treeeic
