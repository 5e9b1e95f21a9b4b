#pragma once

#include <vector>

#include "treeeic/dataset.hpp"

namespace treeeic {

/**
 * Gaussian-blob multi-view data.
 *
 * Class means sit on a scaled simplex in a K-dimensional latent space with pairwise distance
 * `separation * noise`. Every view draws its own latent noise and maps the noisy latent point
 * into D_v dimensions through a random map with orthonormal rows, so each view sees the same
 * class geometry with independent noise.
 */
struct SynthConfig {
    int n_samples = 1000;
    int n_views = 4;
    int n_clusters = 5;
    /// per-view feature width; empty means 20 for every view
    std::vector<int> view_dims;
    /// distance between class means in units of `noise`
    double separation = 4.0;
    /// optional per-view override of `separation`
    std::vector<double> view_separation;
    double noise = 1.0;
};

/// Balanced labels (sizes differ by at most one), shuffled. Throws ContractError on bad shapes.
MultiViewDataset make_synthetic(const SynthConfig& cfg, RngStream& rng);

}  // namespace treeeic
