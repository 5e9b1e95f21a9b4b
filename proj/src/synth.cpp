#include "treeeic/synth.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace treeeic {

namespace {

// rows x cols with orthonormal rows (rows <= cols), Gram-Schmidt on Gaussian draws
Matrix orthonormal_rows(int rows, int cols, RngStream& rng) {
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.gaussian();
    for (int r = 0; r < rows; ++r) {
        for (int p = 0; p < r; ++p) {
            a.row(r) -= a.row(r).dot(a.row(p)) * a.row(p);
        }
        a.row(r).normalize();
    }
    return a;
}

}  // namespace

MultiViewDataset make_synthetic(const SynthConfig& cfg, RngStream& rng) {
    if (cfg.n_views < 1 || cfg.n_clusters < 2 || cfg.n_samples < cfg.n_clusters) {
        throw ContractError("make_synthetic: need V >= 1, K >= 2 and N >= K");
    }
    std::vector<int> dims = cfg.view_dims;
    if (dims.empty()) dims.assign(static_cast<std::size_t>(cfg.n_views), 20);
    if (dims.size() != static_cast<std::size_t>(cfg.n_views)) {
        throw ContractError("make_synthetic: view_dims must list one width per view");
    }
    if (!cfg.view_separation.empty() && cfg.view_separation.size() != dims.size()) {
        throw ContractError("make_synthetic: view_separation must list one value per view");
    }
    const int latent = cfg.n_clusters;
    for (int d : dims) {
        if (d < latent) {
            throw ContractError("make_synthetic: every view needs at least K = " + std::to_string(latent) +
                                " features");
        }
    }

    const auto n = static_cast<std::size_t>(cfg.n_samples);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(cfg.n_clusters));
    rng.shuffle(labels);

    MultiViewDataset ds;
    ds.n_clusters = cfg.n_clusters;
    for (std::size_t v = 0; v < dims.size(); ++v) {
        const double sep = cfg.view_separation.empty() ? cfg.separation : cfg.view_separation[v];
        // unit vectors are sqrt(2) apart, so scale to put means sep * noise apart
        const double scale = sep * cfg.noise / std::sqrt(2.0);
        const Matrix map = orthonormal_rows(latent, dims[v], rng);
        Matrix latent_points(static_cast<Eigen::Index>(n), latent);
        for (std::size_t i = 0; i < n; ++i) {
            for (int c = 0; c < latent; ++c) {
                const double mean = (labels[i] == c) ? scale : 0.0;
                latent_points(static_cast<Eigen::Index>(i), c) = mean + cfg.noise * rng.gaussian();
            }
        }
        ds.views.push_back(latent_points * map);
    }
    ds.labels = std::move(labels);
    return ds;
}

}  // namespace treeeic
