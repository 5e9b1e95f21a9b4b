#pragma once

// Scalar reference implementations written independently of the library code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "treeeic/dataset.hpp"
#include "treeeic/nn.hpp"
#include "treeeic/numkernel.hpp"

namespace oracle {

using treeeic::Matrix;

inline Matrix sqdist(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (Eigen::Index c = 0; c < a.cols(); ++c) {
                const double d = a(i, c) - b(j, c);
                s += d * d;
            }
            out(i, j) = s;
        }
    }
    return out;
}

inline Matrix student_t(const Matrix& z, const Matrix& mu) {
    Matrix q(z.rows(), mu.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        double total = 0.0;
        for (Eigen::Index k = 0; k < mu.rows(); ++k) {
            double d = 0.0;
            for (Eigen::Index c = 0; c < z.cols(); ++c) d += (z(i, c) - mu(k, c)) * (z(i, c) - mu(k, c));
            q(i, k) = 1.0 / (1.0 + d);
            total += q(i, k);
        }
        for (Eigen::Index k = 0; k < mu.rows(); ++k) q(i, k) /= total;
    }
    return q;
}

inline Matrix sharpen(const Matrix& p) {
    std::vector<double> freq(static_cast<std::size_t>(p.cols()), 0.0);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index k = 0; k < p.cols(); ++k) freq[static_cast<std::size_t>(k)] += p(i, k);
    }
    Matrix d(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        double total = 0.0;
        for (Eigen::Index k = 0; k < p.cols(); ++k) {
            d(i, k) = p(i, k) * p(i, k) / freq[static_cast<std::size_t>(k)];
            total += d(i, k);
        }
        for (Eigen::Index k = 0; k < p.cols(); ++k) d(i, k) /= total;
    }
    return d;
}

inline double cosine(const Matrix& a, Eigen::Index ca, const Matrix& b, Eigen::Index cb) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        dot += a(i, ca) * b(i, cb);
        na += a(i, ca) * a(i, ca);
        nb += b(i, cb) * b(i, cb);
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Cluster-level InfoNCE: positive (p_k, q_k), negatives (p_j, q_k) and (q_j, q_k) for j != k.
inline double infonce(const Matrix& p, const Matrix& q, double t) {
    const Eigen::Index k = p.cols();
    double total = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
        double neg = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (j == c) continue;
            neg += std::exp(cosine(p, j, q, c) / t);
            neg += std::exp(cosine(q, j, q, c) / t);
        }
        total += -cosine(p, c, q, c) / t + std::log(neg);
    }
    return total / static_cast<double>(k);
}

// Minimum-cost permutation by enumerating all K! candidates; perm[row] = col.
inline std::vector<int> brute_force_assignment(const Matrix& cost, double* best_cost = nullptr) {
    const auto k = static_cast<int>(cost.rows());
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_value = std::numeric_limits<double>::infinity();
    do {
        double value = 0.0;
        for (int r = 0; r < k; ++r) value += cost(r, perm[static_cast<std::size_t>(r)]);
        if (value < best_value) {
            best_value = value;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (best_cost) *best_cost = best_value;
    return best;
}

// Sample i belongs to the set of pattern m iff it observes every view m marks.
inline std::vector<std::size_t> members(const treeeic::MaskMatrix& mask, const std::vector<std::uint8_t>& bits) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mask.n_samples(); ++i) {
        int shared = 0;
        int needed = 0;
        for (std::size_t v = 0; v < bits.size(); ++v) {
            needed += bits[v];
            shared += bits[v] * (mask.available(i, v) ? 1 : 0);
        }
        if (shared == needed) out.push_back(i);
    }
    return out;
}

// All length-V 0/1 vectors with exactly tau ones, in lexicographic order.
inline std::vector<std::vector<std::uint8_t>> patterns_with(int v, int tau) {
    std::vector<std::vector<std::uint8_t>> out;
    for (std::uint32_t code = 0; code < (1u << v); ++code) {
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(v));
        int ones = 0;
        for (int b = 0; b < v; ++b) {
            bits[static_cast<std::size_t>(b)] = (code >> (v - 1 - b)) & 1u;
            ones += bits[static_cast<std::size_t>(b)];
        }
        if (ones == tau) out.push_back(bits);
    }
    return out;
}

inline Matrix mlp_forward(const treeeic::Mlp& mlp, const Matrix& x) {
    Matrix h = x;
    for (const auto& layer : mlp.layers) {
        Matrix out(h.rows(), layer.weight.cols());
        for (Eigen::Index i = 0; i < h.rows(); ++i) {
            for (Eigen::Index o = 0; o < layer.weight.cols(); ++o) {
                double s = layer.bias(0, o);
                for (Eigen::Index c = 0; c < h.cols(); ++c) s += h(i, c) * layer.weight(c, o);
                out(i, o) = layer.activation == treeeic::Activation::relu ? std::max(0.0, s) : s;
            }
        }
        h = out;
    }
    return h;
}

// Weighted rec + cons + disc objective of one view model, evaluated with scalar loops only.
inline double view_objective(const treeeic::ViewModel& model, const Matrix& x, const Matrix& teacher, double w_rec,
                             double w_cons, double w_disc, double temperature) {
    const Matrix z = mlp_forward(model.encoder, x);
    const Matrix x_hat = mlp_forward(model.decoder, z);
    double rec = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) rec += (x_hat.data()[i] - x.data()[i]) * (x_hat.data()[i] - x.data()[i]);
    const Matrix q = student_t(z, model.centroids);
    double cons = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) cons += (teacher.data()[i] - q.data()[i]) * (teacher.data()[i] - q.data()[i]);
    const double disc = infonce(teacher, q, temperature);
    return w_rec * rec + w_cons * cons + w_disc * disc;
}

inline double choose2(double n) { return n * (n - 1.0) / 2.0; }

// ARI from explicit pair enumeration.
inline double ari_pairs(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size();
    double both = 0.0, in_a = 0.0, in_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool sa = a[i] == a[j];
            const bool sb = b[i] == b[j];
            both += (sa && sb) ? 1.0 : 0.0;
            in_a += sa ? 1.0 : 0.0;
            in_b += sb ? 1.0 : 0.0;
        }
    }
    const double pairs = choose2(static_cast<double>(n));
    const double expected = in_a * in_b / pairs;
    const double max_index = 0.5 * (in_a + in_b);
    if (max_index == expected) return 0.0;
    return (both - expected) / (max_index - expected);
}

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, treeeic::RngStream& rng, double lo = 0.0, double hi = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * rng.uniform();
    return m;
}

inline Matrix random_simplex_rows(Eigen::Index r, Eigen::Index c, treeeic::RngStream& rng) {
    Matrix m = random_matrix(r, c, rng, 0.05, 1.0);
    for (Eigen::Index i = 0; i < r; ++i) m.row(i) /= m.row(i).sum();
    return m;
}

}  // namespace oracle
