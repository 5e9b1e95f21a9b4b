#include "treeeic/cluster_losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace treeeic {

double consistency_rows(const Matrix& p, const Matrix& q, Matrix* dq) {
    if (p.rows() != q.rows() || p.cols() != q.cols()) {
        throw ContractError("consistency loss: teacher and student shapes differ");
    }
    const Matrix diff = q - p;
    if (dq) {
        *dq = 2.0 * diff;
    }
    return diff.squaredNorm();
}

namespace {

struct Cosine {
    double value = 0.0;
    bool defined = false;
};

Cosine cosine(const Eigen::Ref<const Eigen::VectorXd>& a, double na, const Eigen::Ref<const Eigen::VectorXd>& b,
              double nb) {
    if (na == 0.0 || nb == 0.0) {
        return {};
    }
    return {a.dot(b) / (na * nb), true};
}

// d cos(a, b) / d b, scaled by `w`, accumulated into `out`
void add_cosine_grad(const Eigen::Ref<const Eigen::VectorXd>& a, double na, const Eigen::Ref<const Eigen::VectorXd>& b,
                     double nb, double cos_ab, double w, Eigen::Ref<Eigen::VectorXd> out) {
    out += w * (a / (na * nb) - cos_ab * b / (nb * nb));
}

}  // namespace

double infonce_columns(const Matrix& p, const Matrix& q, double temperature, Matrix* dq, Diagnostics* diag) {
    if (p.rows() != q.rows() || p.cols() != q.cols()) {
        throw ContractError("infonce: teacher and student shapes differ");
    }
    if (!(temperature > 0.0)) {
        throw ContractError("infonce: temperature must be positive");
    }
    const Eigen::Index k_count = p.cols();
    if (k_count < 2) {
        throw ContractError("infonce: need at least two clusters");
    }
    // column views as column-major copies
    const Eigen::MatrixXd pc = p;
    const Eigen::MatrixXd qc = q;
    std::vector<double> np(static_cast<std::size_t>(k_count));
    std::vector<double> nq(static_cast<std::size_t>(k_count));
    for (Eigen::Index k = 0; k < k_count; ++k) {
        np[k] = pc.col(k).norm();
        nq[k] = qc.col(k).norm();
        if (diag && (np[k] == 0.0 || nq[k] == 0.0)) {
            diag->warn("infonce: zero-norm column " + std::to_string(k));
        }
    }

    Eigen::MatrixXd grad;
    if (dq) {
        grad = Eigen::MatrixXd::Zero(q.rows(), k_count);
    }
    const double inv_t = 1.0 / temperature;
    const double inv_k = 1.0 / static_cast<double>(k_count);

    double total = 0.0;
    std::vector<double> neg;
    std::vector<Cosine> neg_cos;
    std::vector<Eigen::Index> neg_other;
    std::vector<bool> neg_is_student;
    for (Eigen::Index k = 0; k < k_count; ++k) {
        const Cosine pos = cosine(pc.col(k), np[k], qc.col(k), nq[k]);
        neg.clear();
        neg_cos.clear();
        neg_other.clear();
        neg_is_student.clear();
        for (Eigen::Index o = 0; o < k_count; ++o) {
            if (o == k) continue;
            const Cosine c = cosine(pc.col(o), np[o], qc.col(k), nq[k]);
            neg.push_back(c.value * inv_t);
            neg_cos.push_back(c);
            neg_other.push_back(o);
            neg_is_student.push_back(false);
        }
        for (Eigen::Index o = 0; o < k_count; ++o) {
            if (o == k) continue;
            const Cosine c = cosine(qc.col(o), nq[o], qc.col(k), nq[k]);
            neg.push_back(c.value * inv_t);
            neg_cos.push_back(c);
            neg_other.push_back(o);
            neg_is_student.push_back(true);
        }
        const double mx = *std::max_element(neg.begin(), neg.end());
        double sum = 0.0;
        for (double s : neg) sum += std::exp(s - mx);
        const double lse = mx + std::log(sum);
        total += -pos.value * inv_t + lse;

        if (dq) {
            if (pos.defined) {
                add_cosine_grad(pc.col(k), np[k], qc.col(k), nq[k], pos.value, -inv_t * inv_k, grad.col(k));
            }
            for (std::size_t n = 0; n < neg.size(); ++n) {
                if (!neg_cos[n].defined) continue;
                const double w = std::exp(neg[n] - lse) * inv_t * inv_k;
                const Eigen::Index o = neg_other[n];
                if (neg_is_student[n]) {
                    add_cosine_grad(qc.col(o), nq[o], qc.col(k), nq[k], neg_cos[n].value, w, grad.col(k));
                    add_cosine_grad(qc.col(k), nq[k], qc.col(o), nq[o], neg_cos[n].value, w, grad.col(o));
                } else {
                    add_cosine_grad(pc.col(o), np[o], qc.col(k), nq[k], neg_cos[n].value, w, grad.col(k));
                }
            }
        }
    }
    if (dq) {
        *dq = grad;
    }
    return total * inv_k;
}

}  // namespace treeeic
