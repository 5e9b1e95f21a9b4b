#include "treeeic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "treeeic/ensemble.hpp"

namespace treeeic {

namespace {

void check(const std::vector<int>& pred, const std::vector<int>& truth, const char* what) {
    if (pred.size() != truth.size()) {
        throw ContractError(std::string(what) + ": " + std::to_string(pred.size()) + " predictions for " +
                            std::to_string(truth.size()) + " labels");
    }
    for (int y : pred) {
        if (y < 0) throw ContractError(std::string(what) + ": negative label");
    }
    for (int y : truth) {
        if (y < 0) throw ContractError(std::string(what) + ": negative label");
    }
}

int n_labels(const std::vector<int>& y) { return y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1; }

Matrix contingency(const std::vector<int>& pred, const std::vector<int>& truth, int size) {
    Matrix c = Matrix::Zero(size, size);
    for (std::size_t i = 0; i < pred.size(); ++i) c(pred[i], truth[i]) += 1.0;
    return c;
}

double entropy(const Eigen::VectorXd& counts, double n) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < counts.size(); ++i) {
        if (counts(i) > 0.0) {
            const double p = counts(i) / n;
            h -= p * std::log(p);
        }
    }
    return h;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

AccuracyResult accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    check(pred, truth, "accuracy");
    AccuracyResult r;
    if (pred.empty()) return r;
    const int size = std::max(n_labels(pred), n_labels(truth));
    const Matrix c = contingency(pred, truth, size);
    r.mapping = hungarian(-c);
    r.acc = -assignment_cost(-c, r.mapping) / static_cast<double>(pred.size());
    return r;
}

double nmi(const std::vector<int>& pred, const std::vector<int>& truth, NmiNorm norm) {
    check(pred, truth, "nmi");
    if (pred.empty()) return 0.0;
    const int size = std::max(n_labels(pred), n_labels(truth));
    const Matrix c = contingency(pred, truth, size);
    const double n = static_cast<double>(pred.size());
    const Eigen::VectorXd rows = c.rowwise().sum();
    const Eigen::VectorXd cols = c.colwise().sum().transpose();
    const double hp = entropy(rows, n);
    const double ht = entropy(cols, n);
    if (hp <= 0.0 || ht <= 0.0) return 0.0;
    double mi = 0.0;
    for (Eigen::Index a = 0; a < c.rows(); ++a) {
        for (Eigen::Index b = 0; b < c.cols(); ++b) {
            if (c(a, b) > 0.0) {
                mi += c(a, b) / n * std::log(n * c(a, b) / (rows(a) * cols(b)));
            }
        }
    }
    const double denom = norm == NmiNorm::geometric ? std::sqrt(hp * ht) : 0.5 * (hp + ht);
    return std::clamp(mi / denom, 0.0, 1.0);
}

double ari(const std::vector<int>& pred, const std::vector<int>& truth) {
    check(pred, truth, "ari");
    if (pred.size() < 2) return 0.0;
    const int size = std::max(n_labels(pred), n_labels(truth));
    const Matrix c = contingency(pred, truth, size);
    double index = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) index += comb2(c.data()[i]);
    double a = 0.0;
    double b = 0.0;
    const Eigen::VectorXd rows = c.rowwise().sum();
    const Eigen::VectorXd cols = c.colwise().sum().transpose();
    for (Eigen::Index i = 0; i < rows.size(); ++i) a += comb2(rows(i));
    for (Eigen::Index i = 0; i < cols.size(); ++i) b += comb2(cols(i));
    const double total = comb2(static_cast<double>(pred.size()));
    const double expected = a * b / total;
    const double max_index = 0.5 * (a + b);
    const double denom = max_index - expected;
    if (denom == 0.0) return 0.0;
    return (index - expected) / denom;
}

EvalResult evaluate(const std::vector<int>& pred, const std::vector<int>& truth, NmiNorm norm) {
    EvalResult r;
    const auto acc = accuracy(pred, truth);
    r.acc = acc.acc;
    r.mapping = acc.mapping;
    r.nmi = nmi(pred, truth, norm);
    r.ari = ari(pred, truth);
    r.confusion = contingency(pred, truth, std::max(n_labels(pred), n_labels(truth)));
    return r;
}

}  // namespace treeeic
