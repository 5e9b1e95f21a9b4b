#pragma once

#include <vector>

#include "treeeic/numkernel.hpp"

namespace treeeic {

enum class NmiNorm {
    geometric,   ///< I / sqrt(H(pred) H(truth))
    arithmetic,  ///< 2 I / (H(pred) + H(truth))
};

struct AccuracyResult {
    double acc = 0.0;
    /// mapping[predicted label] = truth label it was matched to
    std::vector<int> mapping;
};

/// Best accuracy over one-to-one relabelings of `pred`, solved exactly with the Hungarian method.
AccuracyResult accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

/// 0 when either labeling has a single cluster.
double nmi(const std::vector<int>& pred, const std::vector<int>& truth, NmiNorm norm = NmiNorm::geometric);

/// Pair-counting adjusted Rand index. A zero denominator gives 0.
double ari(const std::vector<int>& pred, const std::vector<int>& truth);

struct EvalResult {
    double acc = 0.0;
    double nmi = 0.0;
    double ari = 0.0;
    Matrix confusion;  // rows: predicted label, cols: truth label
    std::vector<int> mapping;
};

EvalResult evaluate(const std::vector<int>& pred, const std::vector<int>& truth, NmiNorm norm = NmiNorm::geometric);

}  // namespace treeeic
