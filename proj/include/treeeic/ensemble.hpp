#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "treeeic/groupwise.hpp"
#include "treeeic/numkernel.hpp"

namespace treeeic {

/// A pipeline stage produced nothing usable (e.g. every decision set was skipped).
class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Optimal square assignment (Kuhn-Munkres with potentials, O(K^3)).
 * Returns perm with perm[row] = column, minimising the summed cost.
 */
std::vector<int> hungarian(const Matrix& cost);

double assignment_cost(const Matrix& cost, const std::vector<int>& perm);

/**
 * Aligned per-set decisions over the union of their samples.
 *
 * Slice s holds the decisions of group set_indices[s]: row r refers to sample_ids[r] and is
 * all-zero when that sample is not in the group.
 */
struct DecisionTensor {
    std::vector<std::size_t> sample_ids;
    std::vector<std::size_t> set_indices;
    std::vector<Matrix> decisions;
    std::vector<std::vector<std::uint8_t>> presence;
    /// alignment[s][a] = original column of group s that became column a
    std::vector<std::vector<int>> alignment;

    std::size_t n_slices() const { return decisions.size(); }
    std::size_t n_samples() const { return sample_ids.size(); }
};

/**
 * Map every non-skipped group into the label space of a reference group and stack them.
 *
 * The reference is the largest group (lowest set index on ties). Remaining groups are aligned
 * one at a time, always picking the group with the most samples already covered by aligned
 * groups. Its permutation maximises the agreement sum over shared samples between the running
 * consensus (the sum of aligned decisions) and its own columns. A group sharing no sample with
 * the covered set keeps its labels and a warning is recorded.
 *
 * Throws PipelineError when every group was skipped.
 */
DecisionTensor align_decisions(const std::vector<GroupDecision>& groups, Diagnostics* diag = nullptr);

/// Per-(slice, sample) weights broadcast across the K columns; zero where the sample is absent.
struct WeightTensor {
    std::vector<Matrix> weights;
};

/**
 * Inverse-entropy weights, normalised over the slices that contain each sample.
 *
 * e = 1 / H with H = -sum_k d_k log(d_k + eps). H is floored at eps so an exactly one-hot row,
 * whose H is -log(1 + eps) < 0, gets the largest weight 1/eps instead of a negative one.
 */
WeightTensor uncertainty_weights(const DecisionTensor& d, double eps = 1e-12);

/// Equal weight for every slice containing a sample (the ablation without entropy weighting).
WeightTensor uniform_weights(const DecisionTensor& d);

struct EnsembleDecision {
    std::vector<std::size_t> sample_ids;
    Matrix probs;
};

/// Row-normalised sum over slices of weights * decisions.
EnsembleDecision ensemble_decision(const DecisionTensor& d, const WeightTensor& e);

}  // namespace treeeic
