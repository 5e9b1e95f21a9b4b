#pragma once

#include <cstddef>
#include <vector>

#include "treeeic/dataset.hpp"

/**
 * @file mpt.hpp
 *
 * @brief Missing-pattern tree: threshold selection, pruned enumeration and sample grouping.
 *
 * The tree has one level per view; a root-to-leaf path assigns 1 (observed) or 0 (missing)
 * to every view. Only paths with exactly tau ones survive the pruning, and each surviving
 * pattern defines a decision set of samples that observe all of its tau views.
 */
namespace treeeic {

/// The surviving leaves of a pruned tree, in lexicographic order with 0 before 1.
struct PatternSet {
    int tau = 0;
    std::vector<MissingPattern> patterns;
    /// Tree nodes visited by the walk, root included.
    std::size_t nodes_visited = 0;
};

/// Samples observing every view of one pattern.
struct DecisionSet {
    MissingPattern pattern;
    std::vector<std::size_t> view_ids;
    std::vector<std::size_t> sample_ids;
};

/**
 * tau = round_half_up(V/2 + (tau_max - V/2) * (1 - rho)^2), clamped to [2, tau_max].
 * Requires 2 <= tau_max <= V and rho in [0, 1].
 */
int compute_tau(int n_views, int tau_max, double rho);

/// Depth-first walk of the missing-pattern tree. Requires 1 <= tau <= V.
PatternSet enumerate_patterns(int n_views, int tau);

/// One decision set per pattern, empty sets kept so indices line up with the patterns.
std::vector<DecisionSet> group_samples(const MaskMatrix& mask, const PatternSet& patterns);

/// Sorted, de-duplicated union of all sample ids.
std::vector<std::size_t> union_samples(const std::vector<DecisionSet>& sets);

}  // namespace treeeic
