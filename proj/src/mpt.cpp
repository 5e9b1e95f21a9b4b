#include "treeeic/mpt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace treeeic {

int compute_tau(int n_views, int tau_max, double rho) {
    if (tau_max > n_views) {
        throw ContractError("compute_tau: tau_max " + std::to_string(tau_max) + " exceeds view count " +
                            std::to_string(n_views));
    }
    if (tau_max < 2) {
        throw ContractError("compute_tau: tau_max must be at least 2");
    }
    if (!(rho >= 0.0 && rho <= 1.0)) {
        throw ContractError("compute_tau: rho must lie in [0, 1]");
    }
    const double half = static_cast<double>(n_views) / 2.0;
    const double keep = (1.0 - rho) * (1.0 - rho);
    const double raw = half + (static_cast<double>(tau_max) - half) * keep;
    const int tau = static_cast<int>(std::floor(raw + 0.5));
    return std::clamp(tau, 2, tau_max);
}

namespace {

struct TreeWalk {
    int n_views;
    int tau;
    std::vector<std::uint8_t> path;
    PatternSet* out;

    // `depth` views have been decided and `ones` of them are observed
    void visit(int depth, int ones) {
        ++out->nodes_visited;
        if (ones > tau || n_views - depth < tau - ones) {
            return;
        }
        if (depth == n_views) {
            out->patterns.push_back(MissingPattern{path});
            return;
        }
        for (std::uint8_t bit : {std::uint8_t{0}, std::uint8_t{1}}) {
            path.push_back(bit);
            visit(depth + 1, ones + bit);
            path.pop_back();
        }
    }
};

}  // namespace

PatternSet enumerate_patterns(int n_views, int tau) {
    if (n_views < 1 || tau < 1 || tau > n_views) {
        throw ContractError("enumerate_patterns: tau " + std::to_string(tau) + " outside 1.." +
                            std::to_string(n_views));
    }
    PatternSet out;
    out.tau = tau;
    TreeWalk walk{n_views, tau, {}, &out};
    walk.path.reserve(static_cast<std::size_t>(n_views));
    walk.visit(0, 0);
    return out;
}

std::vector<DecisionSet> group_samples(const MaskMatrix& mask, const PatternSet& patterns) {
    std::vector<DecisionSet> sets;
    sets.reserve(patterns.patterns.size());
    for (const auto& pattern : patterns.patterns) {
        if (pattern.size() != mask.n_views()) {
            throw ContractError("group_samples: pattern width does not match mask");
        }
        DecisionSet set;
        set.pattern = pattern;
        for (std::size_t v = 0; v < pattern.size(); ++v) {
            if (pattern.bits[v]) set.view_ids.push_back(v);
        }
        for (std::size_t i = 0; i < mask.n_samples(); ++i) {
            int overlap = 0;
            for (std::size_t v : set.view_ids) {
                overlap += mask.available(i, v) ? 1 : 0;
            }
            if (overlap == patterns.tau) {
                set.sample_ids.push_back(i);
            }
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

std::vector<std::size_t> union_samples(const std::vector<DecisionSet>& sets) {
    std::vector<std::size_t> ids;
    for (const auto& s : sets) {
        ids.insert(ids.end(), s.sample_ids.begin(), s.sample_ids.end());
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

}  // namespace treeeic
