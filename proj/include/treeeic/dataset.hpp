#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "treeeic/numkernel.hpp"

namespace treeeic {

/// Failure while reading an input file; the message names the file and line.
class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Per-view feature matrices sharing N rows, with optional ground-truth labels.
 *
 * Rows of a view that the mask marks missing are kept in place but never read by the pipeline.
 */
struct MultiViewDataset {
    std::vector<Matrix> views;
    std::optional<std::vector<int>> labels;
    int n_clusters = 0;

    std::size_t n_samples() const { return views.empty() ? 0 : static_cast<std::size_t>(views.front().rows()); }
    std::size_t n_views() const { return views.size(); }
    std::vector<int> view_dims() const;

    /// Throws ContractError unless all views share a row count and labels (if any) lie in 0..K-1.
    void validate() const;
};

/// A sample's availability vector: bit v is set iff view v is observed.
struct MissingPattern {
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return bits.size(); }
    int popcount() const;
    /// e.g. "101"
    std::string str() const;
    auto operator<=>(const MissingPattern&) const = default;
};

/// N x V binary availability matrix. Every row has at least one observed view.
class MaskMatrix {
public:
    MaskMatrix() = default;
    /// Takes ownership of row-major 0/1 entries. Throws ContractError on bad values or an all-zero row.
    MaskMatrix(std::size_t n, std::size_t v, std::vector<std::uint8_t> entries);

    static MaskMatrix all_observed(std::size_t n, std::size_t v);

    std::size_t n_samples() const { return n_; }
    std::size_t n_views() const { return v_; }
    bool available(std::size_t i, std::size_t v) const { return entries_[i * v_ + v] != 0; }
    int row_count(std::size_t i) const;
    bool complete(std::size_t i) const { return row_count(i) == static_cast<int>(v_); }
    /// Fraction of samples missing at least one view.
    double incomplete_fraction() const;
    /// Sample ids observed in view v, ascending.
    std::vector<std::size_t> observed(std::size_t v) const;

    bool operator==(const MaskMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::size_t v_ = 0;
    std::vector<std::uint8_t> entries_;
};

enum class Scaling { none, minmax, zscore };

Scaling parse_scaling(const std::string& name);
std::string to_string(Scaling s);

/// How simulate_missing picks the masked views of an incomplete sample.
enum class MaskSampling {
    /// number of masked views uniform on 1..V-1, then a uniform subset of that size
    count_uniform,
    /// uniform over all 2^V - 2 non-trivial patterns
    pattern_uniform,
};

/// Numeric CSV without quoting. `skip_header` drops the first line.
Matrix read_csv_matrix(const std::filesystem::path& path, bool skip_header = false);
void write_csv_matrix(const std::filesystem::path& path, const Matrix& m);

/**
 * Load one CSV per view plus an optional integer label file.
 *
 * Labels are remapped to 0..K-1 in ascending order of their original values; the number of
 * distinct labels must equal `n_clusters`.
 */
MultiViewDataset load_views(const std::vector<std::filesystem::path>& paths,
                            const std::optional<std::filesystem::path>& labels_path, int n_clusters,
                            bool skip_header = false);

std::vector<int> read_labels(const std::filesystem::path& path);

/// Per-column scaling. Min-max maps constant columns to 0; z-score maps them to 0 as well.
MultiViewDataset normalize_features(const MultiViewDataset& ds, Scaling scaling = Scaling::minmax);

/**
 * Mark exactly round(rho * N) random samples incomplete and drop 1..V-1 of their views.
 * Complete rows stay all ones.
 */
MaskMatrix simulate_missing(std::size_t n, std::size_t v, double rho, RngStream& rng,
                            MaskSampling sampling = MaskSampling::count_uniform);

MissingPattern pattern_of(const MaskMatrix& mask, std::size_t i);

void save_mask(const std::filesystem::path& path, const MaskMatrix& mask);
MaskMatrix load_mask(const std::filesystem::path& path);

}  // namespace treeeic
