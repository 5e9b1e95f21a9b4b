#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

/**
 * @file numkernel.hpp
 *
 * @brief Dense matrix and random number primitives shared by every other module.
 */
namespace treeeic {

/// Row-major dense matrix of doubles. Every matrix-valued quantity in the pipeline uses this type.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Raised when a caller breaks an operation's precondition (shape mismatch, out-of-range argument).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by row_normalize when a row sums to zero.
class DegenerateRowError : public std::domain_error {
public:
    DegenerateRowError(std::size_t row)
        : std::domain_error("row " + std::to_string(row) + " has zero sum"), row_(row) {}
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

/// Collects non-fatal warnings (degenerate columns, unaligned groups) raised during a run.
struct Diagnostics {
    std::vector<std::string> warnings;
    void warn(std::string message) { warnings.push_back(std::move(message)); }
};

/// Squared Euclidean distances between every row of `a` and every row of `b`, computed directly (no norm expansion).
Matrix pairwise_sqdist(const Matrix& a, const Matrix& b);

/// Scale each row to sum to one. Throws DegenerateRowError for a zero-sum row.
Matrix row_normalize(const Matrix& m);

/// Copy of the listed rows, in the order given.
Matrix take_rows(const Matrix& m, std::span<const std::size_t> rows);

/// Throws ContractError if any entry is NaN or infinite. `what` names the quantity in the message.
void require_finite(const Matrix& m, const char* what);

/**
 * Seeded xoshiro256** stream.
 *
 * The stream owns its state explicitly; nothing in the library touches a global generator.
 * Child streams from split() are independent of the parent's later draws, so work
 * handed to children produces the same numbers in any execution order.
 */
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 bits of precision.
    double uniform();

    /// Uniform integer in [0, bound). `bound` must be positive.
    std::uint64_t uniform_int(std::uint64_t bound);

    /// Standard normal via Box-Muller; the spare value is cached.
    double gaussian();

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(i));
            std::swap(values[i - 1], values[j]);
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& values) {
        shuffle(std::span<T>(values));
    }

    /// New stream seeded from this one's next draw. Advances this stream by one draw.
    RngStream split();

private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace treeeic
