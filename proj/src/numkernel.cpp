#include "treeeic/numkernel.hpp"

#include <cmath>
#include <numbers>

namespace treeeic {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Matrix pairwise_sqdist(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ContractError("pairwise_sqdist: column mismatch (" + std::to_string(a.cols()) + " vs " +
                            std::to_string(b.cols()) + ")");
    }
    Matrix out(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            out(i, j) = (a.row(i) - b.row(j)).squaredNorm();
        }
    }
    return out;
}

Matrix row_normalize(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double s = m.row(i).sum();
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw DegenerateRowError(static_cast<std::size_t>(i));
        }
        out.row(i) = m.row(i) / s;
    }
    return out;
}

Matrix take_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(rows[r]);
        if (i >= m.rows()) {
            throw ContractError("take_rows: row " + std::to_string(rows[r]) + " out of range");
        }
        out.row(static_cast<Eigen::Index>(r)) = m.row(i);
    }
    return out;
}

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw ContractError(std::string(what) + " contains non-finite values");
    }
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) {
        s = splitmix64(x);
    }
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::uniform_int(std::uint64_t bound) {
    if (bound == 0) {
        throw ContractError("uniform_int: bound must be positive");
    }
    // rejection on the top of the range keeps every residue equally likely
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

double RngStream::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

RngStream RngStream::split() { return RngStream(next_u64()); }

}  // namespace treeeic
