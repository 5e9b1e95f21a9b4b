#include "treeeic/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace treeeic {

namespace {

std::string location(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

std::vector<double> parse_row(const std::string& text, const std::filesystem::path& path, std::size_t line_no) {
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string::npos) {
            end = text.size();
        }
        std::string cell = text.substr(pos, end - pos);
        const auto first = cell.find_first_not_of(" \t\r");
        const auto last = cell.find_last_not_of(" \t\r");
        if (first == std::string::npos) {
            throw LoadError(location(path, line_no) + ": empty cell");
        }
        cell = cell.substr(first, last - first + 1);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
            throw LoadError(location(path, line_no) + ": non-numeric cell '" + cell + "'");
        }
        row.push_back(value);
        pos = end + 1;
    }
    return row;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

std::vector<int> MultiViewDataset::view_dims() const {
    std::vector<int> dims;
    for (const auto& v : views) {
        dims.push_back(static_cast<int>(v.cols()));
    }
    return dims;
}

void MultiViewDataset::validate() const {
    if (views.empty()) {
        throw ContractError("dataset has no views");
    }
    for (const auto& v : views) {
        if (v.rows() != views.front().rows()) {
            throw ContractError("views disagree on sample count");
        }
    }
    if (labels) {
        if (labels->size() != n_samples()) {
            throw ContractError("label count does not match sample count");
        }
        for (int y : *labels) {
            if (y < 0 || y >= n_clusters) {
                throw ContractError("label out of range 0..K-1");
            }
        }
    }
}

int MissingPattern::popcount() const { return static_cast<int>(std::count(bits.begin(), bits.end(), 1)); }

std::string MissingPattern::str() const {
    std::string s;
    for (auto b : bits) {
        s.push_back(b ? '1' : '0');
    }
    return s;
}

MaskMatrix::MaskMatrix(std::size_t n, std::size_t v, std::vector<std::uint8_t> entries)
    : n_(n), v_(v), entries_(std::move(entries)) {
    if (entries_.size() != n * v) {
        throw ContractError("mask entry count does not match N x V");
    }
    for (std::size_t i = 0; i < n_; ++i) {
        int count = 0;
        for (std::size_t j = 0; j < v_; ++j) {
            const auto e = entries_[i * v_ + j];
            if (e > 1) {
                throw ContractError("mask entries must be 0 or 1");
            }
            count += e;
        }
        if (count == 0) {
            throw ContractError("mask row " + std::to_string(i) + " has no observed view");
        }
    }
}

MaskMatrix MaskMatrix::all_observed(std::size_t n, std::size_t v) {
    return MaskMatrix(n, v, std::vector<std::uint8_t>(n * v, 1));
}

int MaskMatrix::row_count(std::size_t i) const {
    int c = 0;
    for (std::size_t j = 0; j < v_; ++j) {
        c += entries_[i * v_ + j];
    }
    return c;
}

double MaskMatrix::incomplete_fraction() const {
    if (n_ == 0) {
        return 0.0;
    }
    std::size_t incomplete = 0;
    for (std::size_t i = 0; i < n_; ++i) {
        incomplete += complete(i) ? 0 : 1;
    }
    return static_cast<double>(incomplete) / static_cast<double>(n_);
}

std::vector<std::size_t> MaskMatrix::observed(std::size_t v) const {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < n_; ++i) {
        if (available(i, v)) {
            ids.push_back(i);
        }
    }
    return ids;
}

Scaling parse_scaling(const std::string& name) {
    if (name == "none") return Scaling::none;
    if (name == "minmax") return Scaling::minmax;
    if (name == "zscore") return Scaling::zscore;
    throw ContractError("unknown scaling '" + name + "' (expected none, minmax or zscore)");
}

std::string to_string(Scaling s) {
    switch (s) {
        case Scaling::none: return "none";
        case Scaling::minmax: return "minmax";
        case Scaling::zscore: return "zscore";
    }
    return "minmax";
}

Matrix read_csv_matrix(const std::filesystem::path& path, bool skip_header) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError(path.string() + ": cannot open");
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_header && line_no == 1) {
            continue;
        }
        if (blank(line)) {
            continue;
        }
        auto row = parse_row(line, path, line_no);
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw LoadError(location(path, line_no) + ": expected " + std::to_string(rows.front().size()) +
                            " columns, found " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw LoadError(path.string() + ": no data rows");
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

void write_csv_matrix(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) {
        throw LoadError(path.string() + ": cannot open for writing");
    }
    char buf[32];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ',';
            const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m(i, j));
            out.write(buf, ptr - buf);
        }
        out << '\n';
    }
}

std::vector<int> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError(path.string() + ": cannot open");
    }
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) {
            continue;
        }
        const auto first = line.find_first_not_of(" \t");
        const auto last = line.find_last_not_of(" \t\r");
        const std::string cell = line.substr(first, last - first + 1);
        int value = 0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (ec != std::errc() || ptr != cell.data() + cell.size()) {
            throw LoadError(location(path, line_no) + ": non-integer label '" + cell + "'");
        }
        labels.push_back(value);
    }
    return labels;
}

MultiViewDataset load_views(const std::vector<std::filesystem::path>& paths,
                            const std::optional<std::filesystem::path>& labels_path, int n_clusters,
                            bool skip_header) {
    if (paths.empty()) {
        throw ContractError("load_views: no view files given");
    }
    if (n_clusters < 2) {
        throw ContractError("load_views: K must be at least 2");
    }
    MultiViewDataset ds;
    ds.n_clusters = n_clusters;
    for (const auto& p : paths) {
        Matrix m = read_csv_matrix(p, skip_header);
        if (!ds.views.empty() && m.rows() != ds.views.front().rows()) {
            throw LoadError(p.string() + ": has " + std::to_string(m.rows()) + " rows but " +
                            paths.front().string() + " has " + std::to_string(ds.views.front().rows()));
        }
        ds.views.push_back(std::move(m));
    }
    if (labels_path) {
        auto raw = read_labels(*labels_path);
        if (raw.size() != ds.n_samples()) {
            throw LoadError(labels_path->string() + ": has " + std::to_string(raw.size()) + " labels but views have " +
                            std::to_string(ds.n_samples()) + " rows");
        }
        std::map<int, int> remap;
        for (int y : raw) {
            remap.emplace(y, 0);
        }
        if (static_cast<int>(remap.size()) != n_clusters) {
            throw LoadError(labels_path->string() + ": " + std::to_string(remap.size()) +
                            " distinct labels but K = " + std::to_string(n_clusters));
        }
        int next = 0;
        for (auto& [orig, mapped] : remap) {
            mapped = next++;
        }
        std::vector<int> labels;
        labels.reserve(raw.size());
        for (int y : raw) {
            labels.push_back(remap.at(y));
        }
        ds.labels = std::move(labels);
    }
    return ds;
}

MultiViewDataset normalize_features(const MultiViewDataset& ds, Scaling scaling) {
    if (ds.views.empty()) {
        throw ContractError("normalize_features: dataset has no views");
    }
    MultiViewDataset out = ds;
    if (scaling == Scaling::none) {
        return out;
    }
    for (auto& x : out.views) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            auto col = x.col(c);
            if (scaling == Scaling::minmax) {
                const double lo = col.minCoeff();
                const double hi = col.maxCoeff();
                if (hi > lo) {
                    col = (col.array() - lo) / (hi - lo);
                } else {
                    col.setZero();
                }
            } else {
                const double mean = col.mean();
                const double var = (col.array() - mean).square().mean();
                if (var > 0.0) {
                    col = (col.array() - mean) / std::sqrt(var);
                } else {
                    col.setZero();
                }
            }
        }
    }
    return out;
}

MaskMatrix simulate_missing(std::size_t n, std::size_t v, double rho, RngStream& rng, MaskSampling sampling) {
    if (v < 2) {
        throw ContractError("simulate_missing: need at least 2 views");
    }
    if (!(rho >= 0.0 && rho <= 1.0)) {
        throw ContractError("simulate_missing: rho must lie in [0, 1]");
    }
    // round half up
    const auto n_incomplete = static_cast<std::size_t>(std::floor(rho * static_cast<double>(n) + 0.5));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<std::uint8_t> entries(n * v, 1);
    std::vector<std::size_t> views(v);
    for (std::size_t r = 0; r < n_incomplete; ++r) {
        const std::size_t i = order[r];
        if (sampling == MaskSampling::count_uniform) {
            const std::size_t n_masked = 1 + static_cast<std::size_t>(rng.uniform_int(v - 1));
            std::iota(views.begin(), views.end(), 0);
            rng.shuffle(views);
            for (std::size_t k = 0; k < n_masked; ++k) {
                entries[i * v + views[k]] = 0;
            }
        } else {
            // patterns 1 .. 2^V - 2 exclude the all-missing and all-observed rows
            const std::uint64_t n_patterns = (std::uint64_t{1} << v) - 2;
            const std::uint64_t pattern = 1 + rng.uniform_int(n_patterns);
            for (std::size_t k = 0; k < v; ++k) {
                entries[i * v + k] = static_cast<std::uint8_t>((pattern >> k) & 1U);
            }
        }
    }
    return MaskMatrix(n, v, std::move(entries));
}

MissingPattern pattern_of(const MaskMatrix& mask, std::size_t i) {
    if (i >= mask.n_samples()) {
        throw ContractError("pattern_of: sample index " + std::to_string(i) + " out of range");
    }
    MissingPattern p;
    p.bits.resize(mask.n_views());
    for (std::size_t v = 0; v < mask.n_views(); ++v) {
        p.bits[v] = mask.available(i, v) ? 1 : 0;
    }
    return p;
}

void save_mask(const std::filesystem::path& path, const MaskMatrix& mask) {
    std::ofstream out(path);
    if (!out) {
        throw LoadError(path.string() + ": cannot open for writing");
    }
    for (std::size_t i = 0; i < mask.n_samples(); ++i) {
        for (std::size_t v = 0; v < mask.n_views(); ++v) {
            if (v > 0) out << ',';
            out << (mask.available(i, v) ? '1' : '0');
        }
        out << '\n';
    }
}

MaskMatrix load_mask(const std::filesystem::path& path) {
    const Matrix m = read_csv_matrix(path);
    std::vector<std::uint8_t> entries;
    entries.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double e = m(i, j);
            if (e != 0.0 && e != 1.0) {
                throw LoadError(location(path, static_cast<std::size_t>(i) + 1) + ": mask entries must be 0 or 1");
            }
            entries.push_back(static_cast<std::uint8_t>(e));
        }
    }
    try {
        return MaskMatrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), std::move(entries));
    } catch (const ContractError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

}  // namespace treeeic
