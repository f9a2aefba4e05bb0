#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gradlite/problems.hpp"

namespace gradlite {

namespace {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

}  // namespace

Dataset synth_dataset(std::uint64_t seed, Index n, Index d, DatasetKind kind) {
    if (n < 1 || d < 1) {
        throw ConfigError("synth_dataset: n and d must be >= 1");
    }
    Dataset data;
    data.seed = seed;
    if (kind == DatasetKind::gaussian_logistic) {
        data.x = gaussian_matrix(n, d, derive_seed(seed, 0));
        const Vec w = gaussian_matrix(d, 1, derive_seed(seed, 1)) / std::sqrt(static_cast<double>(d));
        SplitMix64 coin(derive_seed(seed, 2));
        data.y.resize(n);
        for (Index i = 0; i < n; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-data.x.row(i).dot(w)));
            data.y(i) = coin.uniform() < p ? 1.0 : 0.0;
        }
        return data;
    }

    // X = U·diag(s)·Vᵀ with geometric decay from √n down to √n / cond.
    const Index rank = std::min(n, d);
    const Mat u = orthonormal_basis(gaussian_matrix(n, rank, derive_seed(seed, 0)));
    const Mat v = orthonormal_basis(gaussian_matrix(d, rank, derive_seed(seed, 1)));
    Vec s(rank);
    const double top = std::sqrt(static_cast<double>(n));
    for (Index i = 0; i < rank; ++i) {
        const double frac = rank == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(rank - 1);
        s(i) = top * std::pow(kLowRankCondition, -frac);
    }
    data.x = u * s.asDiagonal() * v.transpose();
    const Vec w = gaussian_matrix(d, 1, derive_seed(seed, 2)) / std::sqrt(static_cast<double>(d));
    const Vec noise = gaussian_matrix(n, 1, derive_seed(seed, 3));
    data.y = matvec(data.x, w) + 0.1 * noise;
    return data;
}

Dataset binarize_targets(Dataset data) {
    for (Index i = 0; i < data.y.size(); ++i) {
        data.y(i) = data.y(i) > 0.0 ? 1.0 : 0.0;
    }
    return data;
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
    for (Index j = 0; j < data.x.cols(); ++j) {
        out << 'x' << j << ',';
    }
    out << "target\n";
    for (Index i = 0; i < data.x.rows(); ++i) {
        for (Index j = 0; j < data.x.cols(); ++j) {
            out << format_g17(data.x(i, j)) << ',';
        }
        out << format_g17(data.y(i)) << '\n';
    }
}

Dataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("dataset csv: missing header");
    }
    const std::vector<std::string> header = split_csv(line);
    if (header.size() < 2 || header.back() != "target") {
        throw DataError("dataset csv: header must list features then 'target'");
    }
    const std::size_t cols = header.size();
    std::vector<double> values;
    Index rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> cells = split_csv(line);
        if (cells.size() != cols) {
            throw DataError("dataset csv: row " + std::to_string(rows + 1) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(cols));
        }
        for (const std::string& cell : cells) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cell.size() || cell.empty()) {
                throw DataError("dataset csv: bad number '" + cell + "'");
            }
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) {
        throw DataError("dataset csv: no rows");
    }
    Dataset data;
    const Index features = static_cast<Index>(cols) - 1;
    data.x.resize(rows, features);
    data.y.resize(rows);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < features; ++j) {
            data.x(i, j) = values[static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(j)];
        }
        data.y(i) = values[static_cast<std::size_t>(i) * cols + cols - 1];
    }
    require_finite(data.x, "dataset csv");
    require_finite(data.y, "dataset csv");
    return data;
}

}  // namespace gradlite
