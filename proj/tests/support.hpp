#pragma once

#include <cmath>
#include <cstdint>

#include "gradlite/linalg.hpp"

namespace testing {

using gradlite::Index;
using gradlite::Mat;
using gradlite::Vec;

inline Mat random_mat(Index rows, Index cols, std::uint64_t seed) {
    return gradlite::gaussian_matrix(rows, cols, seed);
}

inline Vec random_vec(Index n, std::uint64_t seed) {
    gradlite::NormalStream rng(seed);
    Vec v(n);
    for (Index i = 0; i < n; ++i) {
        v(i) = rng.next();
    }
    return v;
}

inline Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs) {
        v(i++) = x;
    }
    return v;
}

inline Mat mat(std::initializer_list<std::initializer_list<double>> rows) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = static_cast<Index>(rows.begin()->size());
    Mat m(r, c);
    Index i = 0;
    for (const auto& row : rows) {
        Index j = 0;
        for (double x : row) {
            m(i, j++) = x;
        }
        ++i;
    }
    return m;
}

/// A with prescribed singular values: Q₁·diag(s)·Q₂ᵀ from orthonormalized
/// Gaussian bases.
inline Mat with_singular_values(Index m, Index d, const Vec& s, std::uint64_t seed) {
    const Mat q1 = gradlite::orthonormal_basis(random_mat(m, s.size(), seed));
    const Mat q2 = gradlite::orthonormal_basis(random_mat(d, s.size(), seed + 1));
    return q1 * s.asDiagonal() * q2.transpose();
}

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace testing
