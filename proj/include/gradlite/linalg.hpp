#pragma once

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "gradlite/errors.hpp"
#include "gradlite/rng.hpp"

namespace gradlite {

using Index = Eigen::Index;

template <typename Scalar>
using VecT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vec = VecT<double>;
using Mat = MatT<double>;

/// Leading-k singular triplets. Columns of u and v are orthonormal and s is
/// nonincreasing.
template <typename Scalar>
struct SvdResult {
    MatT<Scalar> u;
    VecT<Scalar> s;
    MatT<Scalar> v;
};

/// Extra sketch columns beyond the target rank in truncated_svd.
inline constexpr Index kSketchOversampling = 5;

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& x, const std::string& what) {
    if (!x.allFinite()) {
        throw NumError(what + ": non-finite entry");
    }
}

template <typename Derived>
void require_nonempty(const Eigen::DenseBase<Derived>& x, const std::string& what) {
    if (x.size() == 0) {
        throw DimError(what + ": empty operand");
    }
}

inline void require_dims(Index got, Index want, const std::string& what) {
    if (got != want) {
        throw DimError(what + ": expected length " + std::to_string(want) + ", got " +
                       std::to_string(got));
    }
}

/// a·x with a fixed summation order: each output sums over ascending column index.
template <typename MatDerived, typename VecDerived>
VecT<typename MatDerived::Scalar> matvec(const Eigen::MatrixBase<MatDerived>& a,
                                         const Eigen::MatrixBase<VecDerived>& x) {
    using Scalar = typename MatDerived::Scalar;
    require_dims(x.size(), a.cols(), "matvec");
    VecT<Scalar> out(a.rows());
    for (Index i = 0; i < a.rows(); ++i) {
        Scalar acc = 0;
        for (Index j = 0; j < a.cols(); ++j) {
            acc += a(i, j) * x(j);
        }
        out(i) = acc;
    }
    return out;
}

/// aᵀ·y. Entry j sums a(i, j)·y(i) over ascending row index i, which makes the
/// result identical to the textbook double loop.
template <typename MatDerived, typename VecDerived>
VecT<typename MatDerived::Scalar> matvec_t(const Eigen::MatrixBase<MatDerived>& a,
                                           const Eigen::MatrixBase<VecDerived>& y) {
    using Scalar = typename MatDerived::Scalar;
    require_dims(y.size(), a.rows(), "matvec_t");
    VecT<Scalar> out = VecT<Scalar>::Zero(a.cols());
    for (Index i = 0; i < a.rows(); ++i) {
        const Scalar yi = y(i);
        for (Index j = 0; j < a.cols(); ++j) {
            out(j) += a(i, j) * yi;
        }
    }
    return out;
}

/// Row-major fill from a seeded normal stream.
template <typename Scalar = double>
MatT<Scalar> gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
    NormalStream normal(seed);
    MatT<Scalar> out(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            out(i, j) = static_cast<Scalar>(normal.next());
        }
    }
    return out;
}

/// Thin Q of a Householder QR; spans at least the column space of y.
template <typename Derived>
MatT<typename Derived::Scalar> orthonormal_basis(const Eigen::MatrixBase<Derived>& y) {
    using Scalar = typename Derived::Scalar;
    using ColMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Eigen::HouseholderQR<ColMat> qr(y.eval());
    ColMat thin = qr.householderQ() * ColMat::Identity(y.rows(), y.cols());
    return thin;
}

/// Flips each (u_j, v_j) pair so the largest-magnitude entry of u_j is positive.
/// Ties go to the lowest row index.
template <typename Scalar>
void canonicalize_signs(MatT<Scalar>& u, MatT<Scalar>& v) {
    for (Index j = 0; j < u.cols(); ++j) {
        Index arg = 0;
        Scalar best = -1;
        for (Index i = 0; i < u.rows(); ++i) {
            const Scalar mag = std::abs(u(i, j));
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        if (u(arg, j) < 0) {
            u.col(j) *= Scalar(-1);
            v.col(j) *= Scalar(-1);
        }
    }
}

/// Rank-k SVD by randomized subspace iteration: a Gaussian sketch with
/// kSketchOversampling extra columns, `iters` re-orthonormalized power steps,
/// then a two-sided Jacobi SVD of the small projected matrix.
/// Deterministic for fixed (a, k, iters, seed).
template <typename Derived>
SvdResult<typename Derived::Scalar> truncated_svd(const Eigen::MatrixBase<Derived>& a, Index k,
                                                  int iters, std::uint64_t seed) {
    using Scalar = typename Derived::Scalar;
    using ColMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Index m = a.rows();
    const Index d = a.cols();
    if (m == 0 || d == 0) {
        throw DimError("truncated_svd: empty matrix");
    }
    const Index full = std::min(m, d);
    if (k < 1 || k > full) {
        throw RankError("truncated_svd: rank " + std::to_string(k) + " outside [1, " +
                        std::to_string(full) + "]");
    }
    if (iters < 1) {
        throw ConfigError("truncated_svd: iters must be >= 1");
    }
    require_finite(a, "truncated_svd");

    const Index width = std::min(k + kSketchOversampling, full);
    const ColMat omega = gaussian_matrix<Scalar>(d, width, seed);
    ColMat q = orthonormal_basis(a * omega);
    for (int it = 0; it < iters; ++it) {
        const ColMat z = orthonormal_basis(a.transpose() * q);
        q = orthonormal_basis(a * z);
    }

    const ColMat small = q.transpose() * a;
    Eigen::JacobiSVD<ColMat> svd(small, Eigen::ComputeThinU | Eigen::ComputeThinV);

    SvdResult<Scalar> out;
    out.u = q * svd.matrixU().leftCols(k);
    out.s = svd.singularValues().head(k);
    out.v = svd.matrixV().leftCols(k);
    canonicalize_signs(out.u, out.v);
    return out;
}

/// ‖a − u·vᵀ‖_F. Callers pass v with the singular values already folded in.
template <typename A, typename U, typename V>
typename A::Scalar frob_residual(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<U>& u,
                                 const Eigen::MatrixBase<V>& v) {
    if (u.rows() != a.rows() || v.rows() != a.cols() || u.cols() != v.cols()) {
        throw DimError("frob_residual: factor shapes do not conform to " +
                       std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
    return (a - u * v.transpose()).norm();
}

template <typename Scalar>
typename Eigen::NumTraits<Scalar>::Real frob_residual(const MatT<Scalar>& a,
                                                      const SvdResult<Scalar>& svd) {
    return frob_residual(a, svd.u, svd.v * svd.s.asDiagonal());
}

}  // namespace gradlite
