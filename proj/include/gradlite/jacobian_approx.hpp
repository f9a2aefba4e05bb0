#pragma once

#include <cstdint>
#include <string>

#include "gradlite/linalg.hpp"

namespace gradlite {

enum class BasisMode { svd, random_projection };

/// When and how the low-rank factor is recomputed.
struct RefreshPolicy {
    Index period = 10;
    BasisMode mode = BasisMode::svd;
    /// Power steps handed to truncated_svd in svd mode.
    int power_iters = 4;

    void validate() const {
        if (period < 1) {
            throw ConfigError("refresh period must be >= 1");
        }
        if (power_iters < 1) {
            throw ConfigError("power iterations must be >= 1");
        }
    }
};

/// J ≈ u·vᵀ with u (m×k, orthonormal columns) and v (d×k) carrying the singular
/// values, so the approximate gradient is two matvecs with no diagonal step.
template <typename Scalar>
struct LowRankFactor {
    MatT<Scalar> u;
    MatT<Scalar> v;
    Index k = 0;
    std::int64_t birth_step = 0;

    Index signal_dim() const { return u.rows(); }
    Index param_dim() const { return v.rows(); }
    /// Scalars held while the factor is resident.
    Index stored_scalars() const { return u.size() + v.size(); }
};

template <typename Derived>
LowRankFactor<typename Derived::Scalar> factorize(const Eigen::MatrixBase<Derived>& j, Index k,
                                                  const RefreshPolicy& policy, std::int64_t step,
                                                  std::uint64_t seed) {
    using Scalar = typename Derived::Scalar;
    policy.validate();
    const Index full = std::min(j.rows(), j.cols());
    if (k < 1 || k > full) {
        throw RankError("factorize: rank " + std::to_string(k) + " outside [1, " +
                        std::to_string(full) + "]");
    }
    require_finite(j, "factorize");

    LowRankFactor<Scalar> out;
    out.k = k;
    out.birth_step = step;
    if (policy.mode == BasisMode::svd) {
        SvdResult<Scalar> svd = truncated_svd(j, k, policy.power_iters, seed);
        out.u = std::move(svd.u);
        out.v = svd.v * svd.s.asDiagonal();
    } else {
        // Basis depends only on (shape, seed), never on j.
        out.u = orthonormal_basis(gaussian_matrix<Scalar>(j.rows(), k, seed));
        out.v = j.transpose() * out.u;
    }
    return out;
}

/// δ′ = uᵀδ, the k scalars that replace the m-dimensional error signal.
template <typename Scalar, typename Derived>
VecT<Scalar> projected_signal(const LowRankFactor<Scalar>& factor,
                              const Eigen::MatrixBase<Derived>& delta) {
    require_dims(delta.size(), factor.signal_dim(), "projected_signal");
    return matvec_t(factor.u, delta);
}

/// g̃ = v·δ′.
template <typename Scalar, typename Derived>
VecT<Scalar> reconstruct_gradient(const LowRankFactor<Scalar>& factor,
                                  const Eigen::MatrixBase<Derived>& delta_proj) {
    require_dims(delta_proj.size(), factor.k, "reconstruct_gradient");
    return matvec(factor.v, delta_proj);
}

/// g̃ = v·(uᵀδ), always through the k-dimensional intermediate; u·vᵀ is never
/// formed.
template <typename Scalar, typename Derived>
VecT<Scalar> approx_gradient(const LowRankFactor<Scalar>& factor,
                             const Eigen::MatrixBase<Derived>& delta) {
    return reconstruct_gradient(factor, projected_signal(factor, delta));
}

template <typename Scalar>
bool refresh_due(const LowRankFactor<Scalar>& factor, std::int64_t step,
                 const RefreshPolicy& policy) {
    return step - factor.birth_step >= policy.period;
}

template <typename Scalar, typename Derived>
LowRankFactor<Scalar> maybe_refresh(LowRankFactor<Scalar> factor,
                                    const Eigen::MatrixBase<Derived>& j_current,
                                    std::int64_t step, const RefreshPolicy& policy,
                                    std::uint64_t seed) {
    if (j_current.rows() != factor.signal_dim() || j_current.cols() != factor.param_dim()) {
        throw DimError("maybe_refresh: jacobian shape changed");
    }
    if (!refresh_due(factor, step, policy)) {
        return factor;
    }
    return factorize(j_current, factor.k, policy, step, seed);
}

}  // namespace gradlite
