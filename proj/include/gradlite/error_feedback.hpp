#pragma once

#include "gradlite/linalg.hpp"

namespace gradlite {

/// `paper` keeps adding residuals (r ← r + Δ) even after r has been applied;
/// `ef_standard` stores only the newest residual (r ← Δ).
enum class AccumulatorMode { paper, ef_standard };

/// Source of the residual estimate Δ.
enum class Probe { exact, none };

template <typename Scalar>
struct ErrorAccumulator {
    VecT<Scalar> r;
    AccumulatorMode mode = AccumulatorMode::ef_standard;

    static ErrorAccumulator zeros(Index d, AccumulatorMode mode) {
        return ErrorAccumulator{VecT<Scalar>::Zero(d), mode};
    }
};

template <typename Scalar>
struct DeltaEstimate {
    VecT<Scalar> delta;
    bool exact = false;
};

/// ĝ = g̃ + r.
template <typename Scalar, typename Derived>
VecT<Scalar> correct(const Eigen::MatrixBase<Derived>& g_tilde, const ErrorAccumulator<Scalar>& acc) {
    require_dims(g_tilde.size(), acc.r.size(), "correct");
    return g_tilde + acc.r;
}

/// Δ from an already-computed exact gradient.
template <typename Scalar, typename DerivedG, typename DerivedT>
DeltaEstimate<Scalar> delta_from_exact(const Eigen::MatrixBase<DerivedG>& g_exact,
                                       const Eigen::MatrixBase<DerivedT>& g_tilde) {
    require_dims(g_tilde.size(), g_exact.size(), "delta_from_exact");
    return DeltaEstimate<Scalar>{g_exact - g_tilde, true};
}

/// Δ = Jᵀδ − g̃ when probing the materialized Jacobian; zero (and flagged
/// inexact) when no probe is available.
template <typename DerivedJ, typename DerivedS, typename DerivedT>
DeltaEstimate<typename DerivedJ::Scalar> estimate_delta(const Eigen::MatrixBase<DerivedJ>& j,
                                                        const Eigen::MatrixBase<DerivedS>& signal,
                                                        const Eigen::MatrixBase<DerivedT>& g_tilde,
                                                        Probe probe) {
    using Scalar = typename DerivedJ::Scalar;
    require_dims(g_tilde.size(), j.cols(), "estimate_delta");
    if (probe == Probe::none) {
        return DeltaEstimate<Scalar>{VecT<Scalar>::Zero(g_tilde.size()), false};
    }
    return delta_from_exact<Scalar>(matvec_t(j, signal), g_tilde);
}

template <typename Scalar>
ErrorAccumulator<Scalar> update_accumulator(ErrorAccumulator<Scalar> acc,
                                            const DeltaEstimate<Scalar>& delta) {
    require_dims(delta.delta.size(), acc.r.size(), "update_accumulator");
    if (acc.mode == AccumulatorMode::paper) {
        acc.r += delta.delta;
    } else {
        acc.r = delta.delta;
    }
    return acc;
}

}  // namespace gradlite
