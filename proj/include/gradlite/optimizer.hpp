#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "gradlite/error_feedback.hpp"
#include "gradlite/jacobian_approx.hpp"
#include "gradlite/linalg.hpp"
#include "gradlite/problems.hpp"

namespace gradlite {

/// Error-feedback variant used by gradlite_step. `off` drops the accumulator
/// entirely (ĝ = g̃).
enum class EfMode { paper, ef_standard, off };

/// |θᵢ| above this is treated as divergence.
inline constexpr double kDivergenceBound = 1e12;

struct GradLiteConfig {
    double eta = 0.05;
    Index k = 8;
    /// Use k = min(m, block size) for every block instead of `k`.
    bool full_rank = false;
    Index tau = 10;
    EfMode ef_mode = EfMode::ef_standard;
    Probe probe = Probe::exact;
    BasisMode basis = BasisMode::svd;
    std::uint64_t seed = 0;
    int power_iters = 4;

    void validate() const;
    RefreshPolicy refresh_policy() const { return {tau, basis, power_iters}; }
    Index rank_for(Index m, Index block_size) const;
};

struct AdamConfig {
    double eta = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

struct GaloreConfig {
    double eta = 0.05;
    Index k = 8;
    Index tau = 10;
    std::uint64_t seed = 0;
    int power_iters = 4;

    void validate() const;
};

/// Per-block GradLite state: the current factor (absent until the first step)
/// and the residual accumulator (empty while error feedback is off).
struct BlockState {
    std::optional<LowRankFactor<double>> factor;
    ErrorAccumulator<double> acc;
};

struct GaloreState {
    Mat basis;
    bool identity = false;
    std::deque<Vec> window;
    std::int64_t birth_step = -1;
};

struct OptimizerState {
    Vec theta;
    std::vector<BlockRange> layout;
    std::vector<BlockState> blocks;
    std::int64_t step = 0;
    Vec adam_m;
    Vec adam_v;
    GaloreState galore;
    /// Σ of the iterates θ₁ … θ_step produced so far.
    Vec theta_sum;

    static OptimizerState start(const Problem& problem, Vec theta0);

    /// Scalars the optimizer keeps between steps (factors, accumulators,
    /// moments, projection bases, gradient windows). θ itself is excluded.
    Index resident_scalars() const;
};

/// Intermediates of one step. Vectors over parameters are concatenated across
/// blocks; delta_proj holds k entries per block.
struct StepTrace {
    Vec delta;
    Vec delta_proj;
    Vec g_tilde;
    Vec g_hat;
    Vec big_delta;
    std::optional<Vec> g_exact;
    double loss = 0.0;
};

using StepResult = std::pair<OptimizerState, StepTrace>;

/// One GradLite step: loss and δ at θ_t, factor refresh, δ′ = uᵀδ, g̃ = vδ′,
/// ĝ = g̃ + r, Δ, accumulator update, θ_{t+1} = θ_t − η·ĝ.
StepResult gradlite_step(OptimizerState state, Problem& problem, const Batch& batch,
                         const GradLiteConfig& cfg);

StepResult sgd_step(OptimizerState state, Problem& problem, const Batch& batch, double eta);

StepResult adam_step(OptimizerState state, Problem& problem, const Batch& batch,
                     const AdamConfig& cfg);

/// Exact gradient projected onto the top-k left singular subspace of a window
/// of the last τ gradients; the basis is recomputed every τ steps.
StepResult galore_like_step(OptimizerState state, Problem& problem, const Batch& batch,
                            const GaloreConfig& cfg);

/// θ̄ = theta_sum / step.
Vec averaged_iterate(const OptimizerState& state);

}  // namespace gradlite
