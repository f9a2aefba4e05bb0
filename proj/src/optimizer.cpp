#include "gradlite/optimizer.hpp"

#include <cmath>
#include <string>

namespace gradlite {

namespace {

void check_finite_step(const Vec& v, std::int64_t step, const char* what) {
    if (!v.allFinite()) {
        throw DivergedError(step, std::string("non-finite ") + what);
    }
}

void check_iterate(const Vec& theta, std::int64_t step) {
    check_finite_step(theta, step, "parameters");
    if (theta.size() > 0 && theta.cwiseAbs().maxCoeff() > kDivergenceBound) {
        throw DivergedError(step, "parameter magnitude exceeds 1e12");
    }
}

/// Shared tail of every step: apply the update, advance the counters.
void advance(OptimizerState& state, const Vec& update, double eta) {
    const std::int64_t number = state.step + 1;
    Vec next = state.theta - eta * update;
    check_iterate(next, number);
    state.theta = std::move(next);
    state.theta_sum += state.theta;
    state.step = number;
}

}  // namespace

void GradLiteConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        throw ConfigError("eta must be > 0");
    }
    if (!full_rank && k < 1) {
        throw ConfigError("rank k must be >= 1");
    }
    if (tau < 1) {
        throw ConfigError("refresh period tau must be >= 1");
    }
    if (power_iters < 1) {
        throw ConfigError("power iterations must be >= 1");
    }
}

Index GradLiteConfig::rank_for(Index m, Index block_size) const {
    return full_rank ? std::min(m, block_size) : k;
}

void AdamConfig::validate() const {
    if (!(eta >= 0.0) || !std::isfinite(eta)) {
        throw ConfigError("adam: eta must be >= 0");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("adam: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) {
        throw ConfigError("adam: eps must be > 0");
    }
}

void GaloreConfig::validate() const {
    if (!(eta >= 0.0) || !std::isfinite(eta)) {
        throw ConfigError("galore: eta must be >= 0");
    }
    if (k < 1) {
        throw ConfigError("galore: rank k must be >= 1");
    }
    if (tau < 1) {
        throw ConfigError("galore: refresh period tau must be >= 1");
    }
    if (power_iters < 1) {
        throw ConfigError("galore: power iterations must be >= 1");
    }
}

OptimizerState OptimizerState::start(const Problem& problem, Vec theta0) {
    require_dims(theta0.size(), problem.param_dim(), "optimizer start");
    require_finite(theta0, "optimizer start");
    OptimizerState state;
    state.layout = problem.blocks();
    state.blocks.resize(state.layout.size());
    state.theta_sum = Vec::Zero(theta0.size());
    state.theta = std::move(theta0);
    return state;
}

Index OptimizerState::resident_scalars() const {
    Index total = adam_m.size() + adam_v.size() + galore.basis.size();
    for (const Vec& g : galore.window) {
        total += g.size();
    }
    for (const BlockState& b : blocks) {
        total += b.acc.r.size();
        if (b.factor) {
            total += b.factor->stored_scalars();
        }
    }
    return total;
}

StepResult gradlite_step(OptimizerState state, Problem& problem, const Batch& batch,
                         const GradLiteConfig& cfg) {
    cfg.validate();
    require_dims(state.theta.size(), problem.param_dim(), "gradlite_step");
    if (state.blocks.size() != state.layout.size()) {
        throw DimError("gradlite_step: state block layout is inconsistent");
    }
    const std::int64_t number = state.step + 1;
    const RefreshPolicy policy = cfg.refresh_policy();
    const Index d = state.theta.size();

    StepTrace trace;
    trace.loss = problem.loss(state.theta, batch);
    trace.delta = problem.error_signal(state.theta, batch);
    check_finite_step(trace.delta, number, "error signal");
    const Index m = trace.delta.size();

    trace.g_tilde = Vec::Zero(d);
    trace.g_hat = Vec::Zero(d);
    trace.big_delta = Vec::Zero(d);
    if (cfg.probe == Probe::exact) {
        trace.g_exact = Vec::Zero(d);
    }
    std::vector<Vec> projections;
    projections.reserve(state.blocks.size());

    for (std::size_t b = 0; b < state.blocks.size(); ++b) {
        BlockState& block = state.blocks[b];
        const BlockRange range = state.layout[b];
        const std::uint64_t block_seed = derive_seed(cfg.seed, b);

        const bool need_factor = !block.factor || refresh_due(*block.factor, state.step, policy);
        std::optional<Mat> jac;
        if (need_factor || cfg.probe == Probe::exact) {
            jac = problem.jacobian(state.theta, batch, static_cast<Index>(b));
            if (jac->rows() != m || jac->cols() != range.size) {
                throw DimError("gradlite_step: jacobian shape does not match block");
            }
        }
        if (!block.factor) {
            block.factor = factorize(*jac, cfg.rank_for(m, range.size), policy, state.step, block_seed);
        } else if (need_factor) {
            block.factor = maybe_refresh(std::move(*block.factor), *jac, state.step, policy, block_seed);
        }

        Vec delta_proj = projected_signal(*block.factor, trace.delta);
        const Vec g_tilde = reconstruct_gradient(*block.factor, delta_proj);

        Vec g_hat = g_tilde;
        if (cfg.ef_mode != EfMode::off) {
            const AccumulatorMode mode =
                cfg.ef_mode == EfMode::paper ? AccumulatorMode::paper : AccumulatorMode::ef_standard;
            if (block.acc.r.size() == 0) {
                block.acc = ErrorAccumulator<double>::zeros(range.size, mode);
            }
            block.acc.mode = mode;
            g_hat = correct(g_tilde, block.acc);
        }

        DeltaEstimate<double> estimate{Vec::Zero(range.size), false};
        if (cfg.probe == Probe::exact) {
            const Vec g_block = matvec_t(*jac, trace.delta);
            estimate = delta_from_exact<double>(g_block, g_tilde);
            trace.g_exact->segment(range.offset, range.size) = g_block;
        }
        if (cfg.ef_mode != EfMode::off) {
            block.acc = update_accumulator(std::move(block.acc), estimate);
        }

        trace.g_tilde.segment(range.offset, range.size) = g_tilde;
        trace.g_hat.segment(range.offset, range.size) = g_hat;
        trace.big_delta.segment(range.offset, range.size) = estimate.delta;
        projections.push_back(std::move(delta_proj));
    }

    Index proj_len = 0;
    for (const Vec& p : projections) {
        proj_len += p.size();
    }
    trace.delta_proj.resize(proj_len);
    Index at = 0;
    for (const Vec& p : projections) {
        trace.delta_proj.segment(at, p.size()) = p;
        at += p.size();
    }

    check_finite_step(trace.g_hat, number, "corrected gradient");
    advance(state, trace.g_hat, cfg.eta);
    return {std::move(state), std::move(trace)};
}

namespace {

/// δ and g = Jᵀδ for the exact-gradient baselines, packaged as a trace.
StepTrace exact_trace(const OptimizerState& state, Problem& problem, const Batch& batch) {
    StepTrace trace;
    trace.loss = problem.loss(state.theta, batch);
    trace.delta = problem.error_signal(state.theta, batch);
    check_finite_step(trace.delta, state.step + 1, "error signal");
    Vec g = problem.gradient_from_signal(state.theta, batch, trace.delta);
    check_finite_step(g, state.step + 1, "gradient");
    trace.big_delta = Vec::Zero(g.size());
    trace.g_tilde = g;
    trace.g_hat = g;
    trace.g_exact = std::move(g);
    return trace;
}

}  // namespace

StepResult sgd_step(OptimizerState state, Problem& problem, const Batch& batch, double eta) {
    if (!(eta >= 0.0) || !std::isfinite(eta)) {
        throw ConfigError("sgd: eta must be >= 0");
    }
    require_dims(state.theta.size(), problem.param_dim(), "sgd_step");
    StepTrace trace = exact_trace(state, problem, batch);
    advance(state, *trace.g_exact, eta);
    return {std::move(state), std::move(trace)};
}

StepResult adam_step(OptimizerState state, Problem& problem, const Batch& batch,
                     const AdamConfig& cfg) {
    cfg.validate();
    require_dims(state.theta.size(), problem.param_dim(), "adam_step");
    StepTrace trace = exact_trace(state, problem, batch);
    const Vec& g = *trace.g_exact;
    if (state.adam_m.size() == 0) {
        state.adam_m = Vec::Zero(g.size());
        state.adam_v = Vec::Zero(g.size());
    }
    state.adam_m = cfg.beta1 * state.adam_m + (1.0 - cfg.beta1) * g;
    state.adam_v = cfg.beta2 * state.adam_v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double t = static_cast<double>(state.step + 1);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    Vec update(g.size());
    for (Index i = 0; i < g.size(); ++i) {
        const double m_hat = state.adam_m(i) / c1;
        const double v_hat = state.adam_v(i) / c2;
        update(i) = m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
    trace.g_hat = update;
    advance(state, update, cfg.eta);
    return {std::move(state), std::move(trace)};
}

StepResult galore_like_step(OptimizerState state, Problem& problem, const Batch& batch,
                            const GaloreConfig& cfg) {
    cfg.validate();
    require_dims(state.theta.size(), problem.param_dim(), "galore_like_step");
    StepTrace trace = exact_trace(state, problem, batch);
    const Vec& g = *trace.g_exact;
    const Index d = g.size();

    GaloreState& gs = state.galore;
    gs.window.push_back(g);
    while (static_cast<Index>(gs.window.size()) > cfg.tau) {
        gs.window.pop_front();
    }
    const bool due = gs.birth_step < 0 || state.step - gs.birth_step >= cfg.tau;
    if (due) {
        gs.birth_step = state.step;
        if (cfg.k >= d) {
            gs.identity = true;
            gs.basis.resize(0, 0);
        } else {
            Mat window(d, static_cast<Index>(gs.window.size()));
            for (std::size_t c = 0; c < gs.window.size(); ++c) {
                window.col(static_cast<Index>(c)) = gs.window[c];
            }
            const Index rank = std::min(cfg.k, window.cols());
            gs.basis = truncated_svd(window, rank, cfg.power_iters, cfg.seed).u;
            gs.identity = false;
        }
    }

    Vec projected = gs.identity ? g : matvec(gs.basis, matvec_t(gs.basis, g));
    trace.g_tilde = projected;
    trace.g_hat = projected;
    trace.big_delta = g - projected;
    advance(state, projected, cfg.eta);
    return {std::move(state), std::move(trace)};
}

Vec averaged_iterate(const OptimizerState& state) {
    if (state.step < 1) {
        throw EmptyRunError("averaged_iterate: no steps taken");
    }
    return state.theta_sum / static_cast<double>(state.step);
}

}  // namespace gradlite
