#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "gradlite/harness.hpp"
#include "summary.hpp"

namespace gradlite {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

StepResult dispatch_step(OptimizerState state, Problem& problem, const OptimizerSpec& spec,
                         std::uint64_t seed) {
    const Batch batch = Batch::full();
    switch (spec.kind) {
    case OptimizerKind::gradlite:
        return gradlite_step(std::move(state), problem, batch, spec.gradlite(seed));
    case OptimizerKind::sgd:
        return sgd_step(std::move(state), problem, batch, spec.eta);
    case OptimizerKind::adam:
        return adam_step(std::move(state), problem, batch, spec.adam());
    case OptimizerKind::galore:
        return galore_like_step(std::move(state), problem, batch, spec.galore(seed));
    }
    throw ConfigError("unknown optimizer");
}

void check_ranks(const ProblemShape& shape, const OptimizerSpec& spec) {
    if (spec.kind != OptimizerKind::gradlite || spec.full_rank) {
        return;
    }
    for (Index size : shape.block_sizes) {
        const Index full = std::min(shape.signal_dim, size);
        if (spec.k > full) {
            throw RankError("rank " + std::to_string(spec.k) + " exceeds min(m, d) = " +
                            std::to_string(full) + " for a parameter block");
        }
    }
}

}  // namespace

double RunMetrics::final_loss() const {
    return records.empty() ? initial_loss : records.back().loss;
}

double RunMetrics::final_gap() const {
    return records.empty() ? initial_gap : records.back().gap;
}

RunMetrics run_experiment(const ProblemSpec& problem_spec, const OptimizerSpec& optimizer,
                          std::int64_t steps, std::uint64_t seed) {
    if (steps < 1) {
        throw ConfigError("steps must be >= 1");
    }
    optimizer.validate();
    check_ranks(shape_of(problem_spec), optimizer);
    std::unique_ptr<Problem> problem = build_problem(problem_spec, seed);

    const auto started = std::chrono::steady_clock::now();
    const Batch batch = Batch::full();
    const std::optional<double> optimum = problem->optimal_loss();

    RunMetrics metrics;
    metrics.records.reserve(static_cast<std::size_t>(steps));
    OptimizerState state = OptimizerState::start(*problem, problem->initial_point());
    metrics.initial_loss = problem->loss(state.theta, batch);
    metrics.initial_gap = optimum ? metrics.initial_loss - *optimum : kNaN;
    metrics.final_theta = state.theta;

    for (std::int64_t t = 0; t < steps; ++t) {
        std::optional<StepResult> result;
        try {
            result.emplace(dispatch_step(std::move(state), *problem, optimizer, seed));
        } catch (const DivergedError& e) {
            metrics.diverged = true;
            metrics.divergence = e.what();
            break;
        }
        state = std::move(result->first);
        const StepTrace& trace = result->second;
        StepRecord rec;
        rec.step = state.step;
        rec.loss = problem->loss(state.theta, batch);
        Vec averaged = averaged_iterate(state);
        rec.gap = optimum ? problem->loss(averaged, batch) - *optimum : kNaN;
        rec.g_norm = trace.g_exact ? trace.g_exact->norm() : kNaN;
        rec.gtilde_norm = trace.g_tilde.norm();
        double r_sq = 0.0;
        for (const BlockState& b : state.blocks) {
            r_sq += b.acc.r.squaredNorm();
        }
        rec.r_norm = std::sqrt(r_sq);
        rec.delta_norm = trace.big_delta.norm();
        rec.bwd_scalars =
            optimizer.kind == OptimizerKind::gradlite ? trace.delta_proj.size() : trace.delta.size();
        rec.opt_scalars = state.resident_scalars();
        if (!std::isfinite(rec.loss)) {
            metrics.diverged = true;
            metrics.divergence = "diverged at step " + std::to_string(rec.step) + ": non-finite loss";
            break;
        }
        metrics.records.push_back(rec);
        metrics.final_theta = state.theta;
        metrics.averaged_theta = std::move(averaged);
    }
    metrics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return metrics;
}

void write_metrics_csv(const RunMetrics& metrics, std::ostream& out) {
    out << kMetricsHeader << '\n';
    for (const StepRecord& r : metrics.records) {
        out << r.step << ',' << format_number(r.loss) << ',' << format_number(r.gap) << ','
            << format_number(r.g_norm) << ',' << format_number(r.gtilde_norm) << ','
            << format_number(r.r_norm) << ',' << format_number(r.delta_norm) << ','
            << r.bwd_scalars << ',' << r.opt_scalars << '\n';
    }
}

void write_run_summary(const ProblemSpec& problem, const OptimizerSpec& optimizer,
                       std::int64_t steps, std::uint64_t seed, const RunMetrics& metrics,
                       std::ostream& out) {
    nlohmann::ordered_json j;
    j["command"] = "run";
    j["problem"] = problem_json(problem);
    j["optimizer"] = optimizer_json(optimizer);
    j["steps"] = steps;
    j["seed"] = seed;
    nlohmann::ordered_json fin;
    fin["steps_completed"] = metrics.records.size();
    fin["initial_loss"] = json_number(metrics.initial_loss);
    fin["final_loss"] = json_number(metrics.final_loss());
    fin["final_gap"] = json_number(metrics.final_gap());
    if (!metrics.records.empty()) {
        const StepRecord& last = metrics.records.back();
        fin["g_norm"] = json_number(last.g_norm);
        fin["gtilde_norm"] = json_number(last.gtilde_norm);
        fin["r_norm"] = json_number(last.r_norm);
        fin["delta_norm"] = json_number(last.delta_norm);
        fin["bwd_scalars"] = last.bwd_scalars;
        fin["opt_scalars"] = last.opt_scalars;
    }
    j["final"] = fin;
    j["diverged"] = metrics.diverged;
    j["divergence"] = metrics.divergence;
    out << j.dump(2) << '\n';
}

nlohmann::ordered_json json_number(double v) {
    if (std::isfinite(v)) {
        return v;
    }
    return nullptr;
}

nlohmann::ordered_json problem_json(const ProblemSpec& p) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(p.kind);
    j["dim"] = p.dim;
    if (p.kind == ProblemKind::quadratic) {
        j["cond"] = p.cond;
        j["noise"] = p.noise;
        j["radius"] = p.radius;
    } else {
        j["samples"] = p.samples;
        j["data"] = to_string(p.data);
        j["l2"] = p.l2;
    }
    if (p.kind == ProblemKind::mlp) {
        j["hidden"] = p.hidden;
    }
    j["instance_seed"] = p.instance_seed;
    return j;
}

nlohmann::ordered_json optimizer_json(const OptimizerSpec& o) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(o.kind);
    j["eta"] = o.eta;
    if (o.kind == OptimizerKind::gradlite || o.kind == OptimizerKind::galore) {
        j["k"] = o.full_rank ? nlohmann::ordered_json("full") : nlohmann::ordered_json(o.k);
        j["tau"] = o.tau;
        j["power_iters"] = o.power_iters;
    }
    if (o.kind == OptimizerKind::gradlite) {
        j["ef_mode"] = to_string(o.ef_mode);
        j["probe"] = to_string(o.probe);
        j["basis"] = to_string(o.basis);
    }
    if (o.kind == OptimizerKind::adam) {
        j["beta1"] = o.beta1;
        j["beta2"] = o.beta2;
        j["eps"] = o.eps;
    }
    return j;
}

}  // namespace gradlite
