#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <string>

#include "gradlite/harness.hpp"
#include "gradlite/optimizer.hpp"
#include "support.hpp"

using namespace gradlite;
using namespace testing;

namespace {

ProblemSpec small_quadratic(Index dim, double noise) {
    ProblemSpec spec;
    spec.dim = dim;
    spec.noise = noise;
    return spec;
}

OptimizerSpec sgd(double eta) {
    OptimizerSpec opt;
    opt.kind = OptimizerKind::sgd;
    opt.eta = eta;
    return opt;
}

std::string csv_of(const RunMetrics& metrics) {
    std::ostringstream out;
    write_metrics_csv(metrics, out);
    return out.str();
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) {
        n += c == '\n' ? 1 : 0;
    }
    return n;
}

/// Wraps a problem and perturbs the gradient it reports.
class CorruptedGradient final : public Problem {
public:
    explicit CorruptedGradient(std::shared_ptr<Problem> inner) : inner_(std::move(inner)) {}

    std::string name() const override { return "corrupted"; }
    Index param_dim() const override { return inner_->param_dim(); }
    Index signal_dim(const Batch& b) const override { return inner_->signal_dim(b); }
    std::vector<BlockRange> blocks() const override { return inner_->blocks(); }
    double loss(const Vec& theta, const Batch& b) const override { return inner_->loss(theta, b); }
    Vec clean_error_signal(const Vec& theta, const Batch& b) const override {
        return inner_->clean_error_signal(theta, b);
    }
    Mat jacobian(const Vec& theta, const Batch& b, Index block) const override {
        return inner_->jacobian(theta, b, block);
    }
    Vec gradient_from_signal(const Vec& theta, const Batch& b, const Vec& s) const override {
        return inner_->gradient_from_signal(theta, b, s);
    }
    Vec exact_gradient(const Vec& theta, const Batch& b) const override {
        Vec g = inner_->exact_gradient(theta, b);
        g(0) += 1e-3;
        return g;
    }
    Vec initial_point() const override { return inner_->initial_point(); }

private:
    std::shared_ptr<Problem> inner_;
};

}  // namespace

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

TEST_CASE("run rejects a zero step budget") {
    CHECK_THROWS_AS(run_experiment(ProblemSpec{}, OptimizerSpec{}, 0, 0), ConfigError);
}

TEST_CASE("sgd at 1/L drives the last iterate to the optimum") {
    const ProblemSpec spec = small_quadratic(50, 0.0);
    const auto problem = build_problem(spec, 0);
    const double eta = 1.0 / *problem->smoothness();
    const RunMetrics m = run_experiment(spec, sgd(eta), 1000, 0);
    REQUIRE_FALSE(m.diverged);
    REQUIRE(m.records.size() == 1000);
    const double initial = m.initial_loss - *problem->optimal_loss();
    CHECK(m.records.back().loss - *problem->optimal_loss() < 1e-6 * initial);
    // Averaged iterate lags but still improves.
    CHECK(m.final_gap() < 0.1 * m.initial_gap);
}

TEST_CASE("records carry step numbers and nonnegative gaps") {
    const ProblemSpec spec = small_quadratic(20, 0.5);
    OptimizerSpec opt;
    opt.k = 4;
    opt.eta = 0.05;
    const RunMetrics m = run_experiment(spec, opt, 200, 3);
    REQUIRE(m.records.size() == 200);
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        const StepRecord& r = m.records[i];
        CHECK(r.step == static_cast<std::int64_t>(i + 1));
        CHECK(r.gap >= -1e-12);
        CHECK(r.bwd_scalars == 4);
        CHECK(std::isfinite(r.g_norm));
    }
    CHECK(m.final_theta.size() == 20);
    CHECK(m.averaged_theta.size() == 20);
}

TEST_CASE("metrics are byte-identical across repeated runs") {
    const ProblemSpec spec = small_quadratic(20, 0.5);
    OptimizerSpec opt;
    opt.k = 3;
    const std::string a = csv_of(run_experiment(spec, opt, 150, 11));
    const std::string b = csv_of(run_experiment(spec, opt, 150, 11));
    CHECK(a == b);
    CHECK(a != csv_of(run_experiment(spec, opt, 150, 12)));
    CHECK(a.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
    CHECK(count_lines(a) == 151);
}

TEST_CASE("divergence stops the run and is recorded") {
    OptimizerSpec opt;
    opt.eta = 100.0;
    opt.ef_mode = EfMode::paper;
    const RunMetrics m = run_experiment(small_quadratic(50, 0.0), opt, 1000, 0);
    CHECK(m.diverged);
    CHECK_FALSE(m.divergence.empty());
    CHECK(m.records.size() < 1000);
    CHECK(m.final_theta.allFinite());
    std::ostringstream summary;
    write_run_summary(small_quadratic(50, 0.0), opt, 1000, 0, m, summary);
    CHECK(summary.str().find("\"diverged\": true") != std::string::npos);
}

TEST_CASE("unknown optimum gives NaN gaps") {
    ProblemSpec spec;
    spec.kind = ProblemKind::logistic;
    spec.samples = 40;
    spec.dim = 6;
    OptimizerSpec opt;
    opt.k = 2;
    const RunMetrics m = run_experiment(spec, opt, 5, 0);
    CHECK(std::isnan(m.final_gap()));
    CHECK(csv_of(m).find("nan") != std::string::npos);
}

// ---------------------------------------------------------------------------
// memory accounting
// ---------------------------------------------------------------------------

namespace {

ProblemSpec logistic_spec(Index samples, Index dim) {
    ProblemSpec spec;
    spec.kind = ProblemKind::logistic;
    spec.samples = samples;
    spec.dim = dim;
    return spec;
}

/// Recount from the built problem: m from the signal, blocks from the layout.
double recount_gradlite_total(const ProblemSpec& spec, Index k, Index tau, bool ef) {
    const auto p = build_problem(spec, 0);
    const double m = static_cast<double>(p->signal_dim(Batch::full()));
    const double d = static_cast<double>(p->param_dim());
    double signal = 0.0;
    double factor = 0.0;
    for (const BlockRange& b : p->blocks()) {
        signal += static_cast<double>(k);
        factor += (m + static_cast<double>(b.size)) * static_cast<double>(k);
    }
    return signal + m * d / static_cast<double>(tau) + factor / static_cast<double>(tau) +
           (ef ? d : 0.0) + d;
}

}  // namespace

TEST_CASE("memory counts for m = 1000, d = 200, k = 8, tau = 10") {
    OptimizerSpec opt;
    const MemoryReport r = memory_account(logistic_spec(1000, 200), opt);
    CHECK(r.signal_dim == 1000);
    CHECK(r.param_dim == 200);
    const MemoryRow& s = r.row("sgd");
    CHECK(s.backward_signal == 1000);
    CHECK(s.jacobian_cache == 200000);
    CHECK(s.total == 201200);
    const MemoryRow& g = r.row("gradlite");
    CHECK(g.backward_signal == 8);
    CHECK(g.jacobian_cache == 20000);
    CHECK(g.factor == 960);
    CHECK(g.accumulator == 200);
    CHECK(g.total == 21368);
    CHECK(g.backward_signal / s.backward_signal == doctest::Approx(0.008));
    CHECK(r.saving("gradlite", "sgd") >= 0.40);
    CHECK(r.row("gradlite-exact-probe").jacobian_cache == 200000);
    CHECK(r.row("adam").optimizer_state == 400);
    CHECK(r.row("galore").optimizer_state == 200 * 8 + 10 * 200);
    CHECK_THROWS_AS(r.row("nope"), ConfigError);
}

TEST_CASE("memory rank boundary") {
    OptimizerSpec opt;
    opt.k = 50;
    CHECK_NOTHROW(memory_account(small_quadratic(50, 0.0), opt));
    opt.k = 51;
    CHECK_THROWS_AS(memory_account(small_quadratic(50, 0.0), opt), RankError);
    opt.k = 51;
    opt.full_rank = true;
    CHECK(memory_account(small_quadratic(50, 0.0), opt).row("gradlite").backward_signal == 50);
}

TEST_CASE("memory totals agree with an independent recount") {
    ProblemSpec mlp;
    mlp.kind = ProblemKind::mlp;
    mlp.samples = 30;
    mlp.dim = 5;
    mlp.hidden = {7, 4};
    const std::vector<ProblemSpec> specs = {small_quadratic(12, 0.0), logistic_spec(64, 9),
                                            mlp};
    for (const ProblemSpec& spec : specs) {
        for (Index tau : {1, 3, 10}) {
            for (EfMode ef : {EfMode::ef_standard, EfMode::off}) {
                OptimizerSpec opt;
                opt.k = 2;
                opt.tau = tau;
                opt.ef_mode = ef;
                const MemoryReport r = memory_account(spec, opt);
                CHECK(r.row("gradlite").total ==
                      doctest::Approx(recount_gradlite_total(spec, 2, tau, ef != EfMode::off))
                          .epsilon(1e-12));
                const ProblemShape shape = shape_of(spec);
                const auto p = build_problem(spec, 0);
                CHECK(shape.signal_dim == p->signal_dim(Batch::full()));
                CHECK(shape.param_dim() == p->param_dim());
            }
        }
    }
}

TEST_CASE("resident scalars match the optimizer state after a window") {
    ProblemSpec mlp;
    mlp.kind = ProblemKind::mlp;
    mlp.samples = 30;
    mlp.dim = 5;
    mlp.hidden = {7};
    for (OptimizerKind kind : {OptimizerKind::gradlite, OptimizerKind::adam, OptimizerKind::galore}) {
        OptimizerSpec opt;
        opt.kind = kind;
        opt.k = 2;
        opt.tau = 4;
        opt.eta = 1e-3;
        const MemoryReport report = memory_account(mlp, opt);
        const std::string method = kind == OptimizerKind::gradlite ? "gradlite" : to_string(kind);
        const RunMetrics m = run_experiment(mlp, opt, 6, 0);
        REQUIRE_FALSE(m.diverged);
        CHECK(m.records.back().opt_scalars == report.row(method).resident);
    }
}

// ---------------------------------------------------------------------------
// rate check
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::int64_t> kSmallGrid = {50, 100, 200, 400};

struct Line {
    double slope;
    double intercept;
};

Line least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {slope, (sy - slope * sx) / n};
}

}  // namespace

TEST_CASE("rate fit matches an independent refit of its points") {
    const RateFit fit = rate_check(small_quadratic(10, 0.5), sgd(1.0), 0.3, kSmallGrid, {0, 1});
    REQUIRE(fit.points.size() == 4);
    std::vector<double> lx, ly, ix, gy;
    for (const RatePoint& p : fit.points) {
        CHECK(p.eta == doctest::Approx(0.3 / std::sqrt(static_cast<double>(p.steps))));
        CHECK(p.gaps.size() == 2);
        CHECK(p.mean_gap == doctest::Approx((p.gaps[0] + p.gaps[1]) / 2.0));
        lx.push_back(std::log(static_cast<double>(p.steps)));
        ly.push_back(std::log(p.mean_gap));
        ix.push_back(1.0 / std::sqrt(static_cast<double>(p.steps)));
        gy.push_back(p.mean_gap);
    }
    const Line loglog = least_squares(lx, ly);
    CHECK(fit.slope == doctest::Approx(loglog.slope).epsilon(1e-10));
    CHECK(fit.intercept == doctest::Approx(loglog.intercept).epsilon(1e-10));
    CHECK(fit.slope < 0.0);
    CHECK(fit.r_squared <= 1.0);
    const Line trend = least_squares(ix, gy);
    CHECK(fit.trend == doctest::Approx(trend.slope * ix.back()).epsilon(1e-9));
    CHECK(fit.error_floor == doctest::Approx(gy.back() - trend.slope * ix.back()).epsilon(1e-9));
}

TEST_CASE("rate check is reproducible and thread-count independent") {
    const RateFit a = rate_check(small_quadratic(10, 0.5), sgd(1.0), 0.3, kSmallGrid, {0, 1, 2}, 1);
    const RateFit b = rate_check(small_quadratic(10, 0.5), sgd(1.0), 0.3, kSmallGrid, {0, 1, 2}, 3);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i].gaps == b.points[i].gaps);
    }
    CHECK(a.slope == b.slope);
}

TEST_CASE("rate check validation") {
    const ProblemSpec q = small_quadratic(10, 0.5);
    CHECK_THROWS_AS(rate_check(q, sgd(1.0), 0.3, {50, 100, 200}, {0}), ConfigError);
    CHECK_THROWS_AS(rate_check(q, sgd(1.0), 0.3, {50, 100, 100, 200}, {0}), ConfigError);
    CHECK_THROWS_AS(rate_check(q, sgd(1.0), 0.3, kSmallGrid, {}), ConfigError);
    CHECK_THROWS_AS(rate_check(q, sgd(1.0), 0.0, kSmallGrid, {0}), ConfigError);
    CHECK_THROWS_AS(rate_check(logistic_spec(40, 5), sgd(1.0), 0.3, kSmallGrid, {0}),
                    NonPositiveGapError);
}

TEST_CASE("rate summary lists one fit per rank") {
    const RateFit fit = rate_check(small_quadratic(10, 0.5), sgd(1.0), 0.3, kSmallGrid, {0});
    std::ostringstream out;
    write_rate_summary(small_quadratic(10, 0.5), sgd(1.0), 0.3, {{2, fit}, {10, fit}}, out);
    const std::string s = out.str();
    CHECK(s.find("\"fits\"") != std::string::npos);
    CHECK(s.find("\"error_floor\"") != std::string::npos);
    CHECK(s.find("\"k\": 10") != std::string::npos);
}

// ---------------------------------------------------------------------------
// ablation
// ---------------------------------------------------------------------------

namespace {

AblationConfig small_ablation(Index dim, Index k) {
    AblationConfig cfg;
    cfg.benchmark = small_quadratic(dim, 0.0);
    cfg.k = k;
    cfg.tau = 5;
    cfg.steps = 200;
    cfg.seeds = {0, 1};
    cfg.eta = 0.5;
    return cfg;
}

}  // namespace

TEST_CASE("ablation variants differ in one knob each") {
    const AblationConfig cfg = default_ablation();
    const OptimizerSpec full = ablation_variant(kVariantFull, cfg, 0.1);
    CHECK(full.ef_mode == EfMode::ef_standard);
    CHECK(full.basis == BasisMode::svd);
    CHECK(full.probe == Probe::exact);
    CHECK(full.k == 8);
    CHECK(full.tau == 10);
    CHECK(ablation_variant(kVariantNoFeedback, cfg, 0.1).ef_mode == EfMode::off);
    CHECK(ablation_variant(kVariantRandomProjection, cfg, 0.1).basis == BasisMode::random_projection);
    CHECK_THROWS_AS(ablation_variant("bogus", cfg, 0.1), ConfigError);
}

TEST_CASE("with k = d the feedback variant changes nothing") {
    const AblationTable t = ablation_suite(small_ablation(12, 12));
    for (std::uint64_t seed : {0, 1}) {
        const double full = t.row(kVariantFull, seed).final_loss;
        const double no_ef = t.row(kVariantNoFeedback, seed).final_loss;
        CHECK(std::abs(full - no_ef) <= 1e-8 * (1.0 + std::abs(full)));
    }
}

TEST_CASE("ablation table layout and csv") {
    const AblationTable t = ablation_suite(small_ablation(12, 3));
    CHECK(t.eta == 0.5);
    REQUIRE(t.rows.size() == 6);
    CHECK(t.rows[0].variant == kVariantFull);
    CHECK(t.rows[1].variant == kVariantFull);
    CHECK(t.rows[1].seed == 1);
    CHECK(t.rows[5].variant == kVariantRandomProjection);
    std::ostringstream out;
    write_ablation_csv(t, out);
    CHECK(out.str().rfind("variant,seed,final_loss,final_gap\n", 0) == 0);
    CHECK(count_lines(out.str()) == 7);
}

TEST_CASE("tuned eta is the grid minimizer for the full method") {
    AblationConfig cfg = small_ablation(12, 3);
    cfg.eta.reset();
    cfg.eta_grid = {0.05, 0.2, 0.5, 1.0, 50.0};
    const double chosen = tune_ablation_eta(cfg);
    double best = std::numeric_limits<double>::infinity();
    double best_eta = 0.0;
    ProblemSpec instance = cfg.benchmark;
    instance.instance_seed = cfg.seeds.front();
    for (double eta : cfg.eta_grid) {
        const RunMetrics m =
            run_experiment(instance, ablation_variant(kVariantFull, cfg, eta), cfg.steps, 0);
        const double loss = m.diverged ? std::numeric_limits<double>::infinity() : m.final_loss();
        if (loss < best) {
            best = loss;
            best_eta = eta;
        }
    }
    CHECK(chosen == best_eta);
    CHECK(chosen != 50.0);
}

// ---------------------------------------------------------------------------
// gradient checks
// ---------------------------------------------------------------------------

TEST_CASE("default gradient checks pass with two checks per block") {
    const std::vector<GradCheckCase> cases = default_grad_check_cases();
    std::size_t blocks = 0;
    for (const GradCheckCase& c : cases) {
        blocks += c.problem->blocks().size();
    }
    const GradCheckReport report = grad_check_suite(cases);
    CHECK(report.checks.size() == 2 * blocks);
    CHECK(report.all_passed());
    std::set<std::string> labels;
    for (const GradCheck& c : report.checks) {
        labels.insert(c.problem);
    }
    CHECK(labels == std::set<std::string>{"quadratic", "logistic", "logistic-l2", "mlp"});
}

TEST_CASE("a corrupted gradient is caught and named") {
    auto inner = std::make_shared<QuadraticProblem>(conditioned_quadratic(6, 10.0, 0.0, 1.0, 2));
    GradCheckCase bad{"broken-quadratic", std::make_shared<CorruptedGradient>(inner)};
    bad.chain_draws = 5;
    const GradCheckReport report = grad_check_suite({bad});
    REQUIRE(report.checks.size() == 2);
    CHECK_FALSE(report.all_passed());
    for (const GradCheck& c : report.checks) {
        CHECK(c.problem == "broken-quadratic");
    }
    CHECK_FALSE(report.checks[0].passed);
    std::ostringstream out;
    write_grad_check_report(report, out);
    CHECK(out.str().find("broken-quadratic,0,chain-rule") != std::string::npos);
    CHECK(out.str().find("checks=2 failed=") != std::string::npos);
}
