#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "gradlite/harness.hpp"

namespace gradlite {

namespace {

constexpr const char* kChainRule = "chain-rule";
constexpr const char* kFiniteDifference = "finite-difference";

Vec random_point(NormalStream& rng, Index d, double scale) {
    Vec theta(d);
    for (Index i = 0; i < d; ++i) {
        theta(i) = scale * rng.next();
    }
    return theta;
}

}  // namespace

bool GradCheckReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const GradCheck& c) { return c.passed; });
}

std::vector<GradCheckCase> default_grad_check_cases() {
    std::vector<GradCheckCase> cases;

    cases.push_back({"quadratic",
                     std::make_shared<QuadraticProblem>(conditioned_quadratic(12, 100.0, 0.0, 3.0, 7)),
                     1e-5});
    cases.push_back({"logistic",
                     std::make_shared<LogisticProblem>(logistic_problem(
                         synth_dataset(11, 40, 8, DatasetKind::gaussian_logistic), 0.0)),
                     1e-5});
    cases.push_back(
        {"logistic-l2",
         std::make_shared<LogisticProblem>(logistic_problem(
             binarize_targets(synth_dataset(13, 48, 10, DatasetKind::low_rank_regression)), 0.1)),
         1e-5, 0.3});
    cases.push_back({"mlp",
                     std::make_shared<MlpProblem>(mlp_problem(
                         {6, 8, 5, 1}, Activation::tanh,
                         synth_dataset(17, 24, 6, DatasetKind::low_rank_regression), 19)),
                     1e-4, 0.5});
    return cases;
}

GradCheckReport grad_check_suite(const std::vector<GradCheckCase>& cases, std::uint64_t seed) {
    GradCheckReport report;
    const Batch batch = Batch::full();
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const GradCheckCase& gc = cases[c];
        if (!gc.problem) {
            throw ConfigError("grad check case '" + gc.label + "' has no problem");
        }
        const Problem& problem = *gc.problem;
        const std::vector<BlockRange> blocks = problem.blocks();
        std::vector<double> chain(blocks.size(), 0.0);
        std::vector<double> fd(blocks.size(), 0.0);
        NormalStream rng(derive_seed(seed, c));

        for (int draw = 0; draw < gc.chain_draws; ++draw) {
            const Vec theta = random_point(rng, problem.param_dim(), gc.theta_scale);
            const Vec delta = problem.clean_error_signal(theta, batch);
            const Vec g = problem.exact_gradient(theta, batch);
            for (std::size_t b = 0; b < blocks.size(); ++b) {
                const Mat j = problem.jacobian(theta, batch, static_cast<Index>(b));
                const Vec gb = g.segment(blocks[b].offset, blocks[b].size);
                double err = (matvec_t(j, delta) - gb).norm() / (1.0 + gb.norm());
                if (!std::isfinite(err)) {
                    err = std::numeric_limits<double>::infinity();
                }
                chain[b] = std::max(chain[b], err);
            }
        }
        for (int draw = 0; draw < gc.fd_draws; ++draw) {
            const Vec theta = random_point(rng, problem.param_dim(), gc.theta_scale);
            const Vec g = problem.exact_gradient(theta, batch);
            const Vec numeric = finite_difference_gradient(problem, theta, kFiniteDifferenceStep, batch);
            for (std::size_t b = 0; b < blocks.size(); ++b) {
                const Vec gb = g.segment(blocks[b].offset, blocks[b].size);
                const Vec nb = numeric.segment(blocks[b].offset, blocks[b].size);
                double err = (nb - gb).norm() / std::max(gb.norm(), 1e-6);
                if (!std::isfinite(err)) {
                    err = std::numeric_limits<double>::infinity();
                }
                fd[b] = std::max(fd[b], err);
            }
        }
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const Index block = static_cast<Index>(b);
            report.checks.push_back({gc.label, block, kChainRule, chain[b], kChainRuleTolerance,
                                     chain[b] <= kChainRuleTolerance});
            report.checks.push_back(
                {gc.label, block, kFiniteDifference, fd[b], gc.fd_tolerance, fd[b] < gc.fd_tolerance});
        }
    }
    return report;
}

GradCheckReport grad_check_suite() { return grad_check_suite(default_grad_check_cases()); }

void write_grad_check_report(const GradCheckReport& report, std::ostream& out) {
    out << "problem,block,check,max_error,tolerance,status\n";
    for (const GradCheck& c : report.checks) {
        out << c.problem << ',' << c.block << ',' << c.check << ',' << format_number(c.max_error)
            << ',' << format_number(c.tolerance) << ',' << (c.passed ? "pass" : "FAIL") << '\n';
    }
    std::size_t failed = 0;
    for (const GradCheck& c : report.checks) {
        failed += c.passed ? 0 : 1;
    }
    out << "checks=" << report.checks.size() << " failed=" << failed << '\n';
}

}  // namespace gradlite
