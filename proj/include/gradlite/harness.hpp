#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gradlite/optimizer.hpp"
#include "gradlite/problems.hpp"

namespace gradlite {

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

enum class ProblemKind { quadratic, logistic, mlp };
enum class OptimizerKind { gradlite, sgd, adam, galore };

/// Everything needed to rebuild a problem instance deterministically.
struct ProblemSpec {
    ProblemKind kind = ProblemKind::quadratic;
    Index dim = 50;
    double cond = 100.0;
    double noise = 0.0;
    /// ‖θ0 − θ*‖ for the quadratic.
    double radius = 3.1622776601683795;
    Index samples = 512;
    double l2 = 0.0;
    std::vector<Index> hidden = {16};
    DatasetKind data = DatasetKind::gaussian_logistic;
    std::uint64_t instance_seed = 0;

    void validate() const;
};

/// Signal dimension and per-block parameter counts, known without building
/// the problem.
struct ProblemShape {
    Index signal_dim = 0;
    std::vector<Index> block_sizes;

    Index param_dim() const;
};

ProblemShape shape_of(const ProblemSpec& spec);

/// Builds the instance and seeds its noise stream from the run seed.
std::unique_ptr<Problem> build_problem(const ProblemSpec& spec, std::uint64_t run_seed);

struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::gradlite;
    double eta = 0.05;
    Index k = 8;
    bool full_rank = false;
    Index tau = 10;
    EfMode ef_mode = EfMode::ef_standard;
    Probe probe = Probe::exact;
    BasisMode basis = BasisMode::svd;
    int power_iters = 4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
    GradLiteConfig gradlite(std::uint64_t seed) const;
    AdamConfig adam() const;
    GaloreConfig galore(std::uint64_t seed) const;
};

std::string to_string(ProblemKind kind);
std::string to_string(OptimizerKind kind);
std::string to_string(EfMode mode);
std::string to_string(Probe probe);
std::string to_string(BasisMode mode);
std::string to_string(DatasetKind kind);

std::optional<ProblemKind> parse_problem_kind(const std::string& s);
std::optional<OptimizerKind> parse_optimizer_kind(const std::string& s);
std::optional<EfMode> parse_ef_mode(const std::string& s);
std::optional<Probe> parse_probe(const std::string& s);
std::optional<BasisMode> parse_basis_mode(const std::string& s);
std::optional<DatasetKind> parse_dataset_kind(const std::string& s);

/// 17 significant digits, the format of every number the harness writes.
std::string format_number(double v);

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct StepRecord {
    std::int64_t step = 0;
    double loss = 0.0;
    /// 𝓛(θ̄_t) − 𝓛*, NaN when 𝓛* is unknown.
    double gap = 0.0;
    double g_norm = 0.0;
    double gtilde_norm = 0.0;
    double r_norm = 0.0;
    double delta_norm = 0.0;
    Index bwd_scalars = 0;
    Index opt_scalars = 0;
};

struct RunMetrics {
    std::vector<StepRecord> records;
    bool diverged = false;
    std::string divergence;
    double wall_seconds = 0.0;
    double initial_loss = 0.0;
    double initial_gap = 0.0;
    Vec final_theta;
    /// Empty when no step completed.
    Vec averaged_theta;

    double final_loss() const;
    double final_gap() const;
};

/// Steps the optimizer T times from the problem's initial point. Divergence
/// stops the run and is recorded, not rethrown.
RunMetrics run_experiment(const ProblemSpec& problem, const OptimizerSpec& optimizer,
                          std::int64_t steps, std::uint64_t seed);

inline constexpr const char* kMetricsHeader =
    "step,loss,gap,g_norm,gtilde_norm,r_norm,delta_norm,bwd_scalars,opt_scalars";

void write_metrics_csv(const RunMetrics& metrics, std::ostream& out);
void write_run_summary(const ProblemSpec& problem, const OptimizerSpec& optimizer,
                       std::int64_t steps, std::uint64_t seed, const RunMetrics& metrics,
                       std::ostream& out);

// ---------------------------------------------------------------------------
// Memory accounting
// ---------------------------------------------------------------------------

/// Scalars per step for one method. Amortized entries are divided by τ and
/// may be fractional when τ does not divide them.
struct MemoryRow {
    std::string method;
    double backward_signal = 0.0;
    double jacobian_cache = 0.0;
    double factor = 0.0;
    double accumulator = 0.0;
    double optimizer_state = 0.0;
    double parameters = 0.0;
    double total = 0.0;
    /// Scalars the optimizer holds between steps (matches
    /// OptimizerState::resident_scalars once windows are full).
    Index resident = 0;
};

struct MemoryReport {
    Index signal_dim = 0;
    Index param_dim = 0;
    Index blocks = 0;
    Index k = 0;
    Index tau = 0;
    std::vector<MemoryRow> rows;

    const MemoryRow& row(const std::string& method) const;
    /// 1 − total(method) / total(baseline).
    double saving(const std::string& method, const std::string& baseline) const;
};

MemoryReport memory_account(const ProblemSpec& problem, const OptimizerSpec& optimizer);
void write_memory_report(const MemoryReport& report, std::ostream& out);

// ---------------------------------------------------------------------------
// Convergence-rate fit
// ---------------------------------------------------------------------------

struct RatePoint {
    std::int64_t steps = 0;
    double eta = 0.0;
    double mean_gap = 0.0;
    std::vector<double> gaps;
};

/// slope/intercept/r_squared: least squares of log(mean gap) on log(T).
/// error_floor: C in the least-squares fit mean_gap ≈ a/√T + C, i.e. what is
/// left at the largest T once the T^{-1/2} trend is removed.
struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double trend = 0.0;
    double error_floor = 0.0;
    std::vector<RatePoint> points;
};

inline const std::vector<std::int64_t> kDefaultRateGrid = {400, 1600, 6400, 25600};

/// For every T in the grid runs each seed with η = c/√T and averages the
/// suboptimality gap of the averaged iterate.
RateFit rate_check(const ProblemSpec& problem, const OptimizerSpec& optimizer, double c,
                   const std::vector<std::int64_t>& t_grid, const std::vector<std::uint64_t>& seeds,
                   unsigned threads = 1);

void write_rate_summary(const ProblemSpec& problem, const OptimizerSpec& optimizer, double c,
                        const std::vector<std::pair<Index, RateFit>>& fits, std::ostream& out);

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

struct AblationConfig {
    ProblemSpec benchmark;
    Index k = 8;
    Index tau = 10;
    std::int64_t steps = 3000;
    std::vector<double> eta_grid;
    /// Skip tuning and use this step size.
    std::optional<double> eta;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    /// Draw a fresh benchmark instance per seed.
    bool instance_per_seed = true;
};

/// Low-rank-regression logistic benchmark (n=512, d=128, condition 1e3), k=8,
/// τ=10, T=3000, η tuned on the full method over {1e-3 … 1}.
AblationConfig default_ablation();

struct AblationRow {
    std::string variant;
    std::uint64_t seed = 0;
    double final_loss = 0.0;
    double final_gap = 0.0;
    bool diverged = false;
};

struct AblationTable {
    double eta = 0.0;
    std::vector<AblationRow> rows;

    const AblationRow& row(const std::string& variant, std::uint64_t seed) const;
};

inline constexpr const char* kVariantFull = "full";
inline constexpr const char* kVariantNoFeedback = "no-error-feedback";
inline constexpr const char* kVariantRandomProjection = "random-projection";

OptimizerSpec ablation_variant(const std::string& variant, const AblationConfig& cfg, double eta);

/// Step size with the lowest final loss for the full method on the first seed.
double tune_ablation_eta(const AblationConfig& cfg, unsigned threads = 1);

AblationTable ablation_suite(const AblationConfig& cfg, unsigned threads = 1);
void write_ablation_csv(const AblationTable& table, std::ostream& out);

// ---------------------------------------------------------------------------
// Gradient checks
// ---------------------------------------------------------------------------

struct GradCheckCase {
    std::string label;
    std::shared_ptr<Problem> problem;
    double fd_tolerance = 1e-5;
    double theta_scale = 1.0;
    int chain_draws = 100;
    int fd_draws = 3;
};

struct GradCheck {
    std::string problem;
    Index block = 0;
    std::string check;
    double max_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

struct GradCheckReport {
    std::vector<GradCheck> checks;

    bool all_passed() const;
};

inline constexpr double kChainRuleTolerance = 1e-10;
inline constexpr double kFiniteDifferenceStep = 1e-5;

/// Quadratic, two logistic instances and a two-hidden-layer MLP.
std::vector<GradCheckCase> default_grad_check_cases();

/// Chain-rule (Jᵀδ against exact_gradient) and central-difference checks for
/// every block of every case.
GradCheckReport grad_check_suite(const std::vector<GradCheckCase>& cases, std::uint64_t seed = 0);
GradCheckReport grad_check_suite();

void write_grad_check_report(const GradCheckReport& report, std::ostream& out);

}  // namespace gradlite
