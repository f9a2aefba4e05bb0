#include <cmath>
#include <limits>
#include <ostream>

#include "gradlite/harness.hpp"
#include "gradlite/parallel.hpp"

namespace gradlite {

namespace {

const std::vector<std::string> kVariants = {kVariantFull, kVariantNoFeedback,
                                            kVariantRandomProjection};

void validate(const AblationConfig& cfg) {
    cfg.benchmark.validate();
    if (cfg.steps < 1) {
        throw ConfigError("ablation steps must be >= 1");
    }
    if (cfg.seeds.empty()) {
        throw ConfigError("ablation needs at least one seed");
    }
    if (!cfg.eta && cfg.eta_grid.empty()) {
        throw ConfigError("ablation needs an eta or an eta grid");
    }
}

ProblemSpec instance_for(const AblationConfig& cfg, std::uint64_t seed) {
    ProblemSpec spec = cfg.benchmark;
    if (cfg.instance_per_seed) {
        spec.instance_seed = seed;
    }
    return spec;
}

}  // namespace

AblationConfig default_ablation() {
    AblationConfig cfg;
    cfg.benchmark.kind = ProblemKind::logistic;
    cfg.benchmark.samples = 512;
    cfg.benchmark.dim = 128;
    cfg.benchmark.data = DatasetKind::low_rank_regression;
    cfg.benchmark.l2 = 1e-2;
    cfg.eta_grid = {1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1, 2e-1, 5e-1, 1.0};
    return cfg;
}

const AblationRow& AblationTable::row(const std::string& variant, std::uint64_t seed) const {
    for (const AblationRow& r : rows) {
        if (r.variant == variant && r.seed == seed) {
            return r;
        }
    }
    throw ConfigError("ablation table has no row for " + variant + " seed " + std::to_string(seed));
}

OptimizerSpec ablation_variant(const std::string& variant, const AblationConfig& cfg, double eta) {
    OptimizerSpec opt;
    opt.kind = OptimizerKind::gradlite;
    opt.eta = eta;
    opt.k = cfg.k;
    opt.tau = cfg.tau;
    opt.ef_mode = EfMode::ef_standard;
    opt.probe = Probe::exact;
    opt.basis = BasisMode::svd;
    if (variant == kVariantNoFeedback) {
        opt.ef_mode = EfMode::off;
    } else if (variant == kVariantRandomProjection) {
        opt.basis = BasisMode::random_projection;
    } else if (variant != kVariantFull) {
        throw ConfigError("unknown ablation variant '" + variant + "'");
    }
    return opt;
}

double tune_ablation_eta(const AblationConfig& cfg, unsigned threads) {
    validate(cfg);
    if (cfg.eta) {
        return *cfg.eta;
    }
    const std::uint64_t seed = cfg.seeds.front();
    const ProblemSpec spec = instance_for(cfg, seed);
    const std::vector<double> losses =
        parallel_map<double>(cfg.eta_grid.size(), threads, [&](std::size_t i) {
            const RunMetrics m =
                run_experiment(spec, ablation_variant(kVariantFull, cfg, cfg.eta_grid[i]), cfg.steps, seed);
            return m.diverged ? std::numeric_limits<double>::infinity() : m.final_loss();
        });
    std::size_t best = 0;
    for (std::size_t i = 1; i < losses.size(); ++i) {
        if (losses[i] < losses[best]) {
            best = i;
        }
    }
    if (!std::isfinite(losses[best])) {
        throw DivergedError(cfg.steps, "every step size in the ablation grid diverged");
    }
    return cfg.eta_grid[best];
}

AblationTable ablation_suite(const AblationConfig& cfg, unsigned threads) {
    AblationTable table;
    table.eta = tune_ablation_eta(cfg, threads);
    const std::size_t runs = kVariants.size() * cfg.seeds.size();
    table.rows = parallel_map<AblationRow>(runs, threads, [&](std::size_t i) {
        const std::string& variant = kVariants[i / cfg.seeds.size()];
        const std::uint64_t seed = cfg.seeds[i % cfg.seeds.size()];
        const RunMetrics m = run_experiment(instance_for(cfg, seed),
                                            ablation_variant(variant, cfg, table.eta), cfg.steps, seed);
        AblationRow row;
        row.variant = variant;
        row.seed = seed;
        row.diverged = m.diverged;
        const double inf = std::numeric_limits<double>::infinity();
        row.final_loss = m.diverged ? inf : m.final_loss();
        row.final_gap = m.diverged ? inf : m.final_gap();
        return row;
    });
    return table;
}

void write_ablation_csv(const AblationTable& table, std::ostream& out) {
    out << "variant,seed,final_loss,final_gap\n";
    for (const AblationRow& r : table.rows) {
        out << r.variant << ',' << r.seed << ',' << format_number(r.final_loss) << ','
            << format_number(r.final_gap) << '\n';
    }
}

}  // namespace gradlite
