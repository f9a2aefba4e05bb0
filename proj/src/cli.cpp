#include "gradlite/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "gradlite/parallel.hpp"

namespace gradlite::cli {

namespace {

const std::vector<std::string> kCommands = {"run", "ablate", "rate-check", "grad-check",
                                            "mem-report"};

constexpr std::int64_t kRunSteps = 1000;
const std::vector<std::uint64_t> kRateSeeds = {0, 1, 2, 3, 4};

/// String-typed mirror of the enum flags; converted after CLI11 has checked
/// membership.
struct RawFlags {
    std::string command;
    std::string problem = "quadratic";
    std::string opt = "gradlite";
    std::string ef_mode = "ef-standard";
    std::string probe = "exact";
    std::string basis = "svd";
    std::string data = "gaussian-logistic";
    bool full_rank = false;
};

void build_app(CLI::App& app, CliConfig& cfg, RawFlags& raw) {
    app.option_defaults()->always_capture_default();
    app.set_help_flag("-h,--help", "Print this help message and exit");
    app.set_config("--config", "", "Flat key=value file (# comments); command-line flags override");
    app.allow_config_extras(CLI::config_extras_mode::error);

    app.add_option("command", raw.command, "run | ablate | rate-check | grad-check | mem-report")
        ->required()
        ->check(CLI::IsMember(kCommands));

    ProblemSpec& p = cfg.problem;
    app.add_option("--problem", raw.problem, "Problem family")
        ->check(CLI::IsMember({"quadratic", "logistic", "mlp"}));
    app.add_option("--dim", p.dim, "Parameter dimension (input width for mlp)");
    app.add_option("--cond", p.cond, "Quadratic condition number");
    app.add_option("--noise", p.noise, "Quadratic noise scale on the error signal");
    app.add_option("--radius", p.radius, "Quadratic initial distance to the optimum");
    app.add_option("--samples", p.samples, "Dataset rows (logistic, mlp)");
    app.add_option("--l2", p.l2, "Logistic l2 penalty");
    app.add_option("--hidden", p.hidden, "MLP hidden widths, comma separated")->delimiter(',');
    app.add_option("--data", raw.data, "Dataset generator")
        ->check(CLI::IsMember({"gaussian-logistic", "low-rank-regression"}));
    app.add_option("--instance-seed", p.instance_seed, "Seed of the problem instance");

    OptimizerSpec& o = cfg.optimizer;
    app.add_option("--opt", raw.opt, "Optimizer")
        ->check(CLI::IsMember({"gradlite", "sgd", "adam", "galore"}));
    app.add_option("--eta", o.eta, "Step size (ablate: skips tuning when given)");
    app.add_option("--k", o.k, "Rank of the Jacobian factor or projection");
    app.add_flag("--full-rank", raw.full_rank, "gradlite: use k = min(m, block size) (default off)");
    app.add_option("--tau", o.tau, "Refresh period in steps");
    app.add_option("--ef-mode", raw.ef_mode, "Error-feedback accumulator rule")
        ->check(CLI::IsMember({"paper", "ef-standard", "off"}));
    app.add_option("--probe", raw.probe, "Residual estimate: exact Jacobian product or none")
        ->check(CLI::IsMember({"exact", "none"}));
    app.add_option("--basis", raw.basis, "Factor construction")
        ->check(CLI::IsMember({"svd", "random-projection"}));
    app.add_option("--power-iters", o.power_iters, "Power iterations of the randomized SVD");
    app.add_option("--beta1", o.beta1, "Adam first-moment decay");
    app.add_option("--beta2", o.beta2, "Adam second-moment decay");
    app.add_option("--eps", o.eps, "Adam epsilon");

    app.add_option("--steps", cfg.steps, "Steps T; 0 = command default (run 1000, ablate 3000)");
    app.add_option("--seed", cfg.seed, "Run seed (noise, factors, grad-check draws)");
    app.add_option("--seeds", cfg.seeds,
                   "Seed list; empty = command default (ablate 0,1,2; rate-check 0..4)")
        ->delimiter(',');
    app.add_option("--t-grid", cfg.t_grid, "rate-check: values of T")->delimiter(',');
    app.add_option("--ranks", cfg.ranks, "rate-check: one fit per rank; empty = --k")->delimiter(',');
    app.add_option("--rate-c", cfg.rate_c, "rate-check: eta = c / sqrt(T)");
    app.add_option("--out", cfg.out, "Output path; empty = stdout");
    app.add_option("--summary", cfg.summary, "run: JSON summary path; empty = none");
    app.add_option("--threads", cfg.threads, "Worker threads for ablate and rate-check; 0 = all cores");
}

void check_rank(const ProblemSpec& problem, Index k) {
    const ProblemShape shape = shape_of(problem);
    for (Index size : shape.block_sizes) {
        const Index full = std::min(shape.signal_dim, size);
        if (k > full) {
            throw RankError("rank " + std::to_string(k) + " exceeds min(m, d) = " +
                            std::to_string(full));
        }
    }
}

void validate(const CliConfig& cfg) {
    cfg.problem.validate();
    cfg.optimizer.validate();
    if (cfg.steps < 0) {
        throw ConfigError("steps must be >= 0");
    }
    const bool low_rank = cfg.optimizer.kind == OptimizerKind::gradlite && !cfg.optimizer.full_rank;
    const bool ranks_replace_k = cfg.command == Command::rate_check && !cfg.ranks.empty();
    if (low_rank && !ranks_replace_k && cfg.command != Command::ablate &&
        cfg.command != Command::grad_check) {
        check_rank(cfg.problem, cfg.optimizer.k);
    }
    if (cfg.command == Command::rate_check) {
        if (cfg.t_grid.size() < 4) {
            throw ConfigError("rate-check needs at least 4 values in --t-grid");
        }
        if (!(cfg.rate_c > 0.0)) {
            throw ConfigError("rate-c must be > 0");
        }
        for (Index k : cfg.ranks) {
            if (k < 1) {
                throw ConfigError("rank k must be >= 1");
            }
            if (low_rank) {
                check_rank(cfg.problem, k);
            }
        }
    }
}

/// Opens `path` for writing, or forwards to `fallback` when the path is empty.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : path_(path), stream_(&fallback) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) {
                throw IoError("cannot open '" + path + "' for writing");
            }
            stream_ = &file_;
        }
    }

    std::ostream& stream() { return *stream_; }

    void close() {
        stream_->flush();
        if (!path_.empty()) {
            file_.close();
        }
        if (!*stream_ || (!path_.empty() && file_.fail())) {
            throw IoError("failed writing '" + (path_.empty() ? std::string("stdout") : path_) + "'");
        }
    }

private:
    std::string path_;
    std::ofstream file_;
    std::ostream* stream_;
};

int do_run(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    const std::int64_t steps = cfg.steps > 0 ? cfg.steps : kRunSteps;
    const RunMetrics metrics = run_experiment(cfg.problem, cfg.optimizer, steps, cfg.seed);
    Sink csv(cfg.out, out);
    write_metrics_csv(metrics, csv.stream());
    csv.close();
    if (!cfg.summary.empty()) {
        Sink summary(cfg.summary, out);
        write_run_summary(cfg.problem, cfg.optimizer, steps, cfg.seed, metrics, summary.stream());
        summary.close();
    }
    err << "run: " << metrics.records.size() << " steps, final loss "
        << format_number(metrics.final_loss()) << ", " << metrics.wall_seconds << " s\n";
    if (metrics.diverged) {
        err << metrics.divergence << '\n';
        return kExitDiverged;
    }
    return kExitOk;
}

int do_ablate(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    AblationConfig ablation = default_ablation();
    ablation.k = cfg.optimizer.k;
    ablation.tau = cfg.optimizer.tau;
    if (cfg.steps > 0) {
        ablation.steps = cfg.steps;
    }
    if (!cfg.seeds.empty()) {
        ablation.seeds = cfg.seeds;
    }
    if (cfg.eta_given) {
        ablation.eta = cfg.optimizer.eta;
    }
    for (std::uint64_t seed : ablation.seeds) {
        ProblemSpec instance = ablation.benchmark;
        instance.instance_seed = seed;
        check_rank(instance, ablation.k);
    }
    const AblationTable table = ablation_suite(ablation, resolve_threads(cfg.threads));
    Sink csv(cfg.out, out);
    write_ablation_csv(table, csv.stream());
    csv.close();
    err << "ablate: eta " << format_number(table.eta) << '\n';
    return kExitOk;
}

int do_rate_check(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    const std::vector<std::uint64_t> seeds = cfg.seeds.empty() ? kRateSeeds : cfg.seeds;
    std::vector<Index> ranks = cfg.ranks;
    if (ranks.empty()) {
        ranks.push_back(cfg.optimizer.k);
    }
    std::vector<std::pair<Index, RateFit>> fits;
    for (Index k : ranks) {
        OptimizerSpec opt = cfg.optimizer;
        opt.k = k;
        fits.emplace_back(k, rate_check(cfg.problem, opt, cfg.rate_c, cfg.t_grid, seeds,
                                        resolve_threads(cfg.threads)));
        err << "rate-check: k " << k << " slope " << format_number(fits.back().second.slope)
            << '\n';
    }
    Sink sink(cfg.out, out);
    write_rate_summary(cfg.problem, cfg.optimizer, cfg.rate_c, fits, sink.stream());
    sink.close();
    return kExitOk;
}

int do_grad_check(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    const GradCheckReport report = grad_check_suite(default_grad_check_cases(), cfg.seed);
    Sink sink(cfg.out, out);
    write_grad_check_report(report, sink.stream());
    sink.close();
    if (!report.all_passed()) {
        for (const GradCheck& c : report.checks) {
            if (!c.passed) {
                err << "grad-check failed: " << c.problem << " block " << c.block << ' ' << c.check
                    << " max error " << format_number(c.max_error) << '\n';
            }
        }
        return kExitGradCheck;
    }
    return kExitOk;
}

int do_mem_report(const CliConfig& cfg, std::ostream& out, std::ostream&) {
    const MemoryReport report = memory_account(cfg.problem, cfg.optimizer);
    Sink sink(cfg.out, out);
    write_memory_report(report, sink.stream());
    sink.close();
    return kExitOk;
}

}  // namespace

std::string to_string(Command command) {
    switch (command) {
    case Command::run:
        return "run";
    case Command::ablate:
        return "ablate";
    case Command::rate_check:
        return "rate-check";
    case Command::grad_check:
        return "grad-check";
    case Command::mem_report:
        return "mem-report";
    }
    return "?";
}

CliConfig parse_args(const std::vector<std::string>& args) {
    CliConfig cfg;
    RawFlags raw;
    CLI::App app{"GradLite optimizer experiments", "gradlite"};
    build_app(app, cfg, raw);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        cfg.help = true;
        return cfg;
    } catch (const CLI::FileError& e) {
        throw IoError(e.what());
    } catch (const CLI::ConfigError& e) {
        throw ConfigError(std::string("config file: ") + e.what());
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    const std::map<std::string, Command> commands = {{"run", Command::run},
                                                     {"ablate", Command::ablate},
                                                     {"rate-check", Command::rate_check},
                                                     {"grad-check", Command::grad_check},
                                                     {"mem-report", Command::mem_report}};
    cfg.command = commands.at(raw.command);
    cfg.problem.kind = *parse_problem_kind(raw.problem);
    cfg.problem.data = *parse_dataset_kind(raw.data);
    cfg.optimizer.kind = *parse_optimizer_kind(raw.opt);
    cfg.optimizer.ef_mode = *parse_ef_mode(raw.ef_mode);
    cfg.optimizer.probe = *parse_probe(raw.probe);
    cfg.optimizer.basis = *parse_basis_mode(raw.basis);
    cfg.optimizer.full_rank = raw.full_rank;
    cfg.eta_given = app.count("--eta") > 0;
    validate(cfg);
    return cfg;
}

std::string help_text() {
    CliConfig cfg;
    RawFlags raw;
    CLI::App app{"GradLite optimizer experiments", "gradlite"};
    build_app(app, cfg, raw);
    return app.help();
}

int dispatch(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    if (cfg.help) {
        out << help_text();
        return kExitOk;
    }
    switch (cfg.command) {
    case Command::run:
        return do_run(cfg, out, err);
    case Command::ablate:
        return do_ablate(cfg, out, err);
    case Command::rate_check:
        return do_rate_check(cfg, out, err);
    case Command::grad_check:
        return do_grad_check(cfg, out, err);
    case Command::mem_report:
        return do_mem_report(cfg, out, err);
    }
    return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(parse_args(args), out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\nRun with --help for the flag list.\n";
        return kExitUsage;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const DivergedError& e) {
        err << e.what() << '\n';
        return kExitDiverged;
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace gradlite::cli
