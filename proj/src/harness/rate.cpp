#include <cmath>
#include <ostream>

#include "gradlite/harness.hpp"
#include "gradlite/parallel.hpp"
#include "summary.hpp"

namespace gradlite {

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

void validate_grid(const std::vector<std::int64_t>& t_grid, const std::vector<std::uint64_t>& seeds,
                   double c) {
    if (t_grid.size() < 4) {
        throw ConfigError("rate check needs at least 4 values of T");
    }
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (t_grid[i] < 1 || (i > 0 && t_grid[i] <= t_grid[i - 1])) {
            throw ConfigError("T grid must be positive and strictly increasing");
        }
    }
    if (seeds.empty()) {
        throw ConfigError("rate check needs at least one seed");
    }
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw ConfigError("rate constant c must be > 0");
    }
}

}  // namespace

RateFit rate_check(const ProblemSpec& problem, const OptimizerSpec& optimizer, double c,
                   const std::vector<std::int64_t>& t_grid, const std::vector<std::uint64_t>& seeds,
                   unsigned threads) {
    validate_grid(t_grid, seeds, c);
    optimizer.validate();
    if (!build_problem(problem, 0)->optimal_loss()) {
        throw NonPositiveGapError("rate check needs a problem with known optimal loss");
    }

    const std::size_t runs = t_grid.size() * seeds.size();
    const std::vector<double> gaps = parallel_map<double>(runs, threads, [&](std::size_t i) {
        const std::int64_t steps = t_grid[i / seeds.size()];
        OptimizerSpec opt = optimizer;
        opt.eta = c / std::sqrt(static_cast<double>(steps));
        const RunMetrics metrics = run_experiment(problem, opt, steps, seeds[i % seeds.size()]);
        if (metrics.diverged) {
            throw DivergedError(static_cast<std::int64_t>(metrics.records.size()) + 1,
                                "rate check run with T=" + std::to_string(steps) + ": " +
                                    metrics.divergence);
        }
        return metrics.final_gap();
    });

    RateFit fit;
    std::vector<double> log_t;
    std::vector<double> log_gap;
    for (std::size_t g = 0; g < t_grid.size(); ++g) {
        RatePoint point;
        point.steps = t_grid[g];
        point.eta = c / std::sqrt(static_cast<double>(point.steps));
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            point.gaps.push_back(gaps[g * seeds.size() + s]);
            point.mean_gap += point.gaps.back();
        }
        point.mean_gap /= static_cast<double>(seeds.size());
        if (!(point.mean_gap > 0.0)) {
            throw NonPositiveGapError("mean gap at T=" + std::to_string(point.steps) +
                                      " is not positive; the log-log fit is undefined");
        }
        log_t.push_back(std::log(static_cast<double>(point.steps)));
        log_gap.push_back(std::log(point.mean_gap));
        fit.points.push_back(std::move(point));
    }
    const LineFit line = least_squares(log_t, log_gap);
    fit.slope = line.slope;
    fit.intercept = line.intercept;
    fit.r_squared = line.r_squared;

    // mean_gap ≈ a/√T + C
    std::vector<double> inv_sqrt;
    std::vector<double> mean;
    for (const RatePoint& p : fit.points) {
        inv_sqrt.push_back(1.0 / std::sqrt(static_cast<double>(p.steps)));
        mean.push_back(p.mean_gap);
    }
    const LineFit trend = least_squares(inv_sqrt, mean);
    fit.trend = trend.slope * inv_sqrt.back();
    fit.error_floor = mean.back() - fit.trend;
    return fit;
}

void write_rate_summary(const ProblemSpec& problem, const OptimizerSpec& optimizer, double c,
                        const std::vector<std::pair<Index, RateFit>>& fits, std::ostream& out) {
    nlohmann::ordered_json j;
    j["command"] = "rate-check";
    j["problem"] = problem_json(problem);
    j["optimizer"] = optimizer_json(optimizer);
    j["c"] = c;
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& [k, fit] : fits) {
        nlohmann::ordered_json f;
        f["k"] = k;
        f["slope"] = json_number(fit.slope);
        f["intercept"] = json_number(fit.intercept);
        f["r_squared"] = json_number(fit.r_squared);
        f["trend"] = json_number(fit.trend);
        f["error_floor"] = json_number(fit.error_floor);
        nlohmann::ordered_json points = nlohmann::ordered_json::array();
        for (const RatePoint& p : fit.points) {
            nlohmann::ordered_json pj;
            pj["steps"] = p.steps;
            pj["eta"] = p.eta;
            pj["mean_gap"] = json_number(p.mean_gap);
            pj["gaps"] = p.gaps;
            points.push_back(pj);
        }
        f["points"] = points;
        list.push_back(f);
    }
    j["fits"] = list;
    j["diverged"] = false;
    out << j.dump(2) << '\n';
}

}  // namespace gradlite
