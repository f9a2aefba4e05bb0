#include <cmath>
#include <cstdio>
#include <numeric>

#include "gradlite/harness.hpp"

namespace gradlite {

namespace {

inline constexpr std::uint64_t kNoiseStream = 0x4E015EULL;
inline constexpr std::uint64_t kInitStream = 0x1417ULL;

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::string& s, const std::pair<const char*, Enum> (&table)[N]) {
    for (const auto& [name, value] : table) {
        if (s == name) {
            return value;
        }
    }
    return std::nullopt;
}

template <typename Enum, std::size_t N>
std::string name_of(Enum value, const std::pair<const char*, Enum> (&table)[N]) {
    for (const auto& [name, v] : table) {
        if (v == value) {
            return name;
        }
    }
    return "?";
}

const std::pair<const char*, ProblemKind> kProblemNames[] = {
    {"quadratic", ProblemKind::quadratic},
    {"logistic", ProblemKind::logistic},
    {"mlp", ProblemKind::mlp},
};
const std::pair<const char*, OptimizerKind> kOptimizerNames[] = {
    {"gradlite", OptimizerKind::gradlite},
    {"sgd", OptimizerKind::sgd},
    {"adam", OptimizerKind::adam},
    {"galore", OptimizerKind::galore},
};
const std::pair<const char*, EfMode> kEfNames[] = {
    {"paper", EfMode::paper},
    {"ef-standard", EfMode::ef_standard},
    {"off", EfMode::off},
};
const std::pair<const char*, Probe> kProbeNames[] = {
    {"exact", Probe::exact},
    {"none", Probe::none},
};
const std::pair<const char*, BasisMode> kBasisNames[] = {
    {"svd", BasisMode::svd},
    {"random-projection", BasisMode::random_projection},
};
const std::pair<const char*, DatasetKind> kDatasetNames[] = {
    {"gaussian-logistic", DatasetKind::gaussian_logistic},
    {"low-rank-regression", DatasetKind::low_rank_regression},
};

Dataset problem_data(const ProblemSpec& spec) {
    Dataset data = synth_dataset(spec.instance_seed, spec.samples, spec.dim, spec.data);
    if (spec.kind == ProblemKind::logistic && spec.data == DatasetKind::low_rank_regression) {
        data = binarize_targets(std::move(data));
    }
    return data;
}

std::vector<Index> mlp_layers(const ProblemSpec& spec) {
    std::vector<Index> layers{spec.dim};
    layers.insert(layers.end(), spec.hidden.begin(), spec.hidden.end());
    layers.push_back(1);
    return layers;
}

}  // namespace

std::string to_string(ProblemKind kind) { return name_of(kind, kProblemNames); }
std::string to_string(OptimizerKind kind) { return name_of(kind, kOptimizerNames); }
std::string to_string(EfMode mode) { return name_of(mode, kEfNames); }
std::string to_string(Probe probe) { return name_of(probe, kProbeNames); }
std::string to_string(BasisMode mode) { return name_of(mode, kBasisNames); }
std::string to_string(DatasetKind kind) { return name_of(kind, kDatasetNames); }

std::optional<ProblemKind> parse_problem_kind(const std::string& s) { return lookup(s, kProblemNames); }
std::optional<OptimizerKind> parse_optimizer_kind(const std::string& s) { return lookup(s, kOptimizerNames); }
std::optional<EfMode> parse_ef_mode(const std::string& s) { return lookup(s, kEfNames); }
std::optional<Probe> parse_probe(const std::string& s) { return lookup(s, kProbeNames); }
std::optional<BasisMode> parse_basis_mode(const std::string& s) { return lookup(s, kBasisNames); }
std::optional<DatasetKind> parse_dataset_kind(const std::string& s) { return lookup(s, kDatasetNames); }

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void ProblemSpec::validate() const {
    if (dim < 1) {
        throw ConfigError("problem dimension must be >= 1");
    }
    if (!(noise >= 0.0) || !std::isfinite(noise)) {
        throw ConfigError("noise must be >= 0");
    }
    switch (kind) {
    case ProblemKind::quadratic:
        if (!(cond >= 1.0) || !std::isfinite(cond)) {
            throw ConfigError("condition number must be >= 1");
        }
        if (!(radius > 0.0) || !std::isfinite(radius)) {
            throw ConfigError("radius must be > 0");
        }
        break;
    case ProblemKind::logistic:
    case ProblemKind::mlp:
        if (samples < 1) {
            throw ConfigError("samples must be >= 1");
        }
        if (noise != 0.0) {
            throw ConfigError("noise injection is only defined for the quadratic problem");
        }
        if (!(l2 >= 0.0) || !std::isfinite(l2)) {
            throw ConfigError("l2 must be >= 0");
        }
        break;
    }
    if (kind == ProblemKind::mlp) {
        for (Index w : hidden) {
            if (w < 1) {
                throw ConfigError("hidden widths must be >= 1");
            }
        }
    }
}

Index ProblemShape::param_dim() const {
    return std::accumulate(block_sizes.begin(), block_sizes.end(), Index{0});
}

ProblemShape shape_of(const ProblemSpec& spec) {
    spec.validate();
    ProblemShape shape;
    switch (spec.kind) {
    case ProblemKind::quadratic:
        shape.signal_dim = spec.dim;
        shape.block_sizes = {spec.dim};
        break;
    case ProblemKind::logistic:
        shape.signal_dim = spec.samples + (spec.l2 > 0.0 ? spec.dim : 0);
        shape.block_sizes = {spec.dim};
        break;
    case ProblemKind::mlp: {
        shape.signal_dim = spec.samples;
        const std::vector<Index> layers = mlp_layers(spec);
        for (std::size_t l = 1; l < layers.size(); ++l) {
            shape.block_sizes.push_back(layers[l] * layers[l - 1] + layers[l]);
        }
        break;
    }
    }
    return shape;
}

std::unique_ptr<Problem> build_problem(const ProblemSpec& spec, std::uint64_t run_seed) {
    spec.validate();
    std::unique_ptr<Problem> problem;
    switch (spec.kind) {
    case ProblemKind::quadratic:
        problem = std::make_unique<QuadraticProblem>(
            conditioned_quadratic(spec.dim, spec.cond, spec.noise, spec.radius, spec.instance_seed));
        break;
    case ProblemKind::logistic:
        problem = std::make_unique<LogisticProblem>(problem_data(spec), spec.l2);
        break;
    case ProblemKind::mlp:
        problem = std::make_unique<MlpProblem>(mlp_layers(spec), problem_data(spec),
                                               derive_seed(spec.instance_seed, kInitStream));
        break;
    }
    problem->seed_noise(derive_seed(run_seed, kNoiseStream));
    return problem;
}

void OptimizerSpec::validate() const {
    switch (kind) {
    case OptimizerKind::gradlite:
        gradlite(0).validate();
        break;
    case OptimizerKind::sgd:
        if (!(eta >= 0.0) || !std::isfinite(eta)) {
            throw ConfigError("eta must be >= 0");
        }
        break;
    case OptimizerKind::adam:
        adam().validate();
        break;
    case OptimizerKind::galore:
        galore(0).validate();
        break;
    }
}

GradLiteConfig OptimizerSpec::gradlite(std::uint64_t seed) const {
    GradLiteConfig cfg;
    cfg.eta = eta;
    cfg.k = k;
    cfg.full_rank = full_rank;
    cfg.tau = tau;
    cfg.ef_mode = ef_mode;
    cfg.probe = probe;
    cfg.basis = basis;
    cfg.seed = seed;
    cfg.power_iters = power_iters;
    return cfg;
}

AdamConfig OptimizerSpec::adam() const { return {eta, beta1, beta2, eps}; }

GaloreConfig OptimizerSpec::galore(std::uint64_t seed) const {
    return {eta, k, tau, seed, power_iters};
}

}  // namespace gradlite
