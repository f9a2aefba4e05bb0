#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gradlite/linalg.hpp"
#include "gradlite/rng.hpp"

namespace gradlite {

/// Sample rows used for one evaluation. Empty means the whole dataset.
struct Batch {
    std::vector<Index> rows;

    static Batch full() { return {}; }
    bool is_full() const { return rows.empty(); }
};

/// Contiguous slice of the parameter vector that gets its own factor and
/// accumulator.
struct BlockRange {
    Index offset = 0;
    Index size = 0;
};

/// A differentiable objective that exposes the chain-rule factorization
/// g = Jᵀδ: `error_signal` is δ, `jacobian` is J (one matrix per block), and
/// `exact_gradient` computes g by an independent route.
///
/// Everything except the noise stream is immutable after construction.
class Problem {
public:
    virtual ~Problem() = default;

    virtual std::string name() const = 0;
    virtual Index param_dim() const = 0;
    virtual Index signal_dim(const Batch& batch) const = 0;
    virtual std::vector<BlockRange> blocks() const { return {{0, param_dim()}}; }

    virtual double loss(const Vec& theta, const Batch& batch) const = 0;
    /// Noiseless δ.
    virtual Vec clean_error_signal(const Vec& theta, const Batch& batch) const = 0;
    /// m × block.size Jacobian of the model output w.r.t. one block.
    virtual Mat jacobian(const Vec& theta, const Batch& batch, Index block) const = 0;
    /// Jᵀ·signal for the whole parameter vector without materializing J.
    virtual Vec gradient_from_signal(const Vec& theta, const Batch& batch,
                                     const Vec& signal) const = 0;
    /// Noiseless gradient of `loss`.
    virtual Vec exact_gradient(const Vec& theta, const Batch& batch) const = 0;

    virtual Vec initial_point() const = 0;
    virtual std::optional<double> smoothness() const { return std::nullopt; }
    virtual std::optional<double> optimal_loss() const { return std::nullopt; }
    virtual std::optional<Vec> optimum() const { return std::nullopt; }

    /// δ with this problem's Gaussian noise added. Advances the noise stream.
    Vec error_signal(const Vec& theta, const Batch& batch);

    double noise_sigma() const { return noise_sigma_; }
    void seed_noise(std::uint64_t seed) { noise_ = NormalStream(seed); }

protected:
    explicit Problem(double noise_sigma = 0.0);

private:
    double noise_sigma_;
    NormalStream noise_;
};

/// ½(θ−θ*)ᵀA(θ−θ*) with J = A^{1/2} and δ = J(θ−θ*) + σ·ξ.
class QuadraticProblem final : public Problem {
public:
    QuadraticProblem(Mat a, Vec theta_star, double noise_sigma, Vec theta0);

    std::string name() const override { return "quadratic"; }
    Index param_dim() const override { return theta_star_.size(); }
    Index signal_dim(const Batch&) const override { return theta_star_.size(); }

    double loss(const Vec& theta, const Batch& batch) const override;
    Vec clean_error_signal(const Vec& theta, const Batch& batch) const override;
    Mat jacobian(const Vec& theta, const Batch& batch, Index block) const override;
    Vec gradient_from_signal(const Vec& theta, const Batch& batch,
                             const Vec& signal) const override;
    Vec exact_gradient(const Vec& theta, const Batch& batch) const override;

    Vec initial_point() const override { return theta0_; }
    std::optional<double> smoothness() const override { return lambda_max_; }
    std::optional<double> optimal_loss() const override { return 0.0; }
    std::optional<Vec> optimum() const override { return theta_star_; }

    const Mat& hessian() const { return a_; }
    const Mat& sqrt_hessian() const { return sqrt_a_; }

private:
    Mat a_;
    Mat sqrt_a_;
    Vec theta_star_;
    Vec theta0_;
    double lambda_max_ = 0.0;
};

QuadraticProblem quadratic_problem(const Mat& a, const Vec& theta_star, double noise_sigma);

/// Benchmark quadratic: eigenvalues evenly spaced on [1/cond, 1] under a random
/// rotation, θ0 = 0, and an initial error whose energy λᵢ·eᵢ² is equal across
/// eigen-directions with ‖θ0 − θ*‖ = radius.
QuadraticProblem conditioned_quadratic(Index d, double cond, double noise_sigma, double radius,
                                       std::uint64_t seed);

enum class DatasetKind { gaussian_logistic, low_rank_regression };

struct Dataset {
    Mat x;
    Vec y;
    std::uint64_t seed = 0;
};

/// Condition number σ₁/σ_d of low-rank-regression designs.
inline constexpr double kLowRankCondition = 1e3;

Dataset synth_dataset(std::uint64_t seed, Index n, Index d, DatasetKind kind);
/// Labels 1[y > 0], turning a regression target into a classification one.
Dataset binarize_targets(Dataset data);

void write_dataset_csv(const Dataset& data, std::ostream& out);
Dataset read_dataset_csv(std::istream& in);

/// Σᵢ softplus(xᵢᵀθ) − yᵢ·xᵢᵀθ + ½·l2·‖θ‖². With l2 > 0 the factorization is
/// augmented: J = [X; √l2·I] and δ = [σ(Xθ) − y; √l2·θ], so g = Jᵀδ still holds.
class LogisticProblem final : public Problem {
public:
    LogisticProblem(Dataset data, double l2);

    std::string name() const override { return "logistic"; }
    Index param_dim() const override { return data_.x.cols(); }
    Index signal_dim(const Batch& batch) const override;

    double loss(const Vec& theta, const Batch& batch) const override;
    Vec clean_error_signal(const Vec& theta, const Batch& batch) const override;
    Mat jacobian(const Vec& theta, const Batch& batch, Index block) const override;
    Vec gradient_from_signal(const Vec& theta, const Batch& batch,
                             const Vec& signal) const override;
    Vec exact_gradient(const Vec& theta, const Batch& batch) const override;

    Vec initial_point() const override { return Vec::Zero(param_dim()); }
    std::optional<double> smoothness() const override { return smoothness_; }
    std::optional<double> optimal_loss() const override { return optimal_loss_; }
    std::optional<Vec> optimum() const override { return optimum_; }

    const Dataset& data() const { return data_; }
    double l2() const { return l2_; }

private:
    Mat rows_of(const Batch& batch) const;
    Vec targets_of(const Batch& batch) const;

    Dataset data_;
    double l2_;
    double smoothness_ = 0.0;
    std::optional<Vec> optimum_;
    std::optional<double> optimal_loss_;
};

LogisticProblem logistic_problem(Dataset data, double l2);

enum class Activation { tanh };

/// Fully connected regression network, tanh on hidden layers, linear scalar
/// output, loss 1/(2n)·Σ(f(xᵢ) − yᵢ)². One block per layer holding W (row-major)
/// then b.
class MlpProblem final : public Problem {
public:
    MlpProblem(std::vector<Index> layers, Dataset data, std::uint64_t init_seed);

    std::string name() const override { return "mlp"; }
    Index param_dim() const override { return param_dim_; }
    Index signal_dim(const Batch& batch) const override;
    std::vector<BlockRange> blocks() const override { return blocks_; }

    double loss(const Vec& theta, const Batch& batch) const override;
    Vec clean_error_signal(const Vec& theta, const Batch& batch) const override;
    /// Built by pushing tangent bases forward through the later layers, a path
    /// independent of backprop.
    Mat jacobian(const Vec& theta, const Batch& batch, Index block) const override;
    Vec gradient_from_signal(const Vec& theta, const Batch& batch,
                             const Vec& signal) const override;
    Vec exact_gradient(const Vec& theta, const Batch& batch) const override;

    Vec initial_point() const override { return theta0_; }

    const std::vector<Index>& layers() const { return layers_; }
    /// Network output for every sample of the batch.
    Vec predict(const Vec& theta, const Batch& batch) const;

private:
    struct Forward {
        std::vector<Vec> activations;  // h_0 = x, ..., h_{L-1}
        std::vector<Vec> preacts;      // z_1, ..., z_L
    };

    Forward forward(const Vec& theta, Index sample) const;
    std::vector<Index> sample_ids(const Batch& batch) const;

    std::vector<Index> layers_;
    Dataset data_;
    std::vector<BlockRange> blocks_;
    Index param_dim_ = 0;
    Vec theta0_;
};

MlpProblem mlp_problem(std::vector<Index> layers, Activation activation, Dataset data,
                       std::uint64_t init_seed = 0);

/// Central differences of the noiseless loss.
Vec finite_difference_gradient(const Problem& problem, const Vec& theta, double h,
                               const Batch& batch = Batch::full());

}  // namespace gradlite
