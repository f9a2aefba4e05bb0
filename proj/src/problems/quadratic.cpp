#include <Eigen/Eigenvalues>

#include <cmath>

#include "gradlite/problems.hpp"

namespace gradlite {

namespace {

using ColMat = Eigen::MatrixXd;

}  // namespace

QuadraticProblem::QuadraticProblem(Mat a, Vec theta_star, double noise_sigma, Vec theta0)
    : Problem(noise_sigma), a_(std::move(a)), theta_star_(std::move(theta_star)),
      theta0_(std::move(theta0)) {
    const Index d = theta_star_.size();
    if (d == 0 || a_.rows() != d || a_.cols() != d || theta0_.size() != d) {
        throw DimError("quadratic_problem: A must be d x d with d = len(theta_star)");
    }
    require_finite(a_, "quadratic_problem");
    require_finite(theta_star_, "quadratic_problem");
    const double scale = a_.cwiseAbs().maxCoeff();
    if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0)) {
        throw SpdError("quadratic_problem: A is not symmetric");
    }
    const ColMat dense = a_;
    Eigen::SelfAdjointEigenSolver<ColMat> eig(dense);
    if (eig.info() != Eigen::Success) {
        throw SpdError("quadratic_problem: eigendecomposition failed");
    }
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    if (!(lambda.minCoeff() > 0.0)) {
        throw SpdError("quadratic_problem: A is not positive definite (min eigenvalue " +
                       std::to_string(lambda.minCoeff()) + ")");
    }
    lambda_max_ = lambda.maxCoeff();
    const ColMat& q = eig.eigenvectors();
    sqrt_a_ = q * lambda.cwiseSqrt().asDiagonal() * q.transpose();
}

double QuadraticProblem::loss(const Vec& theta, const Batch&) const {
    require_dims(theta.size(), param_dim(), "quadratic loss");
    const Vec e = theta - theta_star_;
    return 0.5 * e.dot(matvec(a_, e));
}

Vec QuadraticProblem::clean_error_signal(const Vec& theta, const Batch&) const {
    require_dims(theta.size(), param_dim(), "quadratic error_signal");
    return matvec(sqrt_a_, theta - theta_star_);
}

Mat QuadraticProblem::jacobian(const Vec& theta, const Batch&, Index block) const {
    require_dims(theta.size(), param_dim(), "quadratic jacobian");
    if (block != 0) {
        throw DimError("quadratic jacobian: single block problem");
    }
    return sqrt_a_;
}

Vec QuadraticProblem::gradient_from_signal(const Vec& theta, const Batch&,
                                           const Vec& signal) const {
    require_dims(theta.size(), param_dim(), "quadratic gradient");
    return matvec_t(sqrt_a_, signal);
}

Vec QuadraticProblem::exact_gradient(const Vec& theta, const Batch&) const {
    require_dims(theta.size(), param_dim(), "quadratic gradient");
    return matvec(a_, theta - theta_star_);
}

QuadraticProblem quadratic_problem(const Mat& a, const Vec& theta_star, double noise_sigma) {
    return QuadraticProblem(a, theta_star, noise_sigma, Vec::Zero(theta_star.size()));
}

QuadraticProblem conditioned_quadratic(Index d, double cond, double noise_sigma, double radius,
                                       std::uint64_t seed) {
    if (d < 1) {
        throw ConfigError("conditioned_quadratic: d must be >= 1");
    }
    if (!(cond >= 1.0)) {
        throw ConfigError("conditioned_quadratic: condition number must be >= 1");
    }
    if (!(radius > 0.0)) {
        throw ConfigError("conditioned_quadratic: radius must be > 0");
    }
    const Mat rotation = orthonormal_basis(gaussian_matrix(d, d, derive_seed(seed, 0)));
    Vec lambda(d);
    for (Index i = 0; i < d; ++i) {
        const double frac = d == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(d - 1);
        lambda(i) = 1.0 / cond + (1.0 - 1.0 / cond) * frac;
    }
    Mat a = rotation * lambda.asDiagonal() * rotation.transpose();
    a = (0.5 * (a + a.transpose())).eval();

    // Equal energy λᵢ·eᵢ² in every eigen-direction.
    const double weight = radius * radius / lambda.cwiseInverse().sum();
    SplitMix64 signs(derive_seed(seed, 1));
    Vec e_eigen(d);
    for (Index i = 0; i < d; ++i) {
        const double sign = (signs.next() & 1U) ? 1.0 : -1.0;
        e_eigen(i) = sign * std::sqrt(weight / lambda(i));
    }
    Vec theta_star = -(rotation * e_eigen);
    return QuadraticProblem(std::move(a), std::move(theta_star), noise_sigma, Vec::Zero(d));
}

}  // namespace gradlite
