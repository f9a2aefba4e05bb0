#include "gradlite/problems.hpp"

namespace gradlite {

Problem::Problem(double noise_sigma) : noise_sigma_(noise_sigma), noise_(0) {
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw ConfigError("noise sigma must be a finite value >= 0");
    }
}

Vec Problem::error_signal(const Vec& theta, const Batch& batch) {
    Vec delta = clean_error_signal(theta, batch);
    if (noise_sigma_ > 0.0) {
        for (Index i = 0; i < delta.size(); ++i) {
            delta(i) += noise_sigma_ * noise_.next();
        }
    }
    return delta;
}

Vec finite_difference_gradient(const Problem& problem, const Vec& theta, double h,
                               const Batch& batch) {
    if (!(h > 0.0)) {
        throw ConfigError("finite difference step must be > 0");
    }
    require_dims(theta.size(), problem.param_dim(), "finite_difference_gradient");
    Vec grad(theta.size());
    Vec probe = theta;
    for (Index i = 0; i < theta.size(); ++i) {
        probe(i) = theta(i) + h;
        const double up = problem.loss(probe, batch);
        probe(i) = theta(i) - h;
        const double down = problem.loss(probe, batch);
        probe(i) = theta(i);
        grad(i) = (up - down) / (2.0 * h);
    }
    return grad;
}

}  // namespace gradlite
