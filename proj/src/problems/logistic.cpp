#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

#include "gradlite/problems.hpp"

namespace gradlite {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double ez = std::exp(z);
    return ez / (1.0 + ez);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void check_rows(const Batch& batch, Index n) {
    for (Index r : batch.rows) {
        if (r < 0 || r >= n) {
            throw DimError("batch row " + std::to_string(r) + " outside dataset of " +
                           std::to_string(n) + " samples");
        }
    }
}

}  // namespace

LogisticProblem::LogisticProblem(Dataset data, double l2) : data_(std::move(data)), l2_(l2) {
    if (data_.x.rows() == 0 || data_.x.cols() == 0) {
        throw DimError("logistic_problem: empty design matrix");
    }
    require_dims(data_.y.size(), data_.x.rows(), "logistic_problem targets");
    if (!(l2 >= 0.0) || !std::isfinite(l2)) {
        throw ConfigError("logistic_problem: l2 must be a finite value >= 0");
    }
    require_finite(data_.x, "logistic_problem");
    for (Index i = 0; i < data_.y.size(); ++i) {
        if (data_.y(i) != 0.0 && data_.y(i) != 1.0) {
            throw DataError("logistic_problem: label " + std::to_string(data_.y(i)) +
                            " at row " + std::to_string(i) + " is not in {0, 1}");
        }
    }

    const Eigen::MatrixXd gram = data_.x.transpose() * data_.x;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    smoothness_ = 0.25 * eig.eigenvalues().maxCoeff() + l2_;

    if (l2_ > 0.0) {
        // Damped Newton; strictly convex so this reaches machine precision quickly.
        const Batch all = Batch::full();
        Vec theta = Vec::Zero(param_dim());
        double current = loss(theta, all);
        for (int it = 0; it < 100; ++it) {
            const Vec g = exact_gradient(theta, all);
            if (g.norm() <= 1e-13 * (1.0 + std::abs(current))) {
                break;
            }
            Vec weights(data_.x.rows());
            for (Index i = 0; i < data_.x.rows(); ++i) {
                const double p = sigmoid(data_.x.row(i).dot(theta));
                weights(i) = p * (1.0 - p);
            }
            Eigen::MatrixXd hess = data_.x.transpose() * weights.asDiagonal() * data_.x;
            hess.diagonal().array() += l2_;
            const Vec step = hess.ldlt().solve(g);
            double scale = 1.0;
            Vec next = theta - step;
            double next_loss = loss(next, all);
            while (next_loss > current && scale > 1e-8) {
                scale *= 0.5;
                next = theta - scale * step;
                next_loss = loss(next, all);
            }
            if (next_loss > current) {
                break;
            }
            theta = next;
            current = next_loss;
        }
        optimum_ = theta;
        optimal_loss_ = current;
    }
}

Index LogisticProblem::signal_dim(const Batch& batch) const {
    const Index rows = batch.is_full() ? data_.x.rows() : static_cast<Index>(batch.rows.size());
    return rows + (l2_ > 0.0 ? param_dim() : 0);
}

Mat LogisticProblem::rows_of(const Batch& batch) const {
    if (batch.is_full()) {
        return data_.x;
    }
    check_rows(batch, data_.x.rows());
    Mat out(static_cast<Index>(batch.rows.size()), data_.x.cols());
    for (std::size_t i = 0; i < batch.rows.size(); ++i) {
        out.row(static_cast<Index>(i)) = data_.x.row(batch.rows[i]);
    }
    return out;
}

Vec LogisticProblem::targets_of(const Batch& batch) const {
    if (batch.is_full()) {
        return data_.y;
    }
    check_rows(batch, data_.y.size());
    Vec out(static_cast<Index>(batch.rows.size()));
    for (std::size_t i = 0; i < batch.rows.size(); ++i) {
        out(static_cast<Index>(i)) = data_.y(batch.rows[i]);
    }
    return out;
}

double LogisticProblem::loss(const Vec& theta, const Batch& batch) const {
    require_dims(theta.size(), param_dim(), "logistic loss");
    const Mat x = rows_of(batch);
    const Vec y = targets_of(batch);
    const Vec z = matvec(x, theta);
    double total = 0.0;
    for (Index i = 0; i < z.size(); ++i) {
        total += softplus(z(i)) - y(i) * z(i);
    }
    return total + 0.5 * l2_ * theta.squaredNorm();
}

Vec LogisticProblem::clean_error_signal(const Vec& theta, const Batch& batch) const {
    require_dims(theta.size(), param_dim(), "logistic error_signal");
    const Mat x = rows_of(batch);
    const Vec y = targets_of(batch);
    const Vec z = matvec(x, theta);
    Vec delta(signal_dim(batch));
    for (Index i = 0; i < z.size(); ++i) {
        delta(i) = sigmoid(z(i)) - y(i);
    }
    if (l2_ > 0.0) {
        delta.tail(param_dim()) = std::sqrt(l2_) * theta;
    }
    return delta;
}

Mat LogisticProblem::jacobian(const Vec& theta, const Batch& batch, Index block) const {
    require_dims(theta.size(), param_dim(), "logistic jacobian");
    if (block != 0) {
        throw DimError("logistic jacobian: single block problem");
    }
    if (l2_ == 0.0) {
        return rows_of(batch);
    }
    const Mat x = rows_of(batch);
    Mat j = Mat::Zero(signal_dim(batch), param_dim());
    j.topRows(x.rows()) = x;
    j.bottomRows(param_dim()).diagonal().setConstant(std::sqrt(l2_));
    return j;
}

Vec LogisticProblem::gradient_from_signal(const Vec& theta, const Batch& batch,
                                          const Vec& signal) const {
    require_dims(theta.size(), param_dim(), "logistic gradient");
    require_dims(signal.size(), signal_dim(batch), "logistic gradient signal");
    const Mat x = rows_of(batch);
    Vec g = matvec_t(x, signal.head(x.rows()));
    if (l2_ > 0.0) {
        g += std::sqrt(l2_) * signal.tail(param_dim());
    }
    return g;
}

Vec LogisticProblem::exact_gradient(const Vec& theta, const Batch& batch) const {
    require_dims(theta.size(), param_dim(), "logistic gradient");
    const Mat x = rows_of(batch);
    const Vec y = targets_of(batch);
    const Vec z = matvec(x, theta);
    Vec residual(z.size());
    for (Index i = 0; i < z.size(); ++i) {
        residual(i) = sigmoid(z(i)) - y(i);
    }
    return matvec_t(x, residual) + l2_ * theta;
}

LogisticProblem logistic_problem(Dataset data, double l2) {
    return LogisticProblem(std::move(data), l2);
}

}  // namespace gradlite
