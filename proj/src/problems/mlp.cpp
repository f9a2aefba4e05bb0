#include <cmath>

#include "gradlite/problems.hpp"

namespace gradlite {

namespace {

inline constexpr Index kMaxMlpParams = 100000;

using ConstMatMap = Eigen::Map<const Mat>;

}  // namespace

MlpProblem::MlpProblem(std::vector<Index> layers, Dataset data, std::uint64_t init_seed)
    : layers_(std::move(layers)), data_(std::move(data)) {
    if (layers_.size() < 2) {
        throw DimError("mlp_problem: need at least input and output widths");
    }
    for (Index w : layers_) {
        if (w < 1) {
            throw DimError("mlp_problem: layer widths must be >= 1");
        }
    }
    if (layers_.back() != 1) {
        throw DimError("mlp_problem: scalar targets need an output width of 1");
    }
    if (data_.x.cols() != layers_.front()) {
        throw DimError("mlp_problem: input width " + std::to_string(layers_.front()) +
                       " does not match " + std::to_string(data_.x.cols()) + " features");
    }
    require_dims(data_.y.size(), data_.x.rows(), "mlp_problem targets");
    if (data_.x.rows() == 0) {
        throw DimError("mlp_problem: empty dataset");
    }

    Index offset = 0;
    for (std::size_t l = 1; l < layers_.size(); ++l) {
        const Index size = layers_[l] * layers_[l - 1] + layers_[l];
        blocks_.push_back({offset, size});
        offset += size;
    }
    param_dim_ = offset;
    if (param_dim_ > kMaxMlpParams) {
        throw ConfigError("mlp_problem: " + std::to_string(param_dim_) +
                          " parameters exceeds the desk-scale cap of 100000");
    }

    NormalStream normal(init_seed);
    theta0_ = Vec::Zero(param_dim_);
    for (std::size_t l = 1; l < layers_.size(); ++l) {
        const BlockRange& b = blocks_[l - 1];
        const double scale = 1.0 / std::sqrt(static_cast<double>(layers_[l - 1]));
        for (Index i = 0; i < layers_[l] * layers_[l - 1]; ++i) {
            theta0_(b.offset + i) = scale * normal.next();
        }
    }
}

Index MlpProblem::signal_dim(const Batch& batch) const {
    return batch.is_full() ? data_.x.rows() : static_cast<Index>(batch.rows.size());
}

std::vector<Index> MlpProblem::sample_ids(const Batch& batch) const {
    if (!batch.is_full()) {
        for (Index r : batch.rows) {
            if (r < 0 || r >= data_.x.rows()) {
                throw DimError("batch row " + std::to_string(r) + " outside dataset");
            }
        }
        return batch.rows;
    }
    std::vector<Index> ids(static_cast<std::size_t>(data_.x.rows()));
    for (Index i = 0; i < data_.x.rows(); ++i) {
        ids[static_cast<std::size_t>(i)] = i;
    }
    return ids;
}

MlpProblem::Forward MlpProblem::forward(const Vec& theta, Index sample) const {
    Forward fw;
    fw.activations.push_back(data_.x.row(sample).transpose());
    const std::size_t depth = layers_.size() - 1;
    for (std::size_t l = 1; l <= depth; ++l) {
        const BlockRange& b = blocks_[l - 1];
        const ConstMatMap w(theta.data() + b.offset, layers_[l], layers_[l - 1]);
        const auto bias = theta.segment(b.offset + layers_[l] * layers_[l - 1], layers_[l]);
        Vec z = matvec(w, fw.activations.back()) + bias;
        if (l < depth) {
            fw.activations.push_back(z.array().tanh().matrix());
        }
        fw.preacts.push_back(std::move(z));
    }
    return fw;
}

Vec MlpProblem::predict(const Vec& theta, const Batch& batch) const {
    require_dims(theta.size(), param_dim_, "mlp predict");
    const std::vector<Index> ids = sample_ids(batch);
    Vec out(static_cast<Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out(static_cast<Index>(i)) = forward(theta, ids[i]).preacts.back()(0);
    }
    return out;
}

double MlpProblem::loss(const Vec& theta, const Batch& batch) const {
    const std::vector<Index> ids = sample_ids(batch);
    const Vec f = predict(theta, batch);
    double total = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const double r = f(static_cast<Index>(i)) - data_.y(ids[i]);
        total += r * r;
    }
    return total / (2.0 * static_cast<double>(ids.size()));
}

Vec MlpProblem::clean_error_signal(const Vec& theta, const Batch& batch) const {
    const std::vector<Index> ids = sample_ids(batch);
    const Vec f = predict(theta, batch);
    const double n = static_cast<double>(ids.size());
    Vec delta(f.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        delta(static_cast<Index>(i)) = (f(static_cast<Index>(i)) - data_.y(ids[i])) / n;
    }
    return delta;
}

Mat MlpProblem::jacobian(const Vec& theta, const Batch& batch, Index block) const {
    require_dims(theta.size(), param_dim_, "mlp jacobian");
    if (block < 0 || block >= static_cast<Index>(blocks_.size())) {
        throw DimError("mlp jacobian: block " + std::to_string(block) + " out of range");
    }
    const std::vector<Index> ids = sample_ids(batch);
    const std::size_t layer = static_cast<std::size_t>(block) + 1;
    const std::size_t depth = layers_.size() - 1;
    const Index fan_out = layers_[layer];
    const Index fan_in = layers_[layer - 1];

    Mat j(static_cast<Index>(ids.size()), blocks_[static_cast<std::size_t>(block)].size);
    for (std::size_t row = 0; row < ids.size(); ++row) {
        const Forward fw = forward(theta, ids[row]);
        // Tangents of z_layer along each coordinate direction, pushed forward.
        Mat tangent = Mat::Identity(fan_out, fan_out);
        for (std::size_t next = layer + 1; next <= depth; ++next) {
            const BlockRange& b = blocks_[next - 1];
            const ConstMatMap w(theta.data() + b.offset, layers_[next], layers_[next - 1]);
            const Vec& h = fw.activations[next - 1];
            const Vec slope = (1.0 - h.array().square()).matrix();
            tangent = (w * slope.asDiagonal() * tangent).eval();
        }
        const Vec& input = fw.activations[layer - 1];
        const Index r = static_cast<Index>(row);
        for (Index a = 0; a < fan_out; ++a) {
            const double sens = tangent(0, a);
            for (Index c = 0; c < fan_in; ++c) {
                j(r, a * fan_in + c) = sens * input(c);
            }
            j(r, fan_out * fan_in + a) = sens;
        }
    }
    return j;
}

Vec MlpProblem::gradient_from_signal(const Vec& theta, const Batch& batch,
                                     const Vec& signal) const {
    require_dims(theta.size(), param_dim_, "mlp gradient");
    const std::vector<Index> ids = sample_ids(batch);
    require_dims(signal.size(), static_cast<Index>(ids.size()), "mlp gradient signal");
    const std::size_t depth = layers_.size() - 1;

    Vec grad = Vec::Zero(param_dim_);
    for (std::size_t row = 0; row < ids.size(); ++row) {
        const Forward fw = forward(theta, ids[row]);
        Vec back = Vec::Constant(1, signal(static_cast<Index>(row)));
        for (std::size_t l = depth; l >= 1; --l) {
            const BlockRange& b = blocks_[l - 1];
            const Vec& input = fw.activations[l - 1];
            const Index fan_out = layers_[l];
            const Index fan_in = layers_[l - 1];
            for (Index a = 0; a < fan_out; ++a) {
                for (Index c = 0; c < fan_in; ++c) {
                    grad(b.offset + a * fan_in + c) += back(a) * input(c);
                }
                grad(b.offset + fan_out * fan_in + a) += back(a);
            }
            if (l > 1) {
                const ConstMatMap w(theta.data() + b.offset, fan_out, fan_in);
                back = (matvec_t(w, back).array() * (1.0 - input.array().square())).matrix();
            }
        }
    }
    return grad;
}

Vec MlpProblem::exact_gradient(const Vec& theta, const Batch& batch) const {
    return gradient_from_signal(theta, batch, clean_error_signal(theta, batch));
}

MlpProblem mlp_problem(std::vector<Index> layers, Activation, Dataset data,
                       std::uint64_t init_seed) {
    return MlpProblem(std::move(layers), std::move(data), init_seed);
}

}  // namespace gradlite
