#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <memory>
#include <sstream>

#include "gradlite/problems.hpp"
#include "support.hpp"

using namespace gradlite;
using namespace testing;

namespace {

Mat diag(std::initializer_list<double> xs) {
    const Vec v = vec(xs);
    Mat m = Mat::Zero(v.size(), v.size());
    m.diagonal() = v;
    return m;
}

std::vector<std::unique_ptr<Problem>> suite() {
    std::vector<std::unique_ptr<Problem>> out;
    out.push_back(std::make_unique<QuadraticProblem>(conditioned_quadratic(10, 50.0, 0.0, 2.0, 3)));
    out.push_back(std::make_unique<LogisticProblem>(
        logistic_problem(synth_dataset(4, 30, 6, DatasetKind::gaussian_logistic), 0.0)));
    out.push_back(std::make_unique<LogisticProblem>(logistic_problem(
        binarize_targets(synth_dataset(5, 40, 8, DatasetKind::low_rank_regression)), 0.5)));
    out.push_back(std::make_unique<MlpProblem>(
        mlp_problem({5, 7, 4, 1}, Activation::tanh, synth_dataset(6, 20, 5, DatasetKind::low_rank_regression), 2)));
    return out;
}

Vec draw(const Problem& p, std::uint64_t seed, double scale = 1.0) {
    return scale * random_vec(p.param_dim(), seed);
}

Batch random_batch(Index n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Batch b;
    for (Index i = 0; i < n; ++i) {
        if (rng.uniform() < 0.5) {
            b.rows.push_back(i);
        }
    }
    if (b.rows.empty()) {
        b.rows.push_back(0);
    }
    return b;
}

}  // namespace

TEST_CASE("quadratic examples") {
    const QuadraticProblem q = quadratic_problem(Mat::Identity(2, 2), Vec::Zero(2), 0.0);
    const Vec theta = vec({3, 4});
    CHECK(q.loss(theta, Batch::full()) == 12.5);
    CHECK(q.exact_gradient(theta, Batch::full()) == vec({3, 4}));
    CHECK(q.clean_error_signal(Vec::Zero(2), Batch::full()) == Vec::Zero(2));

    const QuadraticProblem q4 = quadratic_problem(diag({1, 4}), Vec::Zero(2), 0.0);
    CHECK(max_abs(q4.jacobian(vec({1, 1}), Batch::full(), 0) - diag({1, 2})) <= 1e-15);
    CHECK((q4.clean_error_signal(vec({1, 1}), Batch::full()) - vec({1, 2})).norm() <= 1e-15);
    CHECK(q4.exact_gradient(vec({1, 1}), Batch::full()) == vec({1, 4}));
    CHECK(*q4.smoothness() == doctest::Approx(4.0));
    CHECK(*q4.optimal_loss() == 0.0);
}

TEST_CASE("quadratic rejects matrices that are not SPD") {
    CHECK_THROWS_AS(quadratic_problem(diag({1, -1}), Vec::Zero(2), 0.0), SpdError);
    CHECK_THROWS_AS(quadratic_problem(diag({1, 0}), Vec::Zero(2), 0.0), SpdError);
    CHECK_THROWS_AS(quadratic_problem(mat({{1, 0.5}, {0, 1}}), Vec::Zero(2), 0.0), SpdError);
    CHECK_THROWS_AS(quadratic_problem(Mat::Identity(2, 2), Vec::Zero(3), 0.0), DimError);
}

TEST_CASE("conditioned quadratic has the requested spectrum and start") {
    const QuadraticProblem q = conditioned_quadratic(20, 100.0, 0.0, 3.0, 1);
    const Eigen::MatrixXd h = q.hessian();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    CHECK(eig.eigenvalues().maxCoeff() == doctest::Approx(1.0));
    CHECK(eig.eigenvalues().minCoeff() == doctest::Approx(0.01));
    const Vec e = q.initial_point() - *q.optimum();
    CHECK(e.norm() == doctest::Approx(3.0));
    // Equal energy λᵢ·(qᵢᵀe)² in every eigen-direction.
    const Vec proj = eig.eigenvectors().transpose() * e;
    const Vec energy = eig.eigenvalues().cwiseProduct(proj.cwiseAbs2());
    CHECK(energy.maxCoeff() == doctest::Approx(energy.minCoeff()).epsilon(1e-8));
}

TEST_CASE("logistic examples") {
    const Dataset data = synth_dataset(0, 12, 3, DatasetKind::gaussian_logistic);
    const LogisticProblem p = logistic_problem(data, 0.0);
    const Vec delta = p.clean_error_signal(Vec::Zero(3), Batch::full());
    for (Index i = 0; i < 12; ++i) {
        CHECK(delta(i) == 0.5 - data.y(i));
    }

    Dataset one;
    one.x = mat({{1, 0}});
    one.y = vec({1});
    const LogisticProblem single = logistic_problem(one, 0.0);
    CHECK(single.exact_gradient(Vec::Zero(2), Batch::full()) == vec({-0.5, 0}));

    Dataset bad = one;
    bad.y = vec({2});
    CHECK_THROWS_AS(logistic_problem(bad, 0.0), DataError);
    CHECK_THROWS_AS(logistic_problem(one, -1.0), ConfigError);
}

TEST_CASE("logistic with l2 knows its optimum") {
    const LogisticProblem p = logistic_problem(
        binarize_targets(synth_dataset(2, 60, 5, DatasetKind::low_rank_regression)), 0.1);
    REQUIRE(p.optimum());
    CHECK(p.exact_gradient(*p.optimum(), Batch::full()).norm() <= 1e-10);
    for (std::uint64_t s = 0; s < 20; ++s) {
        CHECK(p.loss(draw(p, s), Batch::full()) >= *p.optimal_loss());
    }
}

TEST_CASE("mlp examples") {
    const Dataset data = synth_dataset(1, 15, 4, DatasetKind::low_rank_regression);
    Dataset zero = data;
    zero.y.setZero();
    const MlpProblem p = mlp_problem({4, 6, 1}, Activation::tanh, zero);
    CHECK(p.loss(Vec::Zero(p.param_dim()), Batch::full()) == 0.0);
    CHECK(p.exact_gradient(Vec::Zero(p.param_dim()), Batch::full()) == Vec::Zero(p.param_dim()));
    CHECK(p.blocks().size() == 2);
    CHECK(p.param_dim() == 4 * 6 + 6 + 6 + 1);

    // Without hidden layers the network is linear least squares.
    const MlpProblem lin = mlp_problem({4, 1}, Activation::tanh, data);
    const Vec w = random_vec(5, 3);
    Mat x1(15, 5);
    x1 << data.x, Vec::Ones(15);
    const Vec expected = x1.transpose() * (x1 * w - data.y) / 15.0;
    CHECK((lin.exact_gradient(w, Batch::full()) - expected).norm() <= 1e-12);

    CHECK_THROWS_AS(mlp_problem({3, 6, 1}, Activation::tanh, data), DimError);
    CHECK_THROWS_AS(mlp_problem({4, 6, 2}, Activation::tanh, data), DimError);
    CHECK_THROWS_AS(mlp_problem({4}, Activation::tanh, data), DimError);
}

TEST_CASE("chain rule holds for every problem over random draws") {
    for (const auto& p : suite()) {
        CAPTURE(p->name());
        const auto* logistic = dynamic_cast<const LogisticProblem*>(p.get());
        const Index n = logistic ? logistic->data().x.rows() : 20;
        for (std::uint64_t s = 0; s < 100; ++s) {
            const Batch batch = s % 2 == 0 || p->name() == "quadratic" ? Batch::full() : random_batch(n, s);
            const Vec theta = draw(*p, s, 0.7);
            const Vec delta = p->clean_error_signal(theta, batch);
            const Vec g = p->exact_gradient(theta, batch);
            Vec jt = Vec::Zero(p->param_dim());
            const auto blocks = p->blocks();
            for (std::size_t b = 0; b < blocks.size(); ++b) {
                jt.segment(blocks[b].offset, blocks[b].size) =
                    matvec_t(p->jacobian(theta, batch, static_cast<Index>(b)), delta);
            }
            CHECK((jt - g).norm() <= 1e-10 * (1.0 + g.norm()));
            CHECK((p->gradient_from_signal(theta, batch, delta) - g).norm() <= 1e-10 * (1.0 + g.norm()));
        }
    }
}

TEST_CASE("gradients agree with central differences") {
    for (const auto& p : suite()) {
        CAPTURE(p->name());
        const double tol = p->name() == "mlp" ? 1e-4 : 1e-5;
        for (std::uint64_t s = 0; s < 3; ++s) {
            const Vec theta = draw(*p, s + 500, 0.5);
            const Vec g = p->exact_gradient(theta, Batch::full());
            const Vec fd = finite_difference_gradient(*p, theta, 1e-5);
            CHECK((fd - g).norm() / g.norm() < tol);
        }
    }
}

TEST_CASE("finite differences on simple losses") {
    const QuadraticProblem q = quadratic_problem(Mat::Identity(2, 2), Vec::Zero(2), 0.0);
    CHECK((finite_difference_gradient(q, vec({3, 4}), 1e-5) - vec({3, 4})).norm() <= 1e-8);

    Dataset flat;
    flat.x = Mat::Zero(3, 2);
    flat.y = vec({0, 1, 1});
    const LogisticProblem constant = logistic_problem(flat, 0.0);
    CHECK(finite_difference_gradient(constant, vec({0.3, -2}), 1e-5) == Vec::Zero(2));
    CHECK_THROWS_AS(finite_difference_gradient(q, vec({3, 4}), 0.0), ConfigError);
}

TEST_CASE("declared smoothness bounds the gradient change") {
    for (const auto& p : suite()) {
        if (!p->smoothness()) {
            continue;
        }
        CAPTURE(p->name());
        const double l = *p->smoothness();
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 1000; ++s) {
            const Vec a = draw(*p, 2 * s, 2.0);
            const Vec b = draw(*p, 2 * s + 1, 2.0);
            const double ratio = (p->exact_gradient(a, Batch::full()) - p->exact_gradient(b, Batch::full())).norm() /
                                 (l * (a - b).norm());
            worst = std::max(worst, ratio);
        }
        CHECK(worst <= 1.0 + 1e-9);
    }
}

TEST_CASE("noise has the declared scale and zero mean") {
    const double sigma = 0.5;
    QuadraticProblem q = conditioned_quadratic(5, 10.0, sigma, 1.0, 0);
    q.seed_noise(123);
    const Vec theta = random_vec(5, 9);
    const Vec clean = q.clean_error_signal(theta, Batch::full());
    Vec sum = Vec::Zero(5);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        sum += q.error_signal(theta, Batch::full());
    }
    const Vec mean = sum / draws;
    CHECK((mean - clean).cwiseAbs().maxCoeff() <= 3.0 * sigma / std::sqrt(draws));

    QuadraticProblem quiet = conditioned_quadratic(5, 10.0, 0.0, 1.0, 0);
    CHECK(quiet.error_signal(theta, Batch::full()) == quiet.clean_error_signal(theta, Batch::full()));
}

TEST_CASE("datasets are reproducible and well formed") {
    const Dataset a = synth_dataset(7, 50, 6, DatasetKind::gaussian_logistic);
    const Dataset b = synth_dataset(7, 50, 6, DatasetKind::gaussian_logistic);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    for (Index i = 0; i < a.y.size(); ++i) {
        CHECK((a.y(i) == 0.0 || a.y(i) == 1.0));
    }
    CHECK(synth_dataset(8, 50, 6, DatasetKind::gaussian_logistic).x != a.x);

    const Dataset lr = synth_dataset(3, 512, 128, DatasetKind::low_rank_regression);
    const Eigen::MatrixXd x = lr.x;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
    const double cond = svd.singularValues()(0) / svd.singularValues()(127);
    CHECK(std::abs(cond / kLowRankCondition - 1.0) <= 0.05);
    CHECK_THROWS_AS(synth_dataset(0, 0, 3, DatasetKind::gaussian_logistic), ConfigError);
}

TEST_CASE("dataset csv round trip") {
    const Dataset data = synth_dataset(2, 9, 3, DatasetKind::low_rank_regression);
    std::stringstream s;
    write_dataset_csv(data, s);
    const std::string text = s.str();
    CHECK(text.rfind("x0,x1,x2,target\n", 0) == 0);
    const Dataset back = read_dataset_csv(s);
    CHECK(back.x == data.x);
    CHECK(back.y == data.y);

    std::stringstream bad("x0,target\n1,abc\n");
    CHECK_THROWS_AS(read_dataset_csv(bad), DataError);
}
