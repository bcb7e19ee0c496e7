#include <gtest/gtest.h>

#include <random>

#include "gplaplace/kernel.hpp"
#include "test_support.hpp"

using namespace gplaplace;
namespace tk = gplaplace::testkit;
using gplaplace::testkit::all_orders;

namespace {

SEHyperparams unit_1d(double l = 1.0, double lambda = 1.0) {
    return SEHyperparams(l, Eigen::VectorXd::Constant(1, lambda), 0.0);
}

}  // namespace

TEST(Kernel, CoincidentPointsGiveSignalVariance) {
    const Eigen::Vector2d a(0.3, -1.2);
    SEHyperparams h(2.0, Eigen::Vector2d(0.7, 1.3), 0.0);
    EXPECT_DOUBLE_EQ(k_se(a, a, h), 4.0);
}

TEST(Kernel, UnitDistanceOneDimension) {
    const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 1.0), b = Eigen::VectorXd::Zero(1);
    EXPECT_NEAR(k_se(a, b, unit_1d()), std::exp(-0.5), 1e-15);
    EXPECT_NEAR(k_se(a, b, unit_1d()), 0.60653, 1e-5);
}

TEST(Kernel, MatchesTermByTermReference) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int D = 1 + trial % 4;
        const auto h = tk::random_hyper(rng, D);
        const Eigen::MatrixXd P = tk::random_points(rng, 2, D, -2.0, 2.0);
        std::vector<double> a(D), b(D), lam(D);
        for (int d = 0; d < D; ++d) {
            a[d] = P(0, d);
            b[d] = P(1, d);
            lam[d] = h.length_scales[d];
        }
        const double want = tk::se_reference(a, b, h.output_scale, lam);
        EXPECT_NEAR(k_se(P.row(0), P.row(1), h), want, 1e-14 * std::max(1.0, want));
    }
}

TEST(Kernel, SymmetricAndStationary) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const auto h = tk::random_hyper(rng, 3);
        const Eigen::MatrixXd P = tk::random_points(rng, 3, 3, -3.0, 3.0);
        const Eigen::RowVector3d shift = P.row(2);
        EXPECT_DOUBLE_EQ(k_se(P.row(0), P.row(1), h), k_se(P.row(1), P.row(0), h));
        EXPECT_NEAR(k_se(P.row(0), P.row(1), h), k_se(P.row(0) + shift, P.row(1) + shift, h), 1e-12);
    }
}

TEST(Kernel, DimensionMismatchThrows) {
    const Eigen::Vector2d a(0, 0);
    const Eigen::Vector3d b(0, 0, 0);
    SEHyperparams h(1.0, Eigen::Vector2d(1, 1), 0.0);
    EXPECT_THROW((void)k_se(a, b, h), InvalidArgument);
    EXPECT_THROW((void)k_se_deriv(b, b, h, DerivativeOrder::none()), InvalidArgument);
}

TEST(Kernel, FirstDerivativeVanishesAtCoincidence) {
    const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 0.4);
    EXPECT_EQ(k_se_deriv(a, a, unit_1d(), DerivativeOrder::on_first(0)), 0.0);
}

TEST(Kernel, FirstDerivativeUnitDistance) {
    const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 1.0), b = Eigen::VectorXd::Zero(1);
    EXPECT_NEAR(k_se_deriv(a, b, unit_1d(), DerivativeOrder::on_first(0)), -std::exp(-0.5), 1e-15);
}

TEST(Kernel, PureSecondDerivativeMatchesClosedForm) {
    // Lambda^{-1} ((a-b)^2 Lambda^{-1} - 1) k in one dimension.
    const double lam = 0.8, r = 0.55;
    const auto h = unit_1d(1.3, lam);
    const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, r), b = Eigen::VectorXd::Zero(1);
    const double k = k_se(a, b, h);
    const double want = (r * r / (lam * lam) - 1.0) / (lam * lam) * k;
    EXPECT_NEAR(k_se_deriv(a, b, h, DerivativeOrder::on_first(0, 2)), want, 1e-14);
}

TEST(Kernel, MixedSecondDerivativeAtCoincidenceIsSignalOverLengthSquared) {
    SEHyperparams h(1.7, Eigen::Vector3d(0.6, 1.4, 2.2), 0.0);
    const Eigen::Vector3d a(0.1, 0.2, 0.3);
    for (int d = 0; d < 3; ++d) {
        const double want = h.signal_variance() / (h.length_scales[d] * h.length_scales[d]);
        EXPECT_NEAR(k_se_deriv(a, a, h, DerivativeOrder::mixed(d, 1, d, 1)), want, 1e-14);
    }
}

TEST(Kernel, EveryOrderMatchesFiniteDifferences) {
    std::mt19937_64 rng(2024);
    for (int D : {1, 2, 3}) {
        for (const auto& order : all_orders(D)) {
            if (order.is_zero()) continue;
            for (int trial = 0; trial < 20; ++trial) {
                const auto h = tk::random_hyper(rng, D);
                const Eigen::MatrixXd P = tk::random_points(rng, 2, D);
                const Eigen::VectorXd a = P.row(0).transpose(), b = P.row(1).transpose();
                const double an = k_se_deriv(a, b, h, order);
                const double fd = tk::fd_kernel_derivative(a, b, h, order);
                EXPECT_LT(tk::rel_error(an, fd, tk::order_floor(h, order)), 1e-5)
                    << "D=" << D << " first=" << order.total_first() << " second=" << order.total_second();
            }
        }
    }
}

TEST(Kernel, UnsupportedOrderThrows) {
    const Eigen::VectorXd a = Eigen::VectorXd::Zero(1);
    EXPECT_THROW((void)k_se_deriv(a, a, unit_1d(), DerivativeOrder::on_first(0, 3)), Unsupported);
    DerivativeOrder o;
    o.first[2] = 1;  // dimension that a 1-D kernel does not have
    EXPECT_THROW((void)k_se_deriv(a, a, unit_1d(), o), InvalidArgument);
}

TEST(Kernel, CrossCovSingletonIsSignalVariance) {
    const Eigen::MatrixXd A = Eigen::MatrixXd::Constant(1, 2, 0.5);
    SEHyperparams h(3.0, Eigen::Vector2d(1, 2), 0.0);
    const Eigen::MatrixXd K = cross_cov_matrix(A, A, h);
    ASSERT_EQ(K.rows(), 1);
    EXPECT_DOUBLE_EQ(K(0, 0), 9.0);
}

TEST(Kernel, CrossCovIsSymmetricPsd) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto h = tk::random_hyper(rng, 3);
        const Eigen::MatrixXd A = tk::random_points(rng, 30, 3, -2.0, 2.0);
        const Eigen::MatrixXd K = cross_cov_matrix(A, A, h);
        EXPECT_LT((K - K.transpose()).cwiseAbs().maxCoeff(), 1e-15);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    }
}

TEST(Kernel, CrossCovMatchesElementLoop) {
    std::mt19937_64 rng(9);
    for (const auto& order : all_orders(3)) {
        const auto h = tk::random_hyper(rng, 3);
        const Eigen::MatrixXd A = tk::random_points(rng, 4, 3), B = tk::random_points(rng, 5, 3);
        const Eigen::MatrixXd K = cross_cov_matrix(A, B, h, order);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 5; ++j) EXPECT_NEAR(K(i, j), k_se_deriv(A.row(i), B.row(j), h, order), 1e-14);
    }
}

TEST(Kernel, InvalidHyperparametersRejected) {
    SEHyperparams h(0.0, Eigen::VectorXd::Ones(1), 0.0);
    EXPECT_THROW(h.validate(), InvalidArgument);
    h = SEHyperparams(1.0, Eigen::VectorXd::Constant(1, -1.0), 0.0);
    EXPECT_THROW(h.validate(), InvalidArgument);
    h = SEHyperparams(1.0, Eigen::VectorXd::Ones(1), -1e-3);
    EXPECT_THROW(h.validate(), InvalidArgument);
}
