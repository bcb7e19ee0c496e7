#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gplaplace/field.hpp"
#include "gplaplace/kernel.hpp"
#include "gplaplace/klmetric.hpp"

using namespace gplaplace;

namespace {

SEHyperparams hyp(double l, double lx, double ly) {
    SEHyperparams h;
    h.output_scale = l;
    h.length_scales = Eigen::Vector3d(lx, ly, 1.0);
    h.noise_variance = 0.01;
    return h;
}

}  // namespace

TEST(PriorLaplacian, UnitScalesGiveTwo) {
    const auto p = prior_laplacian(hyp(1, 1, 1), hyp(1, 1, 1));
    EXPECT_EQ(p.mean, 0.0);
    EXPECT_DOUBLE_EQ(p.variance, 2.0);
}

TEST(PriorLaplacian, ZeroSecondOutputScale) {
    const auto p = prior_laplacian(hyp(2, 2, 5), hyp(0, 3, 4));
    EXPECT_DOUBLE_EQ(p.variance, 1.0);
}

TEST(PriorLaplacian, AgreesWithKernelMixedDerivative) {
    const auto hx = hyp(1.3, 0.7, 2.1), hy = hyp(0.6, 1.9, 0.45);
    const Eigen::RowVector3d z = Eigen::RowVector3d::Zero();
    const double kx = k_se_deriv(z, z, hx, DerivativeOrder::mixed(0, 1, 0, 1));
    const double ky = k_se_deriv(z, z, hy, DerivativeOrder::mixed(1, 1, 1, 1));
    EXPECT_NEAR(prior_laplacian(hx, hy).variance, kx + ky, 1e-12);
}

TEST(KLDivergence, IdenticalIsZero) {
    const GaussianScalar p{0.3, 1.7};
    EXPECT_EQ(kl_divergence(p, p, {KLVariant::paper}), 0.0);
    EXPECT_EQ(kl_divergence(p, p, {KLVariant::standard}), 0.0);
}

TEST(KLDivergence, EqualVarianceShift) {
    const GaussianScalar pr{0, 1}, po{2, 1};
    EXPECT_DOUBLE_EQ(kl_divergence(pr, po, {KLVariant::paper}), 2.0);
    EXPECT_DOUBLE_EQ(kl_divergence(pr, po, {KLVariant::standard}), 2.0);
}

TEST(KLDivergence, UnitLogCoefficientNarrowingPosterior) {
    const GaussianScalar pr{0, 4}, po{0, 1};
    EXPECT_NEAR(kl_divergence(pr, po, {KLVariant::paper}), 0.5 * (4 - 1 + std::log(0.5)), 1e-12);
    EXPECT_NEAR(kl_divergence(pr, po, {KLVariant::paper}), 1.15343, 1e-5);
}

TEST(KLDivergence, StandardMatchesTextbook) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> m(-3, 3), v(0.05, 5);
    for (int i = 0; i < 200; ++i) {
        const GaussianScalar pr{m(rng), v(rng)}, po{m(rng), v(rng)};
        const double s0 = std::sqrt(pr.variance), s1 = std::sqrt(po.variance);
        const double want =
            std::log(s1 / s0) + (pr.variance + (pr.mean - po.mean) * (pr.mean - po.mean)) / (2 * po.variance) - 0.5;
        const double got = kl_divergence(pr, po, {KLVariant::standard});
        EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, std::abs(want)));
        EXPECT_GE(got, -1e-15);
    }
}

TEST(KLDivergence, UnitLogCoefficientCentredClosedForm) {
    for (double s : {0.1, 0.5, 1.0, 2.0, 9.0}) {
        const GaussianScalar pr{0, s}, po{0, 1};
        EXPECT_NEAR(kl_divergence(pr, po, {KLVariant::paper}), 0.5 * (s - 1 - 0.5 * std::log(s)), 1e-12);
    }
}

TEST(KLDivergence, RejectsNonPositiveVariance) {
    EXPECT_THROW((void)kl_divergence({0, 0}, {0, 1}), InvalidArgument);
    EXPECT_THROW((void)kl_divergence({0, 1}, {0, -1}), InvalidArgument);
}

TEST(SignedKL, SignFlip) {
    EXPECT_DOUBLE_EQ(signed_kl({0, 1}, {-2, 1}), -2.0);
    EXPECT_DOUBLE_EQ(signed_kl({0, 1}, {2, 1}), 2.0);
}

TEST(SignedKL, ZeroMeanIsZero) {
    EXPECT_EQ(signed_kl({0, 3}, {0, 0.1}), 0.0);
    EXPECT_EQ(signed_kl({1, 3}, {0, 7}), 0.0);
}

TEST(SignedKL, CompositionOracle) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> m(-3, 3), v(0.05, 5);
    for (int i = 0; i < 200; ++i) {
        const GaussianScalar pr{m(rng), v(rng)}, po{m(rng), v(rng)};
        for (auto variant : {KLVariant::paper, KLVariant::standard}) {
            const double kl = kl_divergence(pr, po, {variant});
            const double sgn = po.mean > 0 ? 1.0 : (po.mean < 0 ? -1.0 : 0.0);
            EXPECT_EQ(signed_kl(pr, po, {variant}), sgn * kl);
        }
    }
}

TEST(SignedKL, TinyMeanAtPriorVarianceKeepsSign) {
    // Far from data the posterior variance equals the prior and the mean is tiny; the
    // variance part must cancel exactly so the mean term still sets the sign.
    const double var = 0.10964974344866057;
    for (auto variant : {KLVariant::paper, KLVariant::standard}) {
        EXPECT_GT(signed_kl({0, var}, {6.1e-10, var}, {variant}), 0.0);
        EXPECT_LT(signed_kl({0, var}, {-3.1e-9, var}, {variant}), 0.0);
        EXPECT_EQ(kl_divergence({0, var}, {0, var}, {variant}), 0.0);
    }
}

TEST(SignedKL, GridNodeCapsRoundoffAbovePrior) {
    const GaussianScalar prior{0, 0.10964974344866052};
    const GaussianScalar post{3.1e-9, 0.10964974344866057};
    EXPECT_GT(node_signed_kl(prior, post, {KLVariant::paper}), 0.0);
    EXPECT_LT(node_signed_kl(prior, {-3.1e-9, post.variance}, {KLVariant::standard}), 0.0);
}
