#include <gtest/gtest.h>

#include <random>

#include "gplaplace/baseline.hpp"

using namespace gplaplace;

namespace {

std::vector<FieldObservation> sample(const std::function<Eigen::Vector2d(double, double)>& f, int n,
                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-3, 3);
    std::vector<FieldObservation> obs;
    for (int i = 0; i < n; ++i) {
        const double x = u(rng), y = u(rng);
        const auto v = f(x, y);
        obs.push_back({x, y, 0.1 * i, v[0], v[1], 0, 0});
    }
    return obs;
}

}  // namespace

TEST(Parametric, RecoversCubicExactly) {
    auto f = [](double x, double y) {
        return Eigen::Vector2d(1 - 2 * x + 0.5 * x * y + 0.3 * x * x * x, -y + 0.25 * x * x * y - 0.1 * y * y * y);
    };
    const auto m = fit_parametric(sample(f, 60, 1));
    for (double x : {-1.0, 0.0, 2.0})
        for (double y : {-2.0, 0.5}) {
            EXPECT_NEAR(m.field(x, y)[0], f(x, y)[0], 1e-9);
            EXPECT_NEAR(m.field(x, y)[1], f(x, y)[1], 1e-9);
            // d/dx: -2 + 0.5 y + 0.9 x^2; d/dy: -1 + 0.25 x^2 - 0.3 y^2
            EXPECT_NEAR(parametric_laplacian(m, x, y), -3 + 0.5 * y + 1.15 * x * x - 0.3 * y * y, 1e-8);
        }
}

TEST(Parametric, LaplacianMatchesFiniteDifference) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 1);
    CubicFieldModel m;
    for (int i = 0; i < 10; ++i) m.weights_x[i] = n(rng), m.weights_y[i] = n(rng);
    const double h = 1e-5;
    for (double x : {-1.3, 0.4})
        for (double y : {0.7, -2.2}) {
            const double fd = (m.field(x + h, y)[0] - m.field(x - h, y)[0]) / (2 * h) +
                              (m.field(x, y + h)[1] - m.field(x, y - h)[1]) / (2 * h);
            EXPECT_NEAR(parametric_laplacian(m, x, y), fd, 1e-6);
        }
}

TEST(Parametric, RequiresTenObservations) {
    auto f = [](double x, double y) { return Eigen::Vector2d(x, y); };
    EXPECT_THROW((void)fit_parametric(sample(f, 9, 3)), InvalidArgument);
    EXPECT_NO_THROW((void)fit_parametric(sample(f, 10, 3)));
}

TEST(Parametric, RankDeficientGivesMinimumNorm) {
    // All observations on y = 0: only the pure-x monomials are identifiable.
    std::vector<FieldObservation> obs;
    for (int i = 0; i < 20; ++i) {
        const double x = -2 + 0.2 * i;
        obs.push_back({x, 0.0, 0.0, 2 * x, 0.0, 0, 0});
    }
    const auto m = fit_parametric(obs);
    EXPECT_TRUE(m.weights_x.allFinite());
    EXPECT_NEAR(m.field(1.0, 0.0)[0], 2.0, 1e-9);
    EXPECT_NEAR(m.weights_x[2], 0.0, 1e-9);  // y coefficient has no support, minimum norm sets it to 0
}

TEST(Parametric, EvaluatesPointList) {
    CubicFieldModel m;
    m.weights_x[1] = -1;
    m.weights_y[2] = -1;
    const auto v = eval_parametric_laplacian(m, {{0, 0, 0}, {1, 2, 3}});
    ASSERT_EQ(v.size(), 2u);
    EXPECT_DOUBLE_EQ(v[0], -2);
    EXPECT_DOUBLE_EQ(v[1], -2);
}
