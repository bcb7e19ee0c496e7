#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gplaplace/trajectory.hpp"

using namespace gplaplace;

namespace {

Trajectory make(const std::string& id, const Eigen::VectorXd& t, const std::function<Eigen::Vector2d(double)>& f) {
    Trajectory tr{id, t, Eigen::MatrixXd(t.size(), 2)};
    for (Eigen::Index i = 0; i < t.size(); ++i) tr.positions.row(i) = f(t[i]).transpose();
    return tr;
}

TrajectoryOptions quick() {
    TrajectoryOptions o;
    o.fit.restarts = 2;
    return o;
}

}  // namespace

TEST(Trajectory, ValidationErrors) {
    Trajectory t{"a", Eigen::Vector3d(0, 1, 1), Eigen::MatrixXd::Zero(3, 2)};
    EXPECT_THROW(t.validate(), InvalidArgument);
    t.times = Eigen::Vector3d(0, 2, 1);
    EXPECT_THROW(t.validate(), InvalidArgument);
    t.times = Eigen::Vector2d(0, 1);
    t.positions = Eigen::MatrixXd::Zero(2, 2);
    EXPECT_THROW(t.validate(), InvalidArgument);
    t.times = Eigen::Vector3d(0, 1, 2);
    t.positions = Eigen::MatrixXd::Zero(3, 2);
    t.positions(1, 0) = std::nan("");
    EXPECT_THROW(t.validate(), InvalidArgument);
    EXPECT_THROW((void)fit_trajectory(t), InvalidArgument);
}

TEST(Trajectory, StraightLineHasNoAcceleration) {
    const auto tr = make("line", Eigen::VectorXd::LinSpaced(40, 0, 10),
                         [](double t) { return Eigen::Vector2d(1 + 2 * t, -3 + 0.5 * t); });
    const auto tp = fit_trajectory(tr, quick());
    const auto ks = infer_kinematics(tp, tr.times.segment(2, 36));
    for (const auto& k : ks) {
        EXPECT_LE(std::abs(k.ax.mean), 3 * k.ax.stddev() + 1e-9);
        EXPECT_LE(std::abs(k.ay.mean), 3 * k.ay.stddev() + 1e-9);
        EXPECT_NEAR(k.vx.mean, 2.0, 1e-3);
        EXPECT_NEAR(k.vy.mean, 0.5, 1e-3);
    }
}

TEST(Trajectory, CircleKinematics) {
    const auto tr = make("circle", Eigen::VectorXd::LinSpaced(200, 0, 4 * std::numbers::pi),
                         [](double t) { return Eigen::Vector2d(std::cos(t), std::sin(t)); });
    const auto tp = fit_trajectory(tr, quick());
    const auto ks = infer_kinematics(tp, tr.times.segment(10, 180));
    double worst = 0.0;
    for (const auto& k : ks) {
        worst = std::max(worst, std::abs(k.ax.mean + std::cos(k.time)));
        worst = std::max(worst, std::abs(k.ay.mean + std::sin(k.time)));
    }
    EXPECT_LT(worst, 0.1);
}

TEST(Trajectory, MinimalThreePoints) {
    const auto tr = make("tiny", Eigen::Vector3d(0, 1, 2.5), [](double t) { return Eigen::Vector2d(t * t, -t); });
    const auto tp = fit_trajectory(tr, quick());
    for (const auto& k : infer_kinematics(tp, Eigen::Vector3d(0, 1.2, 2.5))) {
        for (const auto& g : {k.x, k.y, k.vx, k.vy, k.ax, k.ay}) {
            EXPECT_TRUE(std::isfinite(g.mean));
            EXPECT_TRUE(std::isfinite(g.variance));
            EXPECT_GE(g.variance, 0.0);
        }
    }
}

TEST(Trajectory, InterpolatesTrainingPositions) {
    const auto tr = make("wave", Eigen::VectorXd::LinSpaced(30, 0, 6),
                         [](double t) { return Eigen::Vector2d(3 * std::sin(t), t); });
    const auto tp = fit_trajectory(tr, quick());
    const auto ks = infer_kinematics(tp, tr.times);
    for (std::size_t i = 0; i < ks.size(); ++i) {
        EXPECT_NEAR(ks[i].x.mean, tr.positions(static_cast<Eigen::Index>(i), 0), 1e-4 * 3);
        EXPECT_LE(ks[i].x.variance, tp.model_x.prior_variance(DerivativeOrder::none()));
    }
    EXPECT_NEAR((tp.model_x.targets().array() + tp.model_x.offset() - tr.positions.col(0).array()).abs().maxCoeff(), 0.0,
                1e-12);
}

TEST(Trajectory, DerivativeOrdersAreConsistent) {
    const auto tr = make("wave", Eigen::VectorXd::LinSpaced(25, 0, 5),
                         [](double t) { return Eigen::Vector2d(std::sin(1.3 * t), std::cos(t) + 0.2 * t); });
    const auto tp = fit_trajectory(tr, quick());
    const double h = 1e-4;
    for (double t : {0.7, 1.9, 3.3, 4.1}) {
        const auto k = infer_kinematics(tp, Eigen::Vector3d(t - h, t, t + h));
        const double fd_v = (k[2].x.mean - k[0].x.mean) / (2 * h);
        const double fd_a = (k[2].vx.mean - k[0].vx.mean) / (2 * h);
        EXPECT_NEAR(k[1].vx.mean, fd_v, 1e-3 * std::max(1.0, std::abs(fd_v)));
        EXPECT_NEAR(k[1].ax.mean, fd_a, 1e-3 * std::max(1.0, std::abs(fd_a)));
    }
}

TEST(Trajectory, EmptyQueryAndExtrapolationFlag) {
    const auto tr = make("l", Eigen::VectorXd::LinSpaced(10, 0, 1), [](double t) { return Eigen::Vector2d(t, t); });
    const auto tp = fit_trajectory(tr, quick());
    EXPECT_TRUE(infer_kinematics(tp, Eigen::VectorXd()).empty());
    const double far = 1 + 10 * std::max(tp.model_x.hyper().length_scales[0], tp.model_y.hyper().length_scales[0]);
    const auto k = infer_kinematics(tp, Eigen::Vector2d(0.5, far));
    EXPECT_FALSE(k[0].extrapolated);
    EXPECT_TRUE(k[1].extrapolated);
}

TEST(Pooling, CountsAndLocations) {
    std::vector<Trajectory> trajs;
    for (int a = 0; a < 4; ++a)
        trajs.push_back(make("a" + std::to_string(a), Eigen::VectorXd::LinSpaced(20, 0, 2),
                             [a](double t) { return Eigen::Vector2d(a + t, std::sin(t + a)); }));
    const auto tps = fit_trajectories(trajs, quick());
    ASSERT_EQ(tps.size(), 4u);
    EXPECT_EQ(tps[2].agent_id, "a2");
    const auto obs = pool_observations(tps);
    EXPECT_EQ(obs.size(), 80u);

    const auto one = pool_observations({tps[1]}, {Eigen::VectorXd::Constant(1, 0.73)});
    ASSERT_EQ(one.size(), 1u);
    const auto k = infer_kinematics(tps[1], Eigen::VectorXd::Constant(1, 0.73))[0];
    EXPECT_EQ(one[0].x, k.x.mean);
    EXPECT_EQ(one[0].y, k.y.mean);
    EXPECT_EQ(one[0].value_x, k.ax.mean);
    EXPECT_EQ(one[0].variance_y, k.ay.variance);

    const auto vel = pool_observations({tps[1]}, {Eigen::VectorXd::Constant(1, 0.73)}, TargetKind::velocity);
    EXPECT_EQ(vel[0].value_x, k.vx.mean);
}

TEST(Pooling, PermutationInvariant) {
    std::vector<Trajectory> trajs;
    for (int a = 0; a < 3; ++a)
        trajs.push_back(make("a" + std::to_string(a), Eigen::VectorXd::LinSpaced(12, 0, 3),
                             [a](double t) { return Eigen::Vector2d(a * t, t * t - a); }));
    auto tps = fit_trajectories(trajs, quick());
    auto key = [](const FieldObservation& o) { return std::tie(o.x, o.y, o.t, o.value_x, o.value_y); };
    auto sorted = [&](std::vector<FieldObservation> v) {
        std::sort(v.begin(), v.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
        return v;
    };
    const auto o1 = sorted(pool_observations(tps));
    std::swap(tps[0], tps[2]);
    EXPECT_EQ(o1, sorted(pool_observations(tps)));
}

TEST(Pooling, Errors) {
    EXPECT_THROW((void)pool_observations({}), InvalidArgument);
    const auto tr = make("l", Eigen::VectorXd::LinSpaced(5, 0, 1), [](double t) { return Eigen::Vector2d(t, t); });
    const auto tp = fit_trajectory(tr, quick());
    EXPECT_THROW((void)pool_observations({tp}, {Eigen::VectorXd(), Eigen::VectorXd()}), InvalidArgument);
}
