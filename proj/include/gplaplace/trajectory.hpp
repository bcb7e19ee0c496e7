#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "gplaplace/errors.hpp"
#include "gplaplace/gp_fit.hpp"
#include "gplaplace/gp_model.hpp"
#include "gplaplace/parallel.hpp"

namespace gplaplace {

/// One agent's timestamped planar path.
struct Trajectory {
    std::string agent_id;
    Eigen::VectorXd times;      // strictly increasing
    Eigen::MatrixXd positions;  // N x 2, columns x and y

    [[nodiscard]] Eigen::Index size() const { return times.size(); }

    void validate() const {
        const std::string who = "trajectory '" + agent_id + "'";
        if (positions.rows() != times.size() || positions.cols() != 2)
            throw InvalidArgument(who + ": positions must be N x 2 with N = number of timestamps");
        if (times.size() < 3) throw InvalidArgument(who + ": at least 3 points required");
        if (!times.allFinite() || !positions.allFinite()) throw InvalidArgument(who + ": non-finite values");
        for (Eigen::Index i = 1; i < times.size(); ++i) {
            if (times[i] == times[i - 1])
                throw InvalidArgument(who + ": duplicate timestamp at index " + std::to_string(i));
            if (times[i] < times[i - 1])
                throw InvalidArgument(who + ": timestamps not increasing at index " + std::to_string(i));
        }
    }
};

/// Which time derivative of the paths feeds the field model.
enum class TargetKind { acceleration, velocity };

inline const char* to_string(TargetKind k) { return k == TargetKind::acceleration ? "acceleration" : "velocity"; }

/// Stage-one model: independent GPs x(t) and y(t) for one agent.
struct TrajectoryPosterior {
    std::string agent_id;
    GPModel model_x;
    GPModel model_y;
    Eigen::VectorXd query_times;  // defaults to the training timestamps
};

struct KinematicSample {
    double time = 0.0;
    GaussianScalar x, y;
    GaussianScalar vx, vy;
    GaussianScalar ax, ay;
    bool extrapolated = false;  // further than one length scale outside the observed span
};

/// A pooled stage-two training pair.
struct FieldObservation {
    double x = 0.0, y = 0.0, t = 0.0;
    double value_x = 0.0, value_y = 0.0;
    double variance_x = 0.0, variance_y = 0.0;

    friend bool operator==(const FieldObservation&, const FieldObservation&) = default;
};

struct TrajectoryOptions {
    FitOptions fit;
};

[[nodiscard]] inline TrajectoryPosterior fit_trajectory(const Trajectory& traj, const TrajectoryOptions& opt = {}) {
    traj.validate();
    const Eigen::MatrixXd T = traj.times;
    auto fit_axis = [&](int axis) {
        const Eigen::VectorXd target = traj.positions.col(axis);
        try {
            return fit(T, target, default_hyperparams(T, target), opt.fit);
        } catch (const FitFailure& e) {
            throw FitFailure("agent '" + traj.agent_id + "' axis " + (axis == 0 ? "x" : "y") + ": " + e.what(),
                             e.best_so_far());
        }
    };
    return TrajectoryPosterior{traj.agent_id, fit_axis(0), fit_axis(1), traj.times};
}

/// Fits every trajectory, in parallel across agents; output order follows input order.
[[nodiscard]] inline std::vector<TrajectoryPosterior> fit_trajectories(const std::vector<Trajectory>& trajs,
                                                                       const TrajectoryOptions& opt = {}) {
    std::vector<std::optional<TrajectoryPosterior>> slots(trajs.size());
    parallel_for(trajs.size(), [&](std::size_t i) { slots[i] = fit_trajectory(trajs[i], opt); });
    std::vector<TrajectoryPosterior> out;
    out.reserve(trajs.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// Position, velocity and acceleration posteriors per axis at the requested times.
[[nodiscard]] inline std::vector<KinematicSample> infer_kinematics(const TrajectoryPosterior& tp,
                                                                   const Eigen::VectorXd& times) {
    std::vector<KinematicSample> out(static_cast<std::size_t>(times.size()));
    if (times.size() == 0) return out;
    const Eigen::MatrixXd T = times;
    const auto d0 = DerivativeOrder::none(), d1 = DerivativeOrder::on_first(0, 1),
               d2 = DerivativeOrder::on_first(0, 2);
    const auto px = tp.model_x.predict_deriv(T, d0), py = tp.model_y.predict_deriv(T, d0);
    const auto vx = tp.model_x.predict_deriv(T, d1), vy = tp.model_y.predict_deriv(T, d1);
    const auto ax = tp.model_x.predict_deriv(T, d2), ay = tp.model_y.predict_deriv(T, d2);

    const Eigen::MatrixXd& train = tp.model_x.training_inputs();
    const double pad = std::max(tp.model_x.hyper().length_scales[0], tp.model_y.hyper().length_scales[0]);
    const double lo = train.col(0).minCoeff() - pad, hi = train.col(0).maxCoeff() + pad;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double t = times[static_cast<Eigen::Index>(i)];
        out[i] = KinematicSample{t, px[i], py[i], vx[i], vy[i], ax[i], ay[i], t < lo || t > hi};
    }
    return out;
}

/// One observation per agent and query time at the posterior-mean location, carrying the
/// chosen derivative's means and variances. `per_agent_times` may be empty (use each
/// posterior's query times) or hold one vector per posterior.
[[nodiscard]] inline std::vector<FieldObservation> pool_observations(
    const std::vector<TrajectoryPosterior>& posteriors, const std::vector<Eigen::VectorXd>& per_agent_times = {},
    TargetKind target = TargetKind::acceleration) {
    if (posteriors.empty()) throw InvalidArgument("pool_observations: at least one trajectory posterior required");
    if (!per_agent_times.empty() && per_agent_times.size() != posteriors.size())
        throw InvalidArgument("pool_observations: per_agent_times must match the number of posteriors");
    std::vector<FieldObservation> obs;
    for (std::size_t a = 0; a < posteriors.size(); ++a) {
        const auto& tp = posteriors[a];
        const Eigen::VectorXd& times = per_agent_times.empty() ? tp.query_times : per_agent_times[a];
        for (const auto& k : infer_kinematics(tp, times)) {
            const auto& gx = target == TargetKind::acceleration ? k.ax : k.vx;
            const auto& gy = target == TargetKind::acceleration ? k.ay : k.vy;
            obs.push_back({k.x.mean, k.y.mean, k.time, gx.mean, gy.mean, gx.variance, gy.variance});
        }
    }
    return obs;
}

}  // namespace gplaplace
