#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "gplaplace/errors.hpp"
#include "gplaplace/trajectory.hpp"

namespace gplaplace {

enum class PotentialKind { stationary, varying_strength, rotating };

inline const char* to_string(PotentialKind k) {
    switch (k) {
        case PotentialKind::stationary: return "stationary";
        case PotentialKind::varying_strength: return "varying_strength";
        case PotentialKind::rotating: return "rotating";
    }
    return "?";
}

inline PotentialKind potential_kind_from_string(const std::string& s) {
    if (s == "stationary") return PotentialKind::stationary;
    if (s == "varying_strength") return PotentialKind::varying_strength;
    if (s == "rotating") return PotentialKind::rotating;
    throw InvalidArgument("unknown potential kind '" + s + "' (stationary | varying_strength | rotating)");
}

struct GaussianComponent {
    double weight = 1.0;                      // alpha
    Eigen::Vector2d center = Eigen::Vector2d::Zero();  // m
    double scale = 1.0;                       // c
    double phase = 0.0;                       // beta
};

/// Time-varying Gaussian-mixture potential phi(x, t) = sum_i alpha_i N(x; mu_i(t), s_i(t) I):
///   stationary:        mu = m,                    s = c
///   varying_strength:  mu = m,                    s = sin(t + beta) + c
///   rotating:          mu = m * (cos t, sin t),   s = c
struct PotentialSpec {
    PotentialKind kind = PotentialKind::stationary;
    std::vector<GaussianComponent> components;

    void validate() const {
        if (components.empty()) throw InvalidArgument("PotentialSpec: at least one component required");
        for (std::size_t i = 0; i < components.size(); ++i) {
            const auto& c = components[i];
            const std::string who = "PotentialSpec: component " + std::to_string(i);
            if (!std::isfinite(c.weight) || !c.center.allFinite() || !std::isfinite(c.phase))
                throw InvalidArgument(who + " has non-finite parameters");
            if (!(c.scale > 0.0)) throw InvalidArgument(who + " scale must be positive");
            if (kind == PotentialKind::varying_strength && !(c.scale > 1.0))
                throw InvalidArgument(who + " scale must exceed 1 for varying_strength");
        }
    }

    /// Two attractors (alpha = 5). Stationary and varying-strength centres sit at (-2, 0) and
    /// (2, 0); rotating centres at -(2, 2) and (2, 2) so that m * (cos t, sin t) traces a circle.
    static PotentialSpec defaults(PotentialKind kind) {
        PotentialSpec s;
        s.kind = kind;
        const double c = kind == PotentialKind::varying_strength ? 1.5 : 1.0;
        Eigen::Vector2d m1(-2.0, 0.0), m2(2.0, 0.0);
        if (kind == PotentialKind::rotating) m1 = Eigen::Vector2d(-2.0, -2.0), m2 = Eigen::Vector2d(2.0, 2.0);
        s.components = {{5.0, m1, c, 0.0}, {5.0, m2, c, std::numbers::pi}};
        return s;
    }
};

namespace detail {

struct ComponentState {
    Eigen::Vector2d mean;
    double var;
};

inline ComponentState component_at(const PotentialSpec& spec, const GaussianComponent& c, double t) {
    switch (spec.kind) {
        case PotentialKind::stationary: return {c.center, c.scale};
        case PotentialKind::varying_strength: {
            const double s = std::sin(t + c.phase) + c.scale;
            if (!(s > 0.0))
                throw InvalidArgument("potential: effective covariance scale " + std::to_string(s) +
                                      " is not positive at t=" + std::to_string(t));
            return {c.center, s};
        }
        case PotentialKind::rotating:
            return {c.center.cwiseProduct(Eigen::Vector2d(std::cos(t), std::sin(t))), c.scale};
    }
    return {c.center, c.scale};
}

inline double density(const Eigen::Vector2d& x, const ComponentState& s) {
    return std::exp(-0.5 * (x - s.mean).squaredNorm() / s.var) / (2.0 * std::numbers::pi * s.var);
}

inline void check_spec(const PotentialSpec& spec) {
    if (spec.components.empty()) throw InvalidArgument("potential: no components");
    for (const auto& c : spec.components)
        if (!(c.scale > 0.0)) throw InvalidArgument("potential: component scale must be positive");
}

}  // namespace detail

[[nodiscard]] inline double eval_potential(const PotentialSpec& spec, const Eigen::Vector2d& x, double t) {
    detail::check_spec(spec);
    double phi = 0.0;
    for (const auto& c : spec.components) phi += c.weight * detail::density(x, detail::component_at(spec, c, t));
    return phi;
}

/// Exact spatial gradient: sum_i -alpha_i p_i(x) (x - mu_i) / s_i.
[[nodiscard]] inline Eigen::Vector2d eval_gradient(const PotentialSpec& spec, const Eigen::Vector2d& x, double t) {
    detail::check_spec(spec);
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (const auto& c : spec.components) {
        const auto s = detail::component_at(spec, c, t);
        g -= c.weight * detail::density(x, s) * (x - s.mean) / s.var;
    }
    return g;
}

/// Trace of the Hessian: sum_i alpha_i p_i(x) (|x - mu_i|^2 / s_i^2 - 2 / s_i).
[[nodiscard]] inline double eval_true_laplacian(const PotentialSpec& spec, const Eigen::Vector2d& x, double t) {
    detail::check_spec(spec);
    double lap = 0.0;
    for (const auto& c : spec.components) {
        const auto s = detail::component_at(spec, c, t);
        lap += c.weight * detail::density(x, s) * ((x - s.mean).squaredNorm() / (s.var * s.var) - 2.0 / s.var);
    }
    return lap;
}

struct SimConfig {
    int agents = 4;
    int steps = 200;
    double eta = 0.05;  // step increment; simulation time advances by eta per step
    double start_min = -4.0, start_max = 4.0;
    Eigen::Vector2d initial_velocity = Eigen::Vector2d::Zero();
    std::uint64_t seed = 0;

    void validate() const {
        if (agents < 1) throw InvalidArgument("SimConfig: agents must be >= 1");
        if (steps < 1) throw InvalidArgument("SimConfig: steps must be >= 1");
        if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidArgument("SimConfig: eta must be positive");
        if (!(start_max > start_min)) throw InvalidArgument("SimConfig: empty start box");
    }
};

/// Recorded agent state at every step alongside the observable trajectory.
struct SimulatedAgent {
    Trajectory trajectory;          // positions x_k at t_k = k * eta
    Eigen::MatrixXd velocities;     // v_k
    Eigen::MatrixXd accelerations;  // a_k, the force that produced v_k (zero at k = 0)
};

/// Second-order dynamics, one step per eta:
///   a_{k+1} = grad phi(x_k, t_k);  v_{k+1} = v_k + eta a_{k+1};  x_{k+1} = x_k + eta v_{k+1}.
[[nodiscard]] inline std::vector<SimulatedAgent> simulate_agents(const PotentialSpec& spec, const SimConfig& cfg) {
    spec.validate();
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> start(cfg.start_min, cfg.start_max);
    std::vector<SimulatedAgent> out;
    out.reserve(static_cast<std::size_t>(cfg.agents));
    for (int a = 0; a < cfg.agents; ++a) {
        SimulatedAgent ag;
        ag.trajectory.agent_id = "agent_" + std::to_string(a);
        ag.trajectory.times.resize(cfg.steps);
        ag.trajectory.positions.resize(cfg.steps, 2);
        ag.velocities.resize(cfg.steps, 2);
        ag.accelerations.resize(cfg.steps, 2);

        Eigen::Vector2d x;
        x[0] = start(rng);
        x[1] = start(rng);
        Eigen::Vector2d v = cfg.initial_velocity;
        Eigen::Vector2d acc = Eigen::Vector2d::Zero();
        for (int k = 0; k < cfg.steps; ++k) {
            const double t = k * cfg.eta;
            if (!x.allFinite() || !v.allFinite())
                throw SimulationDiverged("simulate: agent " + std::to_string(a) + " state became non-finite at step " +
                                             std::to_string(k),
                                         k);
            ag.trajectory.times[k] = t;
            ag.trajectory.positions.row(k) = x.transpose();
            ag.velocities.row(k) = v.transpose();
            ag.accelerations.row(k) = acc.transpose();
            acc = eval_gradient(spec, x, t);
            v = v + cfg.eta * acc;
            x = x + cfg.eta * v;
        }
        out.push_back(std::move(ag));
    }
    return out;
}

[[nodiscard]] inline std::vector<Trajectory> simulate(const PotentialSpec& spec, const SimConfig& cfg) {
    std::vector<Trajectory> out;
    for (auto& a : simulate_agents(spec, cfg)) out.push_back(std::move(a.trajectory));
    return out;
}

}  // namespace gplaplace
