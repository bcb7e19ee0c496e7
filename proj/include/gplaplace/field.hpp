#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

#include "gplaplace/errors.hpp"
#include "gplaplace/gp_fit.hpp"
#include "gplaplace/gp_model.hpp"
#include "gplaplace/klmetric.hpp"
#include "gplaplace/parallel.hpp"
#include "gplaplace/trajectory.hpp"

namespace gplaplace {

/// Stage two: V = (V_x, V_y) over (x, y, t) with independent SE kernels per output.
struct FieldModel {
    GPModel model_vx;
    GPModel model_vy;
    TargetKind target_kind = TargetKind::acceleration;
};

struct FieldOptions {
    FitOptions fit;
    /// Add stage-one derivative variances to each observation's noise.
    bool use_stage_one_variance = true;
    TargetKind target_kind = TargetKind::acceleration;
};

struct SpaceTimePoint {
    double x = 0.0, y = 0.0, t = 0.0;
};

struct GridSpec {
    double x_min = 0.0, x_max = 1.0;
    int nx = 2;
    double y_min = 0.0, y_max = 1.0;
    int ny = 2;
    std::vector<double> times{0.0};

    void validate() const {
        if (nx < 2 || ny < 2) throw InvalidArgument("GridSpec: nx and ny must be >= 2");
        if (!(x_max > x_min) || !(y_max > y_min)) throw InvalidArgument("GridSpec: ranges must be non-degenerate");
        if (times.empty()) throw InvalidArgument("GridSpec: at least one evaluation time required");
        if (!std::isfinite(x_min) || !std::isfinite(x_max) || !std::isfinite(y_min) || !std::isfinite(y_max))
            throw InvalidArgument("GridSpec: non-finite range");
        for (double t : times)
            if (!std::isfinite(t)) throw InvalidArgument("GridSpec: non-finite time");
    }

    [[nodiscard]] double x_at(int i) const { return x_min + (x_max - x_min) * i / (nx - 1); }
    [[nodiscard]] double y_at(int j) const { return y_min + (y_max - y_min) * j / (ny - 1); }
    [[nodiscard]] std::size_t nodes_per_time() const { return static_cast<std::size_t>(nx) * ny; }
};

struct GridNode {
    double x = 0.0, y = 0.0, t = 0.0;
    GaussianScalar vx, vy, divergence, curl;
    double signed_kl = 0.0;

    friend bool operator==(const GridNode&, const GridNode&) = default;
};

/// Nodes stored time-major, then y, then x (x fastest).
struct GridResult {
    GridSpec spec;
    GaussianScalar prior;  // prior of the divergence used for the KL map
    KLConfig kl;
    std::vector<GridNode> nodes;

    [[nodiscard]] const GridNode& at(std::size_t time_index, int ix, int iy) const {
        return nodes[time_index * spec.nodes_per_time() + static_cast<std::size_t>(iy) * spec.nx + ix];
    }
};

namespace detail {

inline Eigen::MatrixXd to_matrix(const std::vector<SpaceTimePoint>& pts) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) X.row(static_cast<Eigen::Index>(i)) << pts[i].x, pts[i].y, pts[i].t;
    return X;
}

}  // namespace detail

[[nodiscard]] inline FieldModel build_field(const std::vector<FieldObservation>& obs, const FieldOptions& opt = {}) {
    if (obs.size() < 4)
        throw InvalidArgument("build_field: at least 4 observations required, got " + std::to_string(obs.size()));
    const auto n = static_cast<Eigen::Index>(obs.size());
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd vx(n), vy(n), sx(n), sy(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        X.row(i) << o.x, o.y, o.t;
        vx[i] = o.value_x;
        vy[i] = o.value_y;
        sx[i] = o.variance_x;
        sy[i] = o.variance_y;
    }
    if (!X.allFinite() || !vx.allFinite() || !vy.allFinite() || !sx.allFinite() || !sy.allFinite())
        throw InvalidArgument("build_field: observations contain non-finite values");
    if ((sx.array() < 0.0).any() || (sy.array() < 0.0).any())
        throw InvalidArgument("build_field: observation variances must be >= 0");
    if (((X.rowwise() - X.row(0)).cwiseAbs().maxCoeff()) == 0.0)
        throw InvalidArgument("build_field: degenerate geometry, all observations share one location and time");

    auto fit_output = [&](const Eigen::VectorXd& y, const Eigen::VectorXd& s, std::uint64_t salt) {
        FitOptions f = opt.fit;
        f.seed = opt.fit.seed + salt;
        if (opt.use_stage_one_variance) f.noise_extra = s;
        return fit_auto(X, y, default_hyperparams(X, y), f);
    };
    return FieldModel{fit_output(vx, sx, 0), fit_output(vy, sy, 1), opt.target_kind};
}

/// Posterior of dV_x/dx + dV_y/dy; the outputs are independent, so variances add.
[[nodiscard]] inline std::vector<GaussianScalar> eval_divergence(const FieldModel& fm,
                                                                 const std::vector<SpaceTimePoint>& pts) {
    const Eigen::MatrixXd X = detail::to_matrix(pts);
    const auto dx = fm.model_vx.predict_deriv(X, DerivativeOrder::on_first(0));
    const auto dy = fm.model_vy.predict_deriv(X, DerivativeOrder::on_first(1));
    std::vector<GaussianScalar> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        out[i] = {dx[i].mean + dy[i].mean, dx[i].variance + dy[i].variance};
    return out;
}

/// Means only, for bulk error evaluation.
[[nodiscard]] inline Eigen::VectorXd eval_divergence_mean(const FieldModel& fm, const Eigen::MatrixXd& X) {
    return fm.model_vx.predict_deriv_mean(X, DerivativeOrder::on_first(0)) +
           fm.model_vy.predict_deriv_mean(X, DerivativeOrder::on_first(1));
}

/// k-component of the curl: dV_y/dx - dV_x/dy.
[[nodiscard]] inline std::vector<GaussianScalar> eval_curl(const FieldModel& fm,
                                                           const std::vector<SpaceTimePoint>& pts) {
    const Eigen::MatrixXd X = detail::to_matrix(pts);
    const auto vy_x = fm.model_vy.predict_deriv(X, DerivativeOrder::on_first(0));
    const auto vx_y = fm.model_vx.predict_deriv(X, DerivativeOrder::on_first(1));
    std::vector<GaussianScalar> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        out[i] = {vy_x[i].mean - vx_y[i].mean, vy_x[i].variance + vx_y[i].variance};
    return out;
}

[[nodiscard]] inline GaussianScalar field_prior_laplacian(const FieldModel& fm) {
    return prior_laplacian(fm.model_vx.hyper(), fm.model_vy.hyper());
}

/// Signed KL of the divergence posterior against the field's prior. Posterior
/// variances that collapse to zero are floored relative to the prior so the
/// divergence stays finite; roundoff above the prior is capped, since conditioning
/// never increases variance.
[[nodiscard]] inline double node_signed_kl(const GaussianScalar& prior, GaussianScalar post, const KLConfig& cfg) {
    post.variance = std::clamp(post.variance, 1e-12 * prior.variance, prior.variance);
    return signed_kl(prior, post, cfg);
}

namespace detail {

inline void eval_time_slice(const FieldModel& fm, const GridSpec& g, double t, const GaussianScalar& prior,
                            const KLConfig& kl, GridNode* out) {
    std::vector<SpaceTimePoint> pts;
    pts.reserve(g.nodes_per_time());
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) pts.push_back({g.x_at(ix), g.y_at(iy), t});
    const Eigen::MatrixXd X = to_matrix(pts);
    const auto vx = fm.model_vx.predict(X);
    const auto vy = fm.model_vy.predict(X);
    const auto div = eval_divergence(fm, pts);
    const auto curl = eval_curl(fm, pts);
    for (std::size_t i = 0; i < pts.size(); ++i)
        out[i] = GridNode{pts[i].x, pts[i].y, t, vx[i], vy[i], div[i], curl[i], node_signed_kl(prior, div[i], kl)};
}

}  // namespace detail

/// V, divergence (the Laplacian up to a positive constant), curl and signed KL on a lattice.
/// Time slices are evaluated independently; the result does not depend on the partitioning.
[[nodiscard]] inline GridResult eval_grid(const FieldModel& fm, const GridSpec& grid, const KLConfig& kl = {}) {
    grid.validate();
    GridResult r{grid, field_prior_laplacian(fm), kl, {}};
    r.nodes.resize(grid.times.size() * grid.nodes_per_time());
    parallel_for(grid.times.size(), [&](std::size_t k) {
        detail::eval_time_slice(fm, grid, grid.times[k], r.prior, kl, r.nodes.data() + k * grid.nodes_per_time());
    });
    return r;
}

/// Bounding box of the observations padded by `pad` on each side, nx x ny nodes, n_times
/// evenly spaced over the observed time span.
[[nodiscard]] inline GridSpec default_grid(const std::vector<FieldObservation>& obs, int nx = 50, int ny = 50,
                                           int n_times = 9, double pad = 0.1) {
    if (obs.empty()) throw InvalidArgument("default_grid: no observations");
    double x0 = obs[0].x, x1 = x0, y0 = obs[0].y, y1 = y0, t0 = obs[0].t, t1 = t0;
    for (const auto& o : obs) {
        x0 = std::min(x0, o.x), x1 = std::max(x1, o.x);
        y0 = std::min(y0, o.y), y1 = std::max(y1, o.y);
        t0 = std::min(t0, o.t), t1 = std::max(t1, o.t);
    }
    const double px = std::max(pad * (x1 - x0), 1e-6), py = std::max(pad * (y1 - y0), 1e-6);
    GridSpec g{x0 - px, x1 + px, nx, y0 - py, y1 + py, ny, {}};
    for (int k = 0; k < n_times; ++k)
        g.times.push_back(n_times == 1 ? t0 : t0 + (t1 - t0) * k / (n_times - 1));
    return g;
}

}  // namespace gplaplace
