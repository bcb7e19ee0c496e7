#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>

namespace gplaplace {

/// Objective for minimisation: returns the value and writes the gradient, or
/// nullopt when the point is infeasible (e.g. the kernel matrix cannot be factored).
using Objective = std::function<std::optional<double>(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct BfgsOptions {
    int max_iterations = 200;
    double gradient_tolerance = 1e-6;
    double relative_function_tolerance = 1e-10;
    int max_backtracks = 40;
};

struct BfgsResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    bool feasible = false;
};

/// Box-constrained quasi-Newton minimiser: BFGS on the inverse Hessian with
/// projection onto [lower, upper] and Armijo backtracking along the projected path.
inline BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                                const Eigen::VectorXd& upper, const BfgsOptions& opt = {}) {
    const Eigen::Index n = x0.size();
    auto clamp = [&](Eigen::VectorXd v) {
        return v.cwiseMax(lower).cwiseMin(upper).eval();
    };

    BfgsResult res;
    Eigen::VectorXd x = clamp(std::move(x0));
    Eigen::VectorXd g(n);
    auto fx = f(x, g);
    res.evaluations = 1;
    if (!fx || !std::isfinite(*fx) || !g.allFinite()) {
        res.x = x;
        return res;
    }
    res.feasible = true;
    double fval = *fx;

    // Components sitting on a bound with the gradient pushing outward are frozen.
    auto active = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& gv) {
        Eigen::Array<bool, Eigen::Dynamic, 1> a(n);
        for (Eigen::Index i = 0; i < n; ++i)
            a[i] = (xv[i] <= lower[i] && gv[i] > 0.0) || (xv[i] >= upper[i] && gv[i] < 0.0);
        return a;
    };

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd g_new(n);
    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it + 1;
        const auto act = active(x, g);
        Eigen::VectorXd pg = g;
        for (Eigen::Index i = 0; i < n; ++i)
            if (act[i]) pg[i] = 0.0;
        if (pg.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd d = -H * pg;
        for (Eigen::Index i = 0; i < n; ++i)
            if (act[i]) d[i] = 0.0;
        if (pg.dot(d) >= 0.0) {
            H.setIdentity();
            d = -pg;
        }

        double t = 1.0;
        if (it == 0) t = std::min(1.0, 1.0 / std::max(d.norm(), 1e-12));
        bool accepted = false;
        Eigen::VectorXd x_new;
        double f_new = fval;
        for (int bt = 0; bt < opt.max_backtracks; ++bt) {
            x_new = clamp(x + t * d);
            auto fv = f(x_new, g_new);
            ++res.evaluations;
            if (fv && std::isfinite(*fv) && g_new.allFinite() && *fv <= fval + 1e-4 * g.dot(x_new - x)) {
                f_new = *fv;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            res.converged = true;  // no further descent available along the projected path
            break;
        }

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd yv = g_new - g;
        const double sy = s.dot(yv);
        const double df = fval - f_new;
        x = x_new;
        g = g_new;
        fval = f_new;
        if (sy > 1e-12 * s.norm() * yv.norm() && sy > 0.0) {
            if (it == 0) H *= sy / yv.squaredNorm();
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) + rho * s * s.transpose();
        }
        if (df <= opt.relative_function_tolerance * (1.0 + std::abs(fval))) {
            res.converged = true;
            break;
        }
    }
    res.x = x;
    res.value = fval;
    return res;
}

}  // namespace gplaplace
