#pragma once

#include <Eigen/Dense>

#include <vector>

#include "gplaplace/errors.hpp"
#include "gplaplace/field.hpp"
#include "gplaplace/trajectory.hpp"

namespace gplaplace {

/// Cubic polynomial model of the gradient field, one weight vector per component over the
/// basis {1, x, y, xy, x^2, y^2, x^2 y, x y^2, x^3, y^3}. Time-independent.
struct CubicFieldModel {
    static constexpr int kTerms = 10;
    Eigen::Matrix<double, kTerms, 1> weights_x = Eigen::Matrix<double, kTerms, 1>::Zero();
    Eigen::Matrix<double, kTerms, 1> weights_y = Eigen::Matrix<double, kTerms, 1>::Zero();

    static Eigen::Matrix<double, 1, kTerms> basis(double x, double y) {
        Eigen::Matrix<double, 1, kTerms> b;
        b << 1.0, x, y, x * y, x * x, y * y, x * x * y, x * y * y, x * x * x, y * y * y;
        return b;
    }

    [[nodiscard]] Eigen::Vector2d field(double x, double y) const {
        const auto b = basis(x, y);
        return {b.dot(weights_x), b.dot(weights_y)};
    }
};

/// Least squares per component (minimum-norm solution when the design is rank deficient).
[[nodiscard]] inline CubicFieldModel fit_parametric(const std::vector<FieldObservation>& obs) {
    constexpr int P = CubicFieldModel::kTerms;
    if (obs.size() < static_cast<std::size_t>(P))
        throw InvalidArgument("fit_parametric: at least 10 observations required, got " + std::to_string(obs.size()));
    const auto n = static_cast<Eigen::Index>(obs.size());
    Eigen::MatrixXd A(n, P);
    Eigen::MatrixXd rhs(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        A.row(i) = CubicFieldModel::basis(o.x, o.y);
        rhs.row(i) << o.value_x, o.value_y;
    }
    if (!A.allFinite() || !rhs.allFinite()) throw InvalidArgument("fit_parametric: non-finite observations");
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    const Eigen::MatrixXd W = cod.solve(rhs);
    CubicFieldModel m;
    m.weights_x = W.col(0);
    m.weights_y = W.col(1);
    return m;
}

/// Divergence of the fitted field, d/dx of the x component plus d/dy of the y component.
[[nodiscard]] inline double parametric_laplacian(const CubicFieldModel& m, double x, double y) {
    const auto& a = m.weights_x;
    const auto& b = m.weights_y;
    const double ddx = a[1] + a[3] * y + 2 * a[4] * x + 2 * a[6] * x * y + a[7] * y * y + 3 * a[8] * x * x;
    const double ddy = b[2] + b[3] * x + 2 * b[5] * y + b[6] * x * x + 2 * b[7] * x * y + 3 * b[9] * y * y;
    return ddx + ddy;
}

[[nodiscard]] inline std::vector<double> eval_parametric_laplacian(const CubicFieldModel& m,
                                                                   const std::vector<SpaceTimePoint>& pts) {
    std::vector<double> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(parametric_laplacian(m, p.x, p.y));
    return out;
}

}  // namespace gplaplace
