#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gplaplace/errors.hpp"

namespace gplaplace {

/// Hyperparameters of one squared-exponential kernel
///   k(a, b) = l^2 exp(-1/2 sum_d (a_d - b_d)^2 / lambda_d^2)
/// plus the homoscedastic observation noise of the GP that uses it.
struct SEHyperparams {
    double output_scale = 1.0;            // l
    Eigen::VectorXd length_scales;        // lambda_d, one per input dimension
    double noise_variance = 0.0;          // sigma^2

    SEHyperparams() = default;
    SEHyperparams(double l, Eigen::VectorXd lambda, double sigma2)
        : output_scale(l), length_scales(std::move(lambda)), noise_variance(sigma2) {}

    [[nodiscard]] Eigen::Index dims() const { return length_scales.size(); }
    [[nodiscard]] double signal_variance() const { return output_scale * output_scale; }

    void validate() const {
        if (!(output_scale > 0.0) || !std::isfinite(output_scale))
            throw InvalidArgument("SEHyperparams: output_scale must be positive and finite");
        if (length_scales.size() == 0)
            throw InvalidArgument("SEHyperparams: at least one length scale required");
        for (Eigen::Index d = 0; d < length_scales.size(); ++d) {
            if (!(length_scales[d] > 0.0) || !std::isfinite(length_scales[d]))
                throw InvalidArgument("SEHyperparams: length_scales[" + std::to_string(d) +
                                      "] must be positive and finite");
        }
        if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
            throw InvalidArgument("SEHyperparams: noise_variance must be non-negative and finite");
    }
};

/// Partial-derivative orders applied to the first and second kernel argument,
/// per input dimension. Dimensions beyond kMaxDims are always order zero.
struct DerivativeOrder {
    static constexpr int kMaxDims = 4;
    static constexpr int kMaxPerArgument = 2;

    std::array<std::uint8_t, kMaxDims> first{};
    std::array<std::uint8_t, kMaxDims> second{};

    [[nodiscard]] int total_first() const {
        int s = 0;
        for (auto o : first) s += o;
        return s;
    }
    [[nodiscard]] int total_second() const {
        int s = 0;
        for (auto o : second) s += o;
        return s;
    }
    [[nodiscard]] bool is_zero() const { return total_first() == 0 && total_second() == 0; }

    /// Same orders on both arguments; this is the prior term of a derivative variance.
    [[nodiscard]] DerivativeOrder mirrored() const {
        DerivativeOrder o;
        o.first = first;
        o.second = first;
        return o;
    }

    static DerivativeOrder none() { return {}; }

    /// `n`-th derivative w.r.t. dimension `dim` of the first (test) argument.
    static DerivativeOrder on_first(int dim, int n = 1) {
        DerivativeOrder o;
        o.first.at(static_cast<std::size_t>(dim)) = static_cast<std::uint8_t>(n);
        return o;
    }

    static DerivativeOrder mixed(int dim_first, int n_first, int dim_second, int n_second) {
        DerivativeOrder o;
        o.first.at(static_cast<std::size_t>(dim_first)) = static_cast<std::uint8_t>(n_first);
        o.second.at(static_cast<std::size_t>(dim_second)) = static_cast<std::uint8_t>(n_second);
        return o;
    }

    friend bool operator==(const DerivativeOrder&, const DerivativeOrder&) = default;
};

namespace detail {

inline void check_order(const DerivativeOrder& order, Eigen::Index dims) {
    if (order.total_first() > DerivativeOrder::kMaxPerArgument ||
        order.total_second() > DerivativeOrder::kMaxPerArgument)
        throw Unsupported("k_se_deriv: at most second-order derivatives per kernel argument are implemented");
    for (int d = static_cast<int>(dims); d < DerivativeOrder::kMaxDims; ++d) {
        if (order.first[static_cast<std::size_t>(d)] != 0 || order.second[static_cast<std::size_t>(d)] != 0)
            throw InvalidArgument("k_se_deriv: derivative requested on dimension " + std::to_string(d) +
                                  " of a " + std::to_string(dims) + "-D kernel");
    }
}

/// Probabilists' Hermite polynomial He_n(u), n <= 4.
inline double hermite(int n, double u) {
    switch (n) {
        case 0: return 1.0;
        case 1: return u;
        case 2: return u * u - 1.0;
        case 3: return u * (u * u - 3.0);
        case 4: {
            const double u2 = u * u;
            return u2 * u2 - 6.0 * u2 + 3.0;
        }
        default: throw Unsupported("hermite: order above 4");
    }
}

/// Multiplier m such that d^p/da^p d^q/db^q g(a - b) = m * g(a - b) for the
/// one-dimensional factor g(r) = exp(-r^2 / (2 lambda^2)).
/// Uses g^{(n)}(r) = (-1/lambda)^n He_n(r/lambda) g(r), and each derivative on b
/// contributes a factor -1.
inline double factor_multiplier(int p, int q, double r, double lambda) {
    const int n = p + q;
    if (n == 0) return 1.0;
    const double u = r / lambda;
    double scale = 1.0;
    for (int i = 0; i < n; ++i) scale /= lambda;
    const int sign_exp = n + q;
    return ((sign_exp % 2) ? -1.0 : 1.0) * scale * hermite(n, u);
}

template <typename DA, typename DB>
void check_dims(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b, const SEHyperparams& h) {
    if (a.size() != h.dims() || b.size() != h.dims())
        throw InvalidArgument("kernel: point dimensionality " + std::to_string(a.size()) + "/" +
                              std::to_string(b.size()) + " does not match " + std::to_string(h.dims()) +
                              " length scales");
}

}  // namespace detail

/// Squared-exponential kernel value.
template <typename DA, typename DB>
[[nodiscard]] double k_se(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b, const SEHyperparams& h) {
    detail::check_dims(a, b, h);
    double q = 0.0;
    for (Eigen::Index d = 0; d < h.dims(); ++d) {
        const double r = (a(d) - b(d)) / h.length_scales[d];
        q += r * r;
    }
    return h.signal_variance() * std::exp(-0.5 * q);
}

/// Exact partial derivative of k_se w.r.t. the argument dimensions named in `order`.
/// Closed form: the kernel factorises over dimensions, so each dimension contributes
/// a Hermite-polynomial multiplier.
template <typename DA, typename DB>
[[nodiscard]] double k_se_deriv(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b, const SEHyperparams& h,
                                const DerivativeOrder& order) {
    detail::check_dims(a, b, h);
    detail::check_order(order, h.dims());
    double q = 0.0;
    double mult = 1.0;
    for (Eigen::Index d = 0; d < h.dims(); ++d) {
        const double r = a(d) - b(d);
        const double lam = h.length_scales[d];
        q += (r / lam) * (r / lam);
        if (d < DerivativeOrder::kMaxDims) {
            const auto du = static_cast<std::size_t>(d);
            mult *= detail::factor_multiplier(order.first[du], order.second[du], r, lam);
        }
    }
    return mult * h.signal_variance() * std::exp(-0.5 * q);
}

/// Matrix of k_se_deriv(A_i, B_j) over the rows of A and B.
template <typename DA, typename DB>
[[nodiscard]] Eigen::MatrixXd cross_cov_matrix(const Eigen::MatrixBase<DA>& A, const Eigen::MatrixBase<DB>& B,
                                               const SEHyperparams& h,
                                               const DerivativeOrder& order = DerivativeOrder::none()) {
    const Eigen::Index D = h.dims();
    if (A.cols() != D || B.cols() != D)
        throw InvalidArgument("cross_cov_matrix: point sets have " + std::to_string(A.cols()) + "/" +
                              std::to_string(B.cols()) + " columns, kernel expects " + std::to_string(D));
    detail::check_order(order, D);

    const Eigen::VectorXd inv_len = h.length_scales.cwiseInverse();
    const double s2 = h.signal_variance();
    const bool zero = order.is_zero();
    Eigen::MatrixXd K(A.rows(), B.rows());
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            double q = 0.0;
            double mult = 1.0;
            for (Eigen::Index d = 0; d < D; ++d) {
                const double r = A(i, d) - B(j, d);
                const double u = r * inv_len[d];
                q += u * u;
                if (!zero && d < DerivativeOrder::kMaxDims) {
                    const auto du = static_cast<std::size_t>(d);
                    mult *= detail::factor_multiplier(order.first[du], order.second[du], r, h.length_scales[d]);
                }
            }
            K(i, j) = mult * s2 * std::exp(-0.5 * q);
        }
    }
    return K;
}

}  // namespace gplaplace
