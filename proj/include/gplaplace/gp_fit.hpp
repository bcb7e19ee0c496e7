#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "gplaplace/errors.hpp"
#include "gplaplace/gp_model.hpp"
#include "gplaplace/kernel.hpp"
#include "gplaplace/linalg.hpp"
#include "gplaplace/optimizer.hpp"

namespace gplaplace {

struct FitOptions {
    bool optimize = true;
    int restarts = 5;  // total optimiser starts; the first starts from `init`
    std::uint64_t seed = 0;
    double restart_spread = 1.5;  // half-width of the uniform log-space perturbation
    Eigen::VectorXd noise_extra;  // optional per-point additional noise variance
    JitterPolicy jitter;
    BfgsOptions bfgs;

    std::size_t sparse_threshold = 1000;  // fit_auto: exact when N <= threshold
    int max_inducing = 500;
    int inducing_count = 0;                        // 0: min(max_inducing, N/2)
    std::optional<Eigen::MatrixXd> inducing_inputs;  // explicit Z overrides k-means
    int kmeans_iterations = 25;
};

/// Every optimiser start failed, or the winning hyperparameters could not be conditioned.
class FitFailure : public std::runtime_error {
public:
    FitFailure(const std::string& what, std::shared_ptr<const GPModel> best)
        : std::runtime_error(what), best_(std::move(best)) {}
    /// Best model found before failing; may be null.
    [[nodiscard]] const std::shared_ptr<const GPModel>& best_so_far() const noexcept { return best_; }

private:
    std::shared_ptr<const GPModel> best_;
};

namespace detail {

inline double column_std(const Eigen::VectorXd& v) {
    if (v.size() < 2) return 0.0;
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size()));
}

inline double positive_or(double v, double fallback) { return (v > 1e-12 && std::isfinite(v)) ? v : fallback; }

inline void validate_training(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FitOptions& opt) {
    if (X.rows() < 2) throw InvalidArgument("fit: at least two training points required");
    if (X.rows() != y.size())
        throw InvalidArgument("fit: " + std::to_string(X.rows()) + " inputs but " + std::to_string(y.size()) +
                              " targets");
    require_finite(X, "fit: training inputs");
    require_finite(y, "fit: targets");
    if (opt.noise_extra.size() != 0 && opt.noise_extra.size() != y.size())
        throw InvalidArgument("fit: per-point noise vector has wrong length");
}

/// Log-space parameter vector [log l, log lambda_1..D, log sigma^2].
inline Eigen::VectorXd to_log_params(const SEHyperparams& h) {
    const Eigen::Index D = h.dims();
    Eigen::VectorXd t(D + 2);
    t[0] = std::log(h.output_scale);
    t.segment(1, D) = h.length_scales.array().log().matrix();
    t[D + 1] = std::log(std::max(h.noise_variance, std::numeric_limits<double>::min()));
    return t;
}

inline SEHyperparams from_log_params(const Eigen::VectorXd& t) {
    const Eigen::Index D = t.size() - 2;
    return SEHyperparams(std::exp(t[0]), t.segment(1, D).array().exp().matrix(), std::exp(t[D + 1]));
}

struct LogBounds {
    Eigen::VectorXd lower, upper;
};

/// Search box scaled to the data so the optimiser cannot run off to degenerate limits.
inline LogBounds log_bounds(const Eigen::MatrixXd& X, const Eigen::VectorXd& yc) {
    const Eigen::Index D = X.cols();
    LogBounds b{Eigen::VectorXd(D + 2), Eigen::VectorXd(D + 2)};
    const double sy = positive_or(column_std(yc), 1.0);
    b.lower[0] = std::log(1e-3 * sy);
    b.upper[0] = std::log(1e3 * sy);
    for (Eigen::Index d = 0; d < D; ++d) {
        const double sd = positive_or(column_std(X.col(d)), 1.0);
        b.lower[1 + d] = std::log(1e-3 * sd);
        b.upper[1 + d] = std::log(1e3 * sd);
    }
    b.lower[D + 1] = std::log(1e-10 * sy * sy);
    b.upper[D + 1] = std::log(10.0 * sy * sy);
    return b;
}

inline Eigen::VectorXd noise_diag(const Eigen::VectorXd& extra, Eigen::Index n, double sigma2) {
    Eigen::VectorXd d = Eigen::VectorXd::Constant(n, sigma2);
    if (extra.size() != 0) d += extra;
    return d;
}

/// Negative log marginal likelihood of the exact GP and its gradient in log-parameter space.
inline std::optional<double> exact_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& extra, const JitterPolicy& jitter,
                                             const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    const SEHyperparams h = from_log_params(theta);
    const Eigen::Index N = X.rows(), D = X.cols();
    const Eigen::MatrixXd Kf = cross_cov_matrix(X, X, h);
    Eigen::MatrixXd Ky = Kf;
    Ky.diagonal() += noise_diag(extra, N, h.noise_variance);
    auto chol = try_jittered_cholesky(Ky, jitter);
    if (!chol) return std::nullopt;
    const Eigen::VectorXd alpha = chol->llt.solve(y);
    const double lml = -0.5 * y.dot(alpha) - 0.5 * chol->log_det() -
                       0.5 * static_cast<double>(N) * std::log(2.0 * std::numbers::pi);

    Eigen::MatrixXd W = chol->llt.solve(Eigen::MatrixXd::Identity(N, N));
    W = alpha * alpha.transpose() - W;

    grad.setZero(D + 2);
    grad[0] = (W.array() * Kf.array()).sum();
    const Eigen::ArrayXd inv_l2 = h.length_scales.array().square().inverse();
    for (Eigen::Index j = 0; j < N; ++j) {
        for (Eigen::Index i = 0; i < N; ++i) {
            const double wk = 0.5 * W(i, j) * Kf(i, j);
            for (Eigen::Index d = 0; d < D; ++d) {
                const double r = X(i, d) - X(j, d);
                grad[1 + d] += wk * r * r * inv_l2[d];
            }
        }
    }
    grad[D + 1] = 0.5 * h.noise_variance * W.trace();
    grad = -grad;
    return -lml;
}

/// Negative collapsed variational bound (fixed inducing inputs Z) and its gradient.
///
/// With Sigma = Q_ff + D, Q_ff = K_fu K_uu^{-1} K_uf, the bound is
///   log N(y | 0, Sigma) - 1/2 sum_i (k_ii - q_ii) / d_i,
/// and its differential collapses onto the P x N and P x P blocks:
///   dF = <dK_uf, H_uf> + <dK_uu, H_uu> + sum_i dk_ii h_i + sum_i dd_i e_i.
inline std::optional<double> sparse_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                              const Eigen::MatrixXd& Z, const Eigen::VectorXd& extra,
                                              const JitterPolicy& jitter, const Eigen::VectorXd& theta,
                                              Eigen::VectorXd& grad) {
    const SEHyperparams h = from_log_params(theta);
    const Eigen::Index N = X.rows(), D = X.cols(), P = Z.rows();
    const double s2 = h.signal_variance();

    const Eigen::MatrixXd Kuu = cross_cov_matrix(Z, Z, h);
    auto luu = try_jittered_cholesky(Kuu, jitter);
    if (!luu) return std::nullopt;
    const Eigen::MatrixXd Kuf = cross_cov_matrix(Z, X, h);
    const Eigen::VectorXd d = noise_diag(extra, N, h.noise_variance).cwiseMax(1e-12 * s2);
    const Eigen::ArrayXd inv_d = d.array().inverse();

    Eigen::MatrixXd V = Kuf;
    luu->llt.matrixL().solveInPlace(V);
    const Eigen::ArrayXd q = V.colwise().squaredNorm().transpose().array();

    Eigen::MatrixXd VD = V * inv_d.matrix().asDiagonal();  // V D^{-1}
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(P, P);
    B.noalias() += VD * V.transpose();  // I + A A^T with A = V D^{-1/2}
    Eigen::LLT<Eigen::MatrixXd> lb(B);
    if (lb.info() != Eigen::Success) return std::nullopt;

    Eigen::MatrixXd E = std::move(VD);
    lb.matrixL().solveInPlace(E);  // E = L_B^{-1} V D^{-1}; Sigma^{-1} = D^{-1} - E^T E
    const Eigen::VectorXd c = E * y;

    const double quad = (y.array().square() * inv_d).sum() - c.squaredNorm();
    const double log_det = 2.0 * lb.matrixLLT().diagonal().array().log().sum() + d.array().log().sum();
    const Eigen::ArrayXd resid = s2 - q;
    const double bound = -0.5 * quad - 0.5 * log_det - 0.5 * static_cast<double>(N) * std::log(2.0 * std::numbers::pi) -
                         0.5 * (resid * inv_d).sum();

    Eigen::MatrixXd C = V;
    luu->llt.matrixU().solveInPlace(C);  // K_uu^{-1} K_uf
    const Eigen::VectorXd beta = (y.array() * inv_d).matrix() - E.transpose() * c;
    const Eigen::VectorXd Cbeta = C * beta;
    const Eigen::MatrixXd CEt = C * E.transpose();
    Eigen::MatrixXd Huf = CEt * E;
    Huf.noalias() += Cbeta * beta.transpose();
    Eigen::MatrixXd Huu = CEt * CEt.transpose();  // C Huf^T expanded, avoids a P x N x P product
    Huu.noalias() += Cbeta * Cbeta.transpose();
    Huu *= -0.5;

    const Eigen::ArrayXd W_diag = beta.array().square() - inv_d + E.colwise().squaredNorm().transpose().array();
    const Eigen::ArrayXd e = 0.5 * W_diag + 0.5 * resid * inv_d.square();

    grad.setZero(D + 2);
    grad[0] = 2.0 * (Kuf.array() * Huf.array()).sum() + 2.0 * (Kuu.array() * Huu.array()).sum() -
              s2 * inv_d.sum();
    const Eigen::ArrayXd inv_l2 = h.length_scales.array().square().inverse();
    for (Eigen::Index j = 0; j < N; ++j) {
        for (Eigen::Index i = 0; i < P; ++i) {
            const double kh = Kuf(i, j) * Huf(i, j);
            for (Eigen::Index dd = 0; dd < D; ++dd) {
                const double r = Z(i, dd) - X(j, dd);
                grad[1 + dd] += kh * r * r * inv_l2[dd];
            }
        }
    }
    for (Eigen::Index j = 0; j < P; ++j) {
        for (Eigen::Index i = 0; i < P; ++i) {
            const double kh = Kuu(i, j) * Huu(i, j);
            for (Eigen::Index dd = 0; dd < D; ++dd) {
                const double r = Z(i, dd) - Z(j, dd);
                grad[1 + dd] += kh * r * r * inv_l2[dd];
            }
        }
    }
    grad[D + 1] = h.noise_variance * e.sum();
    grad = -grad;
    return -bound;
}

}  // namespace detail

/// Heuristic starting point: per-dimension input std for length scales, target std
/// for the output scale, 1% of the target variance for the noise.
[[nodiscard]] inline SEHyperparams default_hyperparams(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const double sy = detail::positive_or(detail::column_std(y), 1.0);
    Eigen::VectorXd lam(X.cols());
    for (Eigen::Index d = 0; d < X.cols(); ++d) lam[d] = detail::positive_or(detail::column_std(X.col(d)), 1.0);
    return SEHyperparams(sy, lam, 0.01 * sy * sy);
}

/// Deterministic k-means (k-means++ seeding, Lloyd iterations) on per-column standardised inputs.
[[nodiscard]] inline Eigen::MatrixXd kmeans_centers(const Eigen::MatrixXd& X, int k, std::uint64_t seed,
                                                    int iterations = 25) {
    const Eigen::Index N = X.rows(), D = X.cols();
    if (k < 1 || k > N) throw InvalidArgument("kmeans_centers: need 1 <= k <= N");
    const Eigen::RowVectorXd mu = X.colwise().mean();
    Eigen::RowVectorXd sd(D);
    for (Eigen::Index d = 0; d < D; ++d) sd[d] = detail::positive_or(detail::column_std(X.col(d)), 1.0);
    const Eigen::MatrixXd S = (X.rowwise() - mu).array().rowwise() / sd.array();

    std::mt19937_64 rng(seed);
    Eigen::MatrixXd C(k, D);
    Eigen::VectorXd best_d2 = Eigen::VectorXd::Constant(N, std::numeric_limits<double>::infinity());
    C.row(0) = S.row(std::uniform_int_distribution<Eigen::Index>(0, N - 1)(rng));
    for (int c = 1; c < k; ++c) {
        best_d2 = best_d2.cwiseMin((S.rowwise() - C.row(c - 1)).rowwise().squaredNorm());
        const double total = best_d2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (pick = 0; pick < N - 1; ++pick) {
                u -= best_d2[pick];
                if (u <= 0.0) break;
            }
        } else {
            pick = std::uniform_int_distribution<Eigen::Index>(0, N - 1)(rng);
        }
        C.row(c) = S.row(pick);
    }

    std::vector<int> assign(static_cast<std::size_t>(N), -1);
    for (int it = 0; it < iterations; ++it) {
        bool changed = false;
        Eigen::VectorXd nearest(N);
        for (Eigen::Index i = 0; i < N; ++i) {
            Eigen::Index arg = 0;
            nearest[i] = (C.rowwise() - S.row(i)).rowwise().squaredNorm().minCoeff(&arg);
            if (assign[static_cast<std::size_t>(i)] != static_cast<int>(arg)) {
                assign[static_cast<std::size_t>(i)] = static_cast<int>(arg);
                changed = true;
            }
        }
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, D);
        Eigen::VectorXi count = Eigen::VectorXi::Zero(k);
        for (Eigen::Index i = 0; i < N; ++i) {
            sum.row(assign[static_cast<std::size_t>(i)]) += S.row(i);
            ++count[assign[static_cast<std::size_t>(i)]];
        }
        for (int c = 0; c < k; ++c) {
            if (count[c] > 0) {
                C.row(c) = sum.row(c) / count[c];
            } else {
                // Empty cluster: move it to the worst-served point.
                Eigen::Index far = 0;
                nearest.maxCoeff(&far);
                C.row(c) = S.row(far);
                nearest[far] = 0.0;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return (C.array().rowwise() * sd.array()).matrix().rowwise() + mu;
}

namespace detail {

template <typename MakeObjective, typename Condition>
GPModel optimise_and_condition(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SEHyperparams& init,
                               const FitOptions& opt, MakeObjective&& objective, Condition&& condition) {
    init.validate();
    if (init.dims() != X.cols())
        throw InvalidArgument("fit: init has " + std::to_string(init.dims()) + " length scales for " +
                              std::to_string(X.cols()) + "-D inputs");
    if (!opt.optimize) return condition(init);

    const Eigen::VectorXd yc = (y.array() - y.mean()).matrix();
    const LogBounds bounds = log_bounds(X, yc);
    const Eigen::VectorXd theta0 = to_log_params(init).cwiseMax(bounds.lower).cwiseMin(bounds.upper);
    const Objective f = [&](const Eigen::VectorXd& t, Eigen::VectorXd& g) { return objective(yc, t, g); };

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> jitter(-opt.restart_spread, opt.restart_spread);
    std::optional<BfgsResult> best;
    const int starts = std::max(1, opt.restarts);
    for (int s = 0; s < starts; ++s) {
        Eigen::VectorXd start = theta0;
        if (s > 0)
            for (Eigen::Index i = 0; i < start.size(); ++i) start[i] += jitter(rng);
        BfgsResult r = minimize_bfgs(f, start, bounds.lower, bounds.upper, opt.bfgs);
        if (r.feasible && (!best || r.value < best->value)) best = std::move(r);
    }
    auto fallback = [&]() -> std::shared_ptr<const GPModel> {
        try {
            return std::make_shared<const GPModel>(condition(init));
        } catch (const std::exception&) {
            return nullptr;
        }
    };
    if (!best)
        throw FitFailure("fit: no optimiser start produced a factorisable kernel matrix (N=" +
                             std::to_string(X.rows()) + ")",
                         fallback());
    try {
        return condition(from_log_params(best->x));
    } catch (const InvalidArgument& e) {
        throw FitFailure(std::string("fit: conditioning at optimum failed: ") + e.what(), fallback());
    }
}

}  // namespace detail

/// Exact GP; hyperparameters maximise the log marginal likelihood (unless options.optimize is false).
[[nodiscard]] inline GPModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SEHyperparams& init,
                                 const FitOptions& opt = {}) {
    detail::validate_training(X, y, opt);
    return detail::optimise_and_condition(
        X, y, init, opt,
        [&](const Eigen::VectorXd& yc, const Eigen::VectorXd& t, Eigen::VectorXd& g) {
            return detail::exact_objective(X, yc, opt.noise_extra, opt.jitter, t, g);
        },
        [&](const SEHyperparams& h) { return GPModel::condition(X, y, h, opt.noise_extra, opt.jitter); });
}

[[nodiscard]] inline GPModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FitOptions& opt = {}) {
    return fit(X, y, default_hyperparams(X, y), opt);
}

/// Number of inducing points fit_sparse will use for N observations.
[[nodiscard]] inline int default_inducing_count(Eigen::Index n, const FitOptions& opt) {
    if (opt.inducing_count > 0) return opt.inducing_count;
    return static_cast<int>(std::min<Eigen::Index>(opt.max_inducing, n / 2));
}

/// Sparse variational GP over fixed inducing inputs (explicit, or k-means centres of X).
/// Hyperparameters maximise the collapsed bound.
[[nodiscard]] inline GPModel fit_sparse(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SEHyperparams& init,
                                        const FitOptions& opt = {}) {
    detail::validate_training(X, y, opt);
    Eigen::MatrixXd Z;
    if (opt.inducing_inputs) {
        Z = *opt.inducing_inputs;
        if (Z.cols() != X.cols()) throw InvalidArgument("fit_sparse: inducing inputs have wrong dimensionality");
        if (Z.rows() > X.rows())
            throw InvalidArgument("fit_sparse: P=" + std::to_string(Z.rows()) + " inducing inputs exceed N=" +
                                  std::to_string(X.rows()));
    } else {
        const int P = default_inducing_count(X.rows(), opt);
        if (P < 1 || P >= X.rows())
            throw InvalidArgument("fit_sparse: inducing count P=" + std::to_string(P) + " must satisfy 1 <= P < N=" +
                                  std::to_string(X.rows()));
        Z = kmeans_centers(X, P, opt.seed, opt.kmeans_iterations);
    }
    return detail::optimise_and_condition(
        X, y, init, opt,
        [&](const Eigen::VectorXd& yc, const Eigen::VectorXd& t, Eigen::VectorXd& g) {
            return detail::sparse_objective(X, yc, Z, opt.noise_extra, opt.jitter, t, g);
        },
        [&](const SEHyperparams& h) {
            return GPModel::condition_sparse(X, y, Z, h, opt.noise_extra, opt.jitter);
        });
}

[[nodiscard]] inline bool uses_sparse(Eigen::Index n, const FitOptions& opt) {
    return static_cast<std::size_t>(n) > opt.sparse_threshold;
}

/// Exact when N <= options.sparse_threshold, sparse otherwise.
[[nodiscard]] inline GPModel fit_auto(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SEHyperparams& init,
                                      const FitOptions& opt = {}) {
    return uses_sparse(X.rows(), opt) ? fit_sparse(X, y, init, opt) : fit(X, y, init, opt);
}

}  // namespace gplaplace
