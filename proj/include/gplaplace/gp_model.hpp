#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gplaplace/errors.hpp"
#include "gplaplace/kernel.hpp"
#include "gplaplace/linalg.hpp"

namespace gplaplace {

/// Univariate Gaussian posterior.
struct GaussianScalar {
    double mean = 0.0;
    double variance = 0.0;

    [[nodiscard]] double stddev() const { return std::sqrt(variance); }
    friend bool operator==(const GaussianScalar&, const GaussianScalar&) = default;
};

enum class GPMode { exact, sparse };

namespace detail {

/// Negative variances within roundoff of zero clamp to zero; anything larger is a bug.
inline double clamp_variance(double v, double prior) {
    if (v >= 0.0) return v;
    if (v >= -1e-9 * std::max(1.0, prior)) return 0.0;
    throw InternalConsistencyError("posterior variance " + std::to_string(v) + " is negative beyond roundoff");
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
    if (!m.allFinite()) throw InvalidArgument(std::string(what) + " contains non-finite values");
}

}  // namespace detail

/// A conditioned single-output GP with an SE kernel, zero prior mean on
/// de-meaned targets, homoscedastic noise sigma^2 and optional per-point extra noise.
///
/// Exact mode factorises K_xx + diag(sigma^2 + s) + jitter. Sparse mode keeps a fixed
/// inducing set Z and the optimal variational posterior over u = f(Z) (collapsed bound);
/// every prediction is a linear functional against the basis (X or Z), so derivative
/// predictions only swap the cross-covariance for its derivative.
///
/// Immutable after construction; prediction is const and thread safe.
class GPModel {
public:
    /// Exact GP conditioned on (X, y) with fixed hyperparameters.
    static GPModel condition(Eigen::MatrixXd X, const Eigen::VectorXd& y, const SEHyperparams& hyper,
                             Eigen::VectorXd noise_extra = {}, const JitterPolicy& jitter = {}) {
        GPModel m;
        m.init_common(std::move(X), y, hyper, std::move(noise_extra));
        m.mode_ = GPMode::exact;

        Eigen::MatrixXd K = cross_cov_matrix(m.X_, m.X_, m.hyper_);
        K.diagonal() += m.noise_diagonal();
        auto chol = try_jittered_cholesky(K, jitter);
        if (!chol) throw InvalidArgument("GPModel::condition: kernel matrix not positive definite at maximal jitter");
        m.chol_ = std::move(*chol);
        m.policy_ = jitter;
        m.weights_ = m.chol_.llt.solve(m.y_);
        const double n = static_cast<double>(m.y_.size());
        m.evidence_ = -0.5 * m.y_.dot(m.weights_) - 0.5 * m.chol_.log_det() -
                      0.5 * n * std::log(2.0 * std::numbers::pi);
        return m;
    }

    /// Sparse variational GP with fixed inducing inputs Z (P <= N).
    static GPModel condition_sparse(Eigen::MatrixXd X, const Eigen::VectorXd& y, Eigen::MatrixXd Z,
                                    const SEHyperparams& hyper, Eigen::VectorXd noise_extra = {},
                                    const JitterPolicy& jitter = {}) {
        GPModel m;
        m.init_common(std::move(X), y, hyper, std::move(noise_extra));
        m.mode_ = GPMode::sparse;
        if (Z.cols() != m.X_.cols())
            throw InvalidArgument("GPModel::condition_sparse: inducing inputs have wrong dimensionality");
        if (Z.rows() < 1 || Z.rows() > m.X_.rows())
            throw InvalidArgument("GPModel::condition_sparse: need 1 <= P <= N inducing inputs, got P=" +
                                  std::to_string(Z.rows()) + ", N=" + std::to_string(m.X_.rows()));
        detail::require_finite(Z, "inducing inputs");
        m.Z_ = std::move(Z);

        const Eigen::MatrixXd Kuu = cross_cov_matrix(m.Z_, m.Z_, m.hyper_);
        auto chol = try_jittered_cholesky(Kuu, jitter);
        if (!chol) throw InvalidArgument("GPModel::condition_sparse: K_uu not positive definite at maximal jitter");
        m.chol_ = std::move(*chol);
        m.policy_ = jitter;

        const Eigen::VectorXd d = m.noise_diagonal();
        const Eigen::VectorXd inv_sqrt_d = d.array().rsqrt();
        Eigen::MatrixXd V = cross_cov_matrix(m.Z_, m.X_, m.hyper_);  // K_uf, solved in place below
        m.chol_.llt.matrixL().solveInPlace(V);
        const Eigen::VectorXd q_diag = V.colwise().squaredNorm().transpose();
        const Eigen::MatrixXd A = V * inv_sqrt_d.asDiagonal();
        Eigen::MatrixXd B = Eigen::MatrixXd::Identity(A.rows(), A.rows());
        B.selfadjointView<Eigen::Lower>().rankUpdate(A);
        m.lb_.compute(B);
        if (m.lb_.info() != Eigen::Success) throw InternalConsistencyError("sparse GP: I + A A^T not factorisable");

        m.c_ = A * m.y_.cwiseProduct(inv_sqrt_d);
        m.lb_.matrixL().solveInPlace(m.c_);
        Eigen::VectorXd w = m.c_;
        m.lb_.matrixU().solveInPlace(w);
        m.chol_.llt.matrixU().solveInPlace(w);
        m.weights_ = std::move(w);

        const double n = static_cast<double>(m.y_.size());
        const double quad = m.y_.cwiseAbs2().cwiseQuotient(d).sum() - m.c_.squaredNorm();
        const double log_det = 2.0 * m.lb_.matrixLLT().diagonal().array().log().sum() + d.array().log().sum();
        const double trace_term = ((m.hyper_.signal_variance() - q_diag.array()) / d.array()).sum();
        m.evidence_ = -0.5 * quad - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * trace_term;
        return m;
    }

    [[nodiscard]] GPMode mode() const { return mode_; }
    [[nodiscard]] const Eigen::MatrixXd& training_inputs() const { return X_; }
    /// De-meaned targets as stored.
    [[nodiscard]] const Eigen::VectorXd& targets() const { return y_; }
    /// Targets exactly as supplied; conditioning on them again reproduces this model.
    [[nodiscard]] const Eigen::VectorXd& raw_targets() const { return y_raw_; }
    [[nodiscard]] double offset() const { return offset_; }
    [[nodiscard]] const SEHyperparams& hyper() const { return hyper_; }
    [[nodiscard]] const Eigen::VectorXd& noise_extra() const { return noise_extra_; }
    [[nodiscard]] const Eigen::MatrixXd& inducing_inputs() const { return Z_; }
    [[nodiscard]] double jitter() const { return chol_.jitter; }
    [[nodiscard]] const JitterPolicy& jitter_policy() const { return policy_; }
    [[nodiscard]] Eigen::Index size() const { return X_.rows(); }
    [[nodiscard]] Eigen::Index dims() const { return X_.cols(); }

    /// Exact mode: log marginal likelihood. Sparse mode: the collapsed variational lower bound.
    [[nodiscard]] double evidence() const { return evidence_; }

    /// Posterior of the derivative (orders on the test argument, `order.first`) at each row of Xs.
    /// The zero order yields the function posterior, including the stored offset.
    [[nodiscard]] std::vector<GaussianScalar> predict_deriv(const Eigen::MatrixXd& Xs,
                                                            const DerivativeOrder& order) const {
        check_query(Xs, order);
        const Eigen::MatrixXd cross = cross_cov_matrix(Xs, basis(), hyper_, order);
        const double prior = prior_variance(order);
        const double shift = order.is_zero() ? offset_ : 0.0;

        const Eigen::VectorXd mean = cross * weights_;
        Eigen::MatrixXd t1 = cross.transpose();
        chol_.llt.matrixL().solveInPlace(t1);
        Eigen::VectorXd var = Eigen::VectorXd::Constant(Xs.rows(), prior) - t1.colwise().squaredNorm().transpose();
        if (mode_ == GPMode::sparse) {
            lb_.matrixL().solveInPlace(t1);
            var += t1.colwise().squaredNorm().transpose();
        }

        std::vector<GaussianScalar> out(static_cast<std::size_t>(Xs.rows()));
        for (Eigen::Index i = 0; i < Xs.rows(); ++i)
            out[static_cast<std::size_t>(i)] = {mean[i] + shift, detail::clamp_variance(var[i], prior)};
        return out;
    }

    [[nodiscard]] std::vector<GaussianScalar> predict(const Eigen::MatrixXd& Xs) const {
        return predict_deriv(Xs, DerivativeOrder::none());
    }

    /// Posterior means only; avoids the triangular solves of the variance.
    [[nodiscard]] Eigen::VectorXd predict_deriv_mean(const Eigen::MatrixXd& Xs, const DerivativeOrder& order) const {
        check_query(Xs, order);
        Eigen::VectorXd mean = cross_cov_matrix(Xs, basis(), hyper_, order) * weights_;
        if (order.is_zero()) mean.array() += offset_;
        return mean;
    }

    /// Prior variance of the derivative process at any point (stationary kernel).
    [[nodiscard]] double prior_variance(const DerivativeOrder& order) const {
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dims());
        return k_se_deriv(zero, zero, hyper_, order.mirrored());
    }

private:
    GPModel() = default;

    void init_common(Eigen::MatrixXd X, const Eigen::VectorXd& y, const SEHyperparams& hyper,
                     Eigen::VectorXd noise_extra) {
        hyper.validate();
        if (X.rows() < 1) throw InvalidArgument("GPModel: at least one training point required");
        if (X.rows() != y.size())
            throw InvalidArgument("GPModel: " + std::to_string(X.rows()) + " inputs but " +
                                  std::to_string(y.size()) + " targets");
        if (X.cols() != hyper.dims())
            throw InvalidArgument("GPModel: inputs have " + std::to_string(X.cols()) + " columns, kernel has " +
                                  std::to_string(hyper.dims()) + " length scales");
        detail::require_finite(X, "training inputs");
        detail::require_finite(y, "targets");
        if (noise_extra.size() != 0) {
            if (noise_extra.size() != y.size())
                throw InvalidArgument("GPModel: per-point noise vector has wrong length");
            detail::require_finite(noise_extra, "per-point noise");
            if ((noise_extra.array() < 0.0).any()) throw InvalidArgument("GPModel: per-point noise must be >= 0");
        }
        X_ = std::move(X);
        y_raw_ = y;
        offset_ = y.mean();
        y_ = (y.array() - offset_).matrix();
        hyper_ = hyper;
        noise_extra_ = std::move(noise_extra);
    }

    [[nodiscard]] Eigen::VectorXd noise_diagonal() const {
        Eigen::VectorXd d = Eigen::VectorXd::Constant(y_.size(), hyper_.noise_variance);
        if (noise_extra_.size() != 0) d += noise_extra_;
        if (mode_ == GPMode::sparse) {
            // The collapsed bound divides by the noise; keep it strictly positive.
            const double floor = 1e-12 * hyper_.signal_variance();
            d = d.cwiseMax(floor);
        }
        return d;
    }

    [[nodiscard]] const Eigen::MatrixXd& basis() const { return mode_ == GPMode::exact ? X_ : Z_; }

    void check_query(const Eigen::MatrixXd& Xs, const DerivativeOrder& order) const {
        if (Xs.cols() != dims())
            throw InvalidArgument("predict: query points have " + std::to_string(Xs.cols()) +
                                  " columns, model expects " + std::to_string(dims()));
        if (order.total_second() != 0)
            throw InvalidArgument("predict_deriv: derivative orders apply to the test argument only");
        detail::check_order(order, dims());
    }

    GPMode mode_ = GPMode::exact;
    Eigen::MatrixXd X_;
    Eigen::VectorXd y_;
    Eigen::VectorXd y_raw_;
    double offset_ = 0.0;
    SEHyperparams hyper_;
    Eigen::VectorXd noise_extra_;
    Eigen::MatrixXd Z_;

    JitterPolicy policy_;
    JitteredCholesky chol_;           // of K_xx + noise (exact) or K_uu (sparse)
    Eigen::LLT<Eigen::MatrixXd> lb_;  // sparse: I + A A^T
    Eigen::VectorXd c_;               // sparse: L_B^{-1} A D^{-1/2} y
    Eigen::VectorXd weights_;         // mean weights against basis()
    double evidence_ = 0.0;
};

[[nodiscard]] inline std::vector<GaussianScalar> predict(const GPModel& model, const Eigen::MatrixXd& Xs) {
    return model.predict(Xs);
}

[[nodiscard]] inline std::vector<GaussianScalar> predict_deriv(const GPModel& model, const Eigen::MatrixXd& Xs,
                                                               const DerivativeOrder& order) {
    return model.predict_deriv(Xs, order);
}

/// Exact mode: -1/2 y^T alpha - sum log diag(L) - N/2 log 2 pi. Sparse mode: the variational bound.
[[nodiscard]] inline double log_marginal_likelihood(const GPModel& model) { return model.evidence(); }

}  // namespace gplaplace
