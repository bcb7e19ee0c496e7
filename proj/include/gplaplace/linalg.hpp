#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

#include "gplaplace/errors.hpp"

namespace gplaplace {

struct JitterPolicy {
    double initial_relative = 1e-12;  // times trace(K)/N, just above Cholesky's rounding error
    double max_relative = 1e-2;
    double growth = 10.0;
};

/// Cholesky factor of a symmetric matrix after adding the smallest jitter from the
/// escalation ladder that makes it numerically positive definite.
struct JitteredCholesky {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;  // absolute value added to the diagonal

    [[nodiscard]] Eigen::MatrixXd matrix_l() const { return llt.matrixL(); }

    [[nodiscard]] double log_det() const {
        return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }
};

/// Returns nullopt when even the largest jitter fails.
[[nodiscard]] inline std::optional<JitteredCholesky> try_jittered_cholesky(const Eigen::MatrixXd& K,
                                                                           const JitterPolicy& policy = {}) {
    const Eigen::Index n = K.rows();
    if (n == 0) return JitteredCholesky{Eigen::LLT<Eigen::MatrixXd>(K), 0.0};
    double scale = K.trace() / static_cast<double>(n);
    if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;

    Eigen::MatrixXd work(n, n);
    double rel = policy.initial_relative;
    for (int attempt = 0; attempt < 64; ++attempt) {
        const double jitter = rel * scale;
        work = K;
        work.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(work);
        if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite() &&
            (llt.matrixLLT().diagonal().array() > 0.0).all())
            return JitteredCholesky{std::move(llt), jitter};
        if (!(rel > 0.0) || !(policy.growth > 1.0) || rel * policy.growth > policy.max_relative * (1.0 + 1e-9))
            break;
        rel *= policy.growth;
    }
    return std::nullopt;
}

[[nodiscard]] inline JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& K, const JitterPolicy& policy = {}) {
    auto c = try_jittered_cholesky(K, policy);
    if (!c)
        throw InvalidArgument("jittered_cholesky: matrix of size " + std::to_string(K.rows()) +
                              " is not positive definite even with maximal jitter");
    return std::move(*c);
}

}  // namespace gplaplace
