#pragma once

#include <cmath>
#include <string>

#include "gplaplace/errors.hpp"
#include "gplaplace/gp_model.hpp"
#include "gplaplace/kernel.hpp"

namespace gplaplace {

enum class KLVariant {
    paper,     // 1/2 (s_pr^2/s_po^2 + dmu^2/s_po^2 - 1 + ln(s_po/s_pr))
    standard,  // textbook KL(N_pr || N_po): log-ratio term doubled
};

inline const char* to_string(KLVariant v) { return v == KLVariant::paper ? "paper" : "standard"; }

struct KLConfig {
    KLVariant variant = KLVariant::paper;
    double sign_at_zero = 0.0;
};

/// Prior of dV_x/dx + dV_y/dy under independent SE kernels: mean 0, variance
/// l_x^2 / lambda_{x,x}^2 + l_y^2 / lambda_{y,y}^2 (V_x kernel's x length scale, V_y kernel's y length scale).
[[nodiscard]] inline GaussianScalar prior_laplacian(const SEHyperparams& hx, const SEHyperparams& hy) {
    if (hx.dims() < 1 || hy.dims() < 2)
        throw InvalidArgument("prior_laplacian: kernels need x (dim 0) and y (dim 1) length scales");
    const double lx = hx.length_scales[0], ly = hy.length_scales[1];
    return {0.0, hx.signal_variance() / (lx * lx) + hy.signal_variance() / (ly * ly)};
}

/// KL divergence from prior to posterior, both univariate normal.
[[nodiscard]] inline double kl_divergence(const GaussianScalar& prior, const GaussianScalar& post,
                                          const KLConfig& cfg = {}) {
    if (!(prior.variance > 0.0) || !(post.variance > 0.0))
        throw InvalidArgument("kl_divergence: variances must be positive (prior " + std::to_string(prior.variance) +
                              ", posterior " + std::to_string(post.variance) + ")");
    // ratio - 1 + c ln(s_po / s_pr) written as d - (c/2) log1p(d) with d = ratio - 1, so the variance
    // part cancels cleanly when the posterior equals the prior and a tiny mean term still registers.
    const double d = (prior.variance - post.variance) / post.variance;
    const double dmu = post.mean - prior.mean;
    const double log_coeff = cfg.variant == KLVariant::paper ? 1.0 : 2.0;
    return 0.5 * ((d - 0.5 * log_coeff * std::log1p(d)) + dmu * dmu / post.variance);
}

/// sign(posterior mean) * KL; a zero posterior mean maps to cfg.sign_at_zero.
[[nodiscard]] inline double signed_kl(const GaussianScalar& prior, const GaussianScalar& post,
                                      const KLConfig& cfg = {}) {
    const double kl = kl_divergence(prior, post, cfg);
    if (post.mean > 0.0) return kl;
    if (post.mean < 0.0) return -kl;
    return cfg.sign_at_zero * kl;
}

}  // namespace gplaplace
