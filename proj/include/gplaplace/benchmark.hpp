#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gplaplace/baseline.hpp"
#include "gplaplace/errors.hpp"
#include "gplaplace/field.hpp"
#include "gplaplace/synthetic.hpp"
#include "gplaplace/trajectory.hpp"

namespace gplaplace {

enum class BenchMethod { gp_laplace, parametric, truth };

inline const char* to_string(BenchMethod m) {
    switch (m) {
        case BenchMethod::gp_laplace: return "gp_laplace";
        case BenchMethod::parametric: return "parametric";
        case BenchMethod::truth: return "truth";
    }
    return "?";
}

inline BenchMethod bench_method_from_string(const std::string& s) {
    if (s == "gp_laplace") return BenchMethod::gp_laplace;
    if (s == "parametric") return BenchMethod::parametric;
    if (s == "truth") return BenchMethod::truth;
    throw InvalidArgument("unknown benchmark method '" + s + "' (gp_laplace | parametric | truth)");
}

struct BenchmarkConfig {
    std::vector<PotentialKind> kinds{PotentialKind::stationary};
    std::vector<int> agent_counts{4, 16};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<BenchMethod> methods{BenchMethod::gp_laplace, BenchMethod::parametric};

    // Simulation; the start box and initial velocity come from SimConfig defaults when unchanged.
    int steps = 200;
    double eta = 0.05;
    double start_min = -4.0, start_max = 4.0;

    // Evaluation lattice, scored at every `time_stride`-th simulation step.
    int lattice_n = 30;
    double lattice_min = -5.0, lattice_max = 5.0;
    int time_stride = 1;

    TrajectoryOptions stage_one;
    FieldOptions stage_two = default_stage_two();

    /// Sparse stage two with 200 inducing points keeps one M=16 cell near two minutes on one core.
    static FieldOptions default_stage_two() {
        FieldOptions f;
        f.fit.inducing_count = 200;
        return f;
    }

    void validate() const {
        if (kinds.empty() || agent_counts.empty() || seeds.empty() || methods.empty())
            throw InvalidArgument("BenchmarkConfig: kinds, agent_counts, seeds and methods must be non-empty");
        for (int m : agent_counts)
            if (m < 1) throw InvalidArgument("BenchmarkConfig: agent counts must be >= 1");
        if (steps < 3) throw InvalidArgument("BenchmarkConfig: steps must be >= 3");
        if (!(eta > 0.0)) throw InvalidArgument("BenchmarkConfig: eta must be positive");
        if (lattice_n < 2 || !(lattice_max > lattice_min))
            throw InvalidArgument("BenchmarkConfig: lattice needs >= 2 nodes over a non-degenerate range");
        if (time_stride < 1) throw InvalidArgument("BenchmarkConfig: time_stride must be >= 1");
    }

    [[nodiscard]] SimConfig sim(int agents, std::uint64_t seed) const {
        SimConfig c;
        c.agents = agents;
        c.steps = steps;
        c.eta = eta;
        c.start_min = start_min;
        c.start_max = start_max;
        c.seed = seed;
        return c;
    }
};

/// One (kind, M, seed, method) run. `mse` is empty when the cell failed; `error` says why.
struct BenchmarkCell {
    PotentialKind kind = PotentialKind::stationary;
    int agents = 0;
    std::uint64_t seed = 0;
    BenchMethod method = BenchMethod::gp_laplace;
    std::optional<double> mse;
    std::string error;
    double seconds = 0.0;
};

struct CellSummary {
    int ok = 0, failed = 0;
    double mean = NAN, stddev = NAN, median = NAN;
};

struct BenchmarkReport {
    BenchmarkConfig config;
    std::vector<BenchmarkCell> cells;

    /// Statistics over seeds for one (kind, method, M). Standard deviation uses n - 1.
    [[nodiscard]] CellSummary summary(PotentialKind kind, BenchMethod method, int agents) const {
        std::vector<double> v;
        CellSummary s;
        for (const auto& c : cells) {
            if (c.kind != kind || c.method != method || c.agents != agents) continue;
            if (c.mse) v.push_back(*c.mse);
            else ++s.failed;
        }
        s.ok = static_cast<int>(v.size());
        if (v.empty()) return s;
        double sum = 0.0;
        for (double x : v) sum += x;
        s.mean = sum / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.stddev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        return s;
    }
};

/// The scoring lattice at one time as an (n*n) x 3 matrix of (x, y, t) rows, x fastest.
[[nodiscard]] inline Eigen::MatrixXd benchmark_lattice(const BenchmarkConfig& cfg, double t) {
    const int n = cfg.lattice_n;
    Eigen::MatrixXd X(n * n, 3);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double x = cfg.lattice_min + (cfg.lattice_max - cfg.lattice_min) * i / (n - 1);
            const double y = cfg.lattice_min + (cfg.lattice_max - cfg.lattice_min) * j / (n - 1);
            X.row(j * n + i) << x, y, t;
        }
    return X;
}

/// Mean squared error between an estimate and the true Laplacian over lattice x scored times.
template <typename Estimate>
[[nodiscard]] double laplacian_mse(const PotentialSpec& spec, const BenchmarkConfig& cfg, Estimate&& estimate) {
    double total = 0.0;
    std::size_t count = 0;
    for (int k = 0; k < cfg.steps; k += cfg.time_stride) {
        const double t = k * cfg.eta;
        const Eigen::MatrixXd X = benchmark_lattice(cfg, t);
        const Eigen::VectorXd est = estimate(X);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double e = est[i] - eval_true_laplacian(spec, Eigen::Vector2d(X(i, 0), X(i, 1)), t);
            total += e * e;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// All methods for one (kind, M, seed): simulation and stage one are shared.
inline std::vector<BenchmarkCell> run_benchmark_group(const BenchmarkConfig& cfg, PotentialKind kind, int agents,
                                                      std::uint64_t seed) {
    std::vector<BenchmarkCell> out;
    for (auto m : cfg.methods) out.push_back({kind, agents, seed, m, std::nullopt, {}, 0.0});
    const auto spec = PotentialSpec::defaults(kind);

    std::vector<FieldObservation> obs;
    std::string shared_error;
    double shared_seconds = 0.0;
    const bool needs_data = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                        [](BenchMethod m) { return m != BenchMethod::truth; });
    if (needs_data) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const auto trajs = simulate(spec, cfg.sim(agents, seed));
            auto s1 = cfg.stage_one;
            s1.fit.seed = cfg.stage_one.fit.seed + seed;
            obs = pool_observations(fit_trajectories(trajs, s1), {}, cfg.stage_two.target_kind);
        } catch (const std::exception& e) {
            shared_error = e.what();
        }
        shared_seconds = seconds_since(t0);
    }

    for (auto& cell : out) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            switch (cell.method) {
                case BenchMethod::truth:
                    cell.mse = laplacian_mse(spec, cfg, [&](const Eigen::MatrixXd& X) {
                        Eigen::VectorXd v(X.rows());
                        for (Eigen::Index i = 0; i < X.rows(); ++i)
                            v[i] = eval_true_laplacian(spec, Eigen::Vector2d(X(i, 0), X(i, 1)), X(i, 2));
                        return v;
                    });
                    break;
                case BenchMethod::parametric: {
                    if (!shared_error.empty()) throw std::runtime_error(shared_error);
                    const auto model = fit_parametric(obs);
                    cell.mse = laplacian_mse(spec, cfg, [&](const Eigen::MatrixXd& X) {
                        Eigen::VectorXd v(X.rows());
                        for (Eigen::Index i = 0; i < X.rows(); ++i) v[i] = parametric_laplacian(model, X(i, 0), X(i, 1));
                        return v;
                    });
                    break;
                }
                case BenchMethod::gp_laplace: {
                    if (!shared_error.empty()) throw std::runtime_error(shared_error);
                    auto s2 = cfg.stage_two;
                    s2.fit.seed = cfg.stage_two.fit.seed + seed;
                    const auto fm = build_field(obs, s2);
                    cell.mse = laplacian_mse(spec, cfg, [&](const Eigen::MatrixXd& X) { return eval_divergence_mean(fm, X); });
                    break;
                }
            }
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
        cell.seconds = seconds_since(t0) + (cell.method == BenchMethod::truth ? 0.0 : shared_seconds);
    }
    return out;
}

}  // namespace detail

/// Runs every (kind, M, seed, method) cell. A failing cell records its error and the others
/// continue. Groups run concurrently; cells are stored in configuration order.
[[nodiscard]] inline BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
    cfg.validate();
    struct Key {
        PotentialKind kind;
        int agents;
        std::uint64_t seed;
    };
    std::vector<Key> keys;
    for (auto k : cfg.kinds)
        for (int m : cfg.agent_counts)
            for (auto s : cfg.seeds) keys.push_back({k, m, s});
    std::vector<std::vector<BenchmarkCell>> groups(keys.size());
    parallel_for(keys.size(), [&](std::size_t i) {
        groups[i] = detail::run_benchmark_group(cfg, keys[i].kind, keys[i].agents, keys[i].seed);
    });
    BenchmarkReport r{cfg, {}};
    for (auto& g : groups)
        for (auto& c : g) r.cells.push_back(std::move(c));
    return r;
}

namespace detail {

inline std::string fmt_g(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

}  // namespace detail

/// Report table: one row per kind x method, one column per agent count, cells "mean±std"
/// over seeds. Configuration constants are echoed in leading '#' lines.
inline void write_benchmark_report(std::ostream& os, const BenchmarkReport& r) {
    const auto& c = r.config;
    os << "# gp_laplace benchmark: mean squared error of the inferred Laplacian\n";
    os << "# seeds:";
    for (auto s : c.seeds) os << ' ' << s;
    os << "\n# steps: " << c.steps << "  eta: " << detail::fmt_g(c.eta) << "  start box: [" << detail::fmt_g(c.start_min)
       << ", " << detail::fmt_g(c.start_max) << "]^2\n";
    os << "# lattice: " << c.lattice_n << "x" << c.lattice_n << " over [" << detail::fmt_g(c.lattice_min) << ", "
       << detail::fmt_g(c.lattice_max) << "]^2, every " << c.time_stride << " step(s)\n";
    for (auto k : c.kinds) {
        const auto spec = PotentialSpec::defaults(k);
        os << "# potential " << to_string(k) << ":";
        for (const auto& g : spec.components)
            os << " {alpha=" << detail::fmt_g(g.weight) << " m=(" << detail::fmt_g(g.center[0]) << ","
               << detail::fmt_g(g.center[1]) << ") c=" << detail::fmt_g(g.scale) << " beta=" << detail::fmt_g(g.phase)
               << "}";
        os << '\n';
    }
    os << "# target: " << to_string(c.stage_two.target_kind)
       << "  stage-one variance as noise: " << (c.stage_two.use_stage_one_variance ? "yes" : "no")
       << "  restarts: " << c.stage_one.fit.restarts << "/" << c.stage_two.fit.restarts
       << "  sparse above: " << c.stage_two.fit.sparse_threshold << "  inducing: "
       << (c.stage_two.fit.inducing_count > 0 ? std::to_string(c.stage_two.fit.inducing_count)
                                               : "min(" + std::to_string(c.stage_two.fit.max_inducing) + ", N/2)")
       << '\n';
    os << "kind,method";
    for (int m : c.agent_counts) os << ",M=" << m;
    os << '\n';
    for (auto k : c.kinds)
        for (auto meth : c.methods) {
            os << to_string(k) << ',' << to_string(meth);
            for (int m : c.agent_counts) {
                const auto s = r.summary(k, meth, m);
                os << ',';
                if (s.ok == 0) os << "failed";
                else os << detail::fmt_g(s.mean, 4) << "±" << detail::fmt_g(s.stddev, 4);
                if (s.ok > 0 && s.failed > 0) os << " (" << s.failed << " failed)";
            }
            os << '\n';
        }
}

/// Per-cell results, one row each.
inline void write_benchmark_cells(std::ostream& os, const BenchmarkReport& r) {
    os << "kind,agents,seed,method,mse,seconds,error\n";
    for (const auto& c : r.cells) {
        std::string err = c.error;
        std::replace(err.begin(), err.end(), '"', '\'');
        os << to_string(c.kind) << ',' << c.agents << ',' << c.seed << ',' << to_string(c.method) << ','
           << (c.mse ? detail::fmt_g(*c.mse, 17) : std::string()) << ',' << detail::fmt_g(c.seconds, 4) << ",\"" << err
           << "\"\n";
    }
}

}  // namespace gplaplace
