#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gplaplace/benchmark.hpp"
#include "gplaplace/errors.hpp"
#include "gplaplace/field.hpp"
#include "gplaplace/io.hpp"
#include "gplaplace/synthetic.hpp"
#include "gplaplace/trajectory.hpp"

namespace gplaplace {

/// Every violated configuration key, reported together.
class ConfigError : public InvalidArgument {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : InvalidArgument(join(problems)), problems_(std::move(problems)) {}
    [[nodiscard]] const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p) {
        std::string s = "invalid configuration:";
        for (const auto& x : p) s += "\n  " + x;
        return s;
    }
    std::vector<std::string> problems_;
};

enum class RunMode { simulate, benchmark, infer, grid };

/// Grid layout; unset bounds come from the data's bounding box padded by `pad`, unset times
/// from `n_times` evenly spaced over the observed time span.
struct GridConfig {
    int nx = 50, ny = 50, n_times = 9;
    double pad = 0.1;
    std::optional<double> x_min, x_max, y_min, y_max;
    std::vector<double> times;
};

struct RunConfig {
    RunMode mode = RunMode::infer;
    std::string output_dir;

    // infer / grid
    std::string input;  // trajectory CSV (infer)
    std::string model;  // saved field model (grid)
    std::string target = "auto";  // auto | acceleration | velocity
    KLConfig kl;
    bool use_stage_one_variance = true;
    std::uint64_t seed = 0;
    int restarts = 5;
    std::size_t sparse_threshold = 1000;
    int max_inducing = 500;
    int inducing_count = 0;
    GridConfig grid;

    // simulate
    PotentialSpec potential = PotentialSpec::defaults(PotentialKind::stationary);
    SimConfig simulation;

    // benchmark
    BenchmarkConfig benchmark;
};

[[nodiscard]] inline const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::simulate: return "simulate";
        case RunMode::benchmark: return "benchmark";
        case RunMode::infer: return "infer";
        case RunMode::grid: return "grid";
    }
    return "?";
}

namespace detail {

/// Collects problems while reading a JSON configuration object.
class ConfigReader {
public:
    std::vector<std::string> problems;

    template <typename T>
    void get(const nlohmann::json& obj, const std::string& key, const std::string& path, T& out) {
        if (!obj.contains(key)) return;
        try {
            out = obj.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            problems.push_back(path + ": wrong type (" + std::string(obj.at(key).type_name()) + ")");
        }
    }

    void known_keys(const nlohmann::json& obj, const std::string& prefix, std::initializer_list<const char*> keys) {
        if (!obj.is_object()) {
            problems.push_back((prefix.empty() ? std::string("configuration") : prefix) + ": must be an object");
            return;
        }
        for (const auto& [k, v] : obj.items()) {
            bool ok = false;
            for (const char* key : keys) ok = ok || k == key;
            if (!ok) problems.push_back((prefix.empty() ? "" : prefix + ".") + k + ": unknown key");
        }
    }

    void require(bool cond, const std::string& msg) {
        if (!cond) problems.push_back(msg);
    }
};

inline std::optional<PotentialKind> kind_or_problem(const std::string& s, const std::string& key, ConfigReader& r) {
    try {
        return potential_kind_from_string(s);
    } catch (const InvalidArgument&) {
        r.problems.push_back(key + ": unknown potential kind '" + s + "' (stationary | varying_strength | rotating)");
        return std::nullopt;
    }
}

}  // namespace detail

/// Builds a RunConfig from a JSON document (the merged configuration file and flag overrides),
/// checking types, ranges and mode-specific requirements. Throws ConfigError listing every
/// problem; nothing is computed or written before this succeeds.
[[nodiscard]] inline RunConfig parse_run_config(const nlohmann::json& j) {
    detail::ConfigReader r;
    RunConfig c;
    r.known_keys(j, "", {"mode", "output_dir", "input", "model", "target", "kl_variant", "kl_sign_at_zero",
                         "use_stage_one_variance", "seed", "restarts", "sparse", "grid", "potential", "simulation",
                         "benchmark"});
    if (!j.is_object()) throw ConfigError(r.problems);

    std::string mode;
    r.get(j, "mode", "mode", mode);
    if (mode == "simulate") c.mode = RunMode::simulate;
    else if (mode == "benchmark") c.mode = RunMode::benchmark;
    else if (mode == "infer") c.mode = RunMode::infer;
    else if (mode == "grid") c.mode = RunMode::grid;
    else r.problems.push_back("mode: " + (mode.empty() ? std::string("missing") : "unknown value '" + mode + "'") +
                              " (simulate | benchmark | infer | grid)");

    r.get(j, "output_dir", "output_dir", c.output_dir);
    r.require(!c.output_dir.empty(), "output_dir: required");
    r.get(j, "input", "input", c.input);
    r.get(j, "model", "model", c.model);
    r.get(j, "target", "target", c.target);
    r.require(c.target == "auto" || c.target == "acceleration" || c.target == "velocity",
              "target: must be auto, acceleration or velocity");
    std::string variant = "paper";
    r.get(j, "kl_variant", "kl_variant", variant);
    if (variant == "paper") c.kl.variant = KLVariant::paper;
    else if (variant == "standard") c.kl.variant = KLVariant::standard;
    else r.problems.push_back("kl_variant: must be paper or standard");
    r.get(j, "kl_sign_at_zero", "kl_sign_at_zero", c.kl.sign_at_zero);
    r.get(j, "use_stage_one_variance", "use_stage_one_variance", c.use_stage_one_variance);
    r.get(j, "seed", "seed", c.seed);
    r.get(j, "restarts", "restarts", c.restarts);
    r.require(c.restarts >= 1, "restarts: must be >= 1");

    if (j.contains("sparse")) {
        const auto& s = j["sparse"];
        r.known_keys(s, "sparse", {"threshold", "max_inducing", "inducing_count"});
        if (s.is_object()) {
            r.get(s, "threshold", "sparse.threshold", c.sparse_threshold);
            r.get(s, "max_inducing", "sparse.max_inducing", c.max_inducing);
            r.get(s, "inducing_count", "sparse.inducing_count", c.inducing_count);
        }
        r.require(c.max_inducing >= 1, "sparse.max_inducing: must be >= 1");
        r.require(c.inducing_count >= 0, "sparse.inducing_count: must be >= 0");
    }

    if (j.contains("grid")) {
        const auto& g = j["grid"];
        r.known_keys(g, "grid", {"nx", "ny", "n_times", "pad", "x_min", "x_max", "y_min", "y_max", "times"});
        if (g.is_object()) {
            r.get(g, "nx", "grid.nx", c.grid.nx);
            r.get(g, "ny", "grid.ny", c.grid.ny);
            r.get(g, "n_times", "grid.n_times", c.grid.n_times);
            r.get(g, "pad", "grid.pad", c.grid.pad);
            for (auto [key, slot] : {std::pair{"x_min", &c.grid.x_min}, std::pair{"x_max", &c.grid.x_max},
                                     std::pair{"y_min", &c.grid.y_min}, std::pair{"y_max", &c.grid.y_max}}) {
                double v = 0.0;
                if (g.contains(key)) {
                    const auto before = r.problems.size();
                    r.get(g, key, std::string("grid.") + key, v);
                    if (r.problems.size() == before) *slot = v;
                }
            }
            r.get(g, "times", "grid.times", c.grid.times);
        }
        r.require(c.grid.nx >= 2, "grid.nx: must be >= 2");
        r.require(c.grid.ny >= 2, "grid.ny: must be >= 2");
        r.require(c.grid.n_times >= 1, "grid.n_times: must be >= 1");
        r.require(c.grid.pad >= 0.0, "grid.pad: must be >= 0");
        r.require(c.grid.x_min.has_value() == c.grid.x_max.has_value(), "grid.x_min/x_max: give both or neither");
        r.require(c.grid.y_min.has_value() == c.grid.y_max.has_value(), "grid.y_min/y_max: give both or neither");
        if (c.grid.x_min && c.grid.x_max) r.require(*c.grid.x_max > *c.grid.x_min, "grid.x_max: must exceed x_min");
        if (c.grid.y_min && c.grid.y_max) r.require(*c.grid.y_max > *c.grid.y_min, "grid.y_max: must exceed y_min");
    }

    if (j.contains("potential")) {
        const auto& p = j["potential"];
        r.known_keys(p, "potential", {"kind", "components"});
        if (p.is_object()) {
            std::string kind = "stationary";
            r.get(p, "kind", "potential.kind", kind);
            if (auto k = detail::kind_or_problem(kind, "potential.kind", r)) c.potential = PotentialSpec::defaults(*k);
            if (p.contains("components")) {
                c.potential.components.clear();
                const auto& comps = p["components"];
                if (!comps.is_array() || comps.empty()) r.problems.push_back("potential.components: non-empty array required");
                else
                    for (std::size_t i = 0; i < comps.size(); ++i) {
                        const std::string key = "potential.components[" + std::to_string(i) + "]";
                        r.known_keys(comps[i], key, {"weight", "center", "scale", "phase"});
                        GaussianComponent g;
                        std::vector<double> center{0.0, 0.0};
                        if (comps[i].is_object()) {
                            r.get(comps[i], "weight", key + ".weight", g.weight);
                            r.get(comps[i], "center", key + ".center", center);
                            r.get(comps[i], "scale", key + ".scale", g.scale);
                            r.get(comps[i], "phase", key + ".phase", g.phase);
                        }
                        if (center.size() != 2) r.problems.push_back(key + ".center: two numbers required");
                        else g.center = Eigen::Vector2d(center[0], center[1]);
                        c.potential.components.push_back(g);
                    }
            }
            try {
                if (!c.potential.components.empty()) c.potential.validate();
            } catch (const InvalidArgument& e) {
                r.problems.push_back(std::string("potential: ") + e.what());
            }
        }
    }

    if (j.contains("simulation")) {
        const auto& s = j["simulation"];
        r.known_keys(s, "simulation", {"agents", "steps", "eta", "start_min", "start_max", "seed"});
        if (s.is_object()) {
            r.get(s, "agents", "simulation.agents", c.simulation.agents);
            r.get(s, "steps", "simulation.steps", c.simulation.steps);
            r.get(s, "eta", "simulation.eta", c.simulation.eta);
            r.get(s, "start_min", "simulation.start_min", c.simulation.start_min);
            r.get(s, "start_max", "simulation.start_max", c.simulation.start_max);
            r.get(s, "seed", "simulation.seed", c.simulation.seed);
        }
    }
    r.require(c.simulation.agents >= 1, "simulation.agents: must be >= 1");
    r.require(c.simulation.steps >= 3, "simulation.steps: must be >= 3");
    r.require(c.simulation.eta > 0.0, "simulation.eta: must be positive");
    r.require(c.simulation.start_max > c.simulation.start_min, "simulation.start_max: must exceed start_min");

    if (j.contains("benchmark")) {
        const auto& b = j["benchmark"];
        auto& bc = c.benchmark;
        r.known_keys(b, "benchmark", {"kinds", "agent_counts", "seeds", "methods", "steps", "eta", "lattice_n",
                                      "lattice_min", "lattice_max", "time_stride", "inducing_count", "restarts"});
        if (b.is_object()) {
            std::vector<std::string> kinds, methods;
            r.get(b, "kinds", "benchmark.kinds", kinds);
            if (b.contains("kinds")) {
                bc.kinds.clear();
                for (const auto& k : kinds)
                    if (auto v = detail::kind_or_problem(k, "benchmark.kinds", r)) bc.kinds.push_back(*v);
            }
            r.get(b, "methods", "benchmark.methods", methods);
            if (b.contains("methods")) {
                bc.methods.clear();
                for (const auto& m : methods) {
                    try {
                        bc.methods.push_back(bench_method_from_string(m));
                    } catch (const InvalidArgument&) {
                        r.problems.push_back("benchmark.methods: unknown method '" + m + "'");
                    }
                }
            }
            r.get(b, "agent_counts", "benchmark.agent_counts", bc.agent_counts);
            r.get(b, "seeds", "benchmark.seeds", bc.seeds);
            r.get(b, "steps", "benchmark.steps", bc.steps);
            r.get(b, "eta", "benchmark.eta", bc.eta);
            r.get(b, "lattice_n", "benchmark.lattice_n", bc.lattice_n);
            r.get(b, "lattice_min", "benchmark.lattice_min", bc.lattice_min);
            r.get(b, "lattice_max", "benchmark.lattice_max", bc.lattice_max);
            r.get(b, "time_stride", "benchmark.time_stride", bc.time_stride);
            r.get(b, "inducing_count", "benchmark.inducing_count", bc.stage_two.fit.inducing_count);
            int restarts = bc.stage_two.fit.restarts;
            r.get(b, "restarts", "benchmark.restarts", restarts);
            bc.stage_one.fit.restarts = bc.stage_two.fit.restarts = restarts;
            r.require(restarts >= 1, "benchmark.restarts: must be >= 1");
        }
        try {
            bc.validate();
        } catch (const InvalidArgument& e) {
            r.problems.push_back(std::string("benchmark: ") + e.what());
        }
    }

    if (c.mode == RunMode::infer) {
        r.require(!c.input.empty(), "input: required for mode infer");
        if (!c.input.empty() && !std::filesystem::is_regular_file(c.input))
            r.problems.push_back("input: file '" + c.input + "' not found");
    }
    if (c.mode == RunMode::grid) {
        r.require(!c.model.empty(), "model: required for mode grid");
        if (!c.model.empty() && !std::filesystem::is_regular_file(c.model))
            r.problems.push_back("model: file '" + c.model + "' not found");
    }
    if (!r.problems.empty()) throw ConfigError(r.problems);
    return c;
}

/// Reads the configuration file (if any), applies overrides on top (overrides win, objects merge
/// key by key) and parses the result.
[[nodiscard]] inline RunConfig load_run_config(const std::string& path, const nlohmann::json& overrides = {}) {
    nlohmann::json j = nlohmann::json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError({"config: cannot open '" + path + "'"});
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError({"config: '" + path + "' is not valid JSON (" + e.what() + ")"});
        }
        if (!j.is_object()) throw ConfigError({"config: top level of '" + path + "' must be an object"});
    }
    if (!overrides.is_null()) j.merge_patch(overrides);
    return parse_run_config(j);
}

namespace detail {

inline FitOptions fit_options(const RunConfig& c) {
    FitOptions f;
    f.seed = c.seed;
    f.restarts = c.restarts;
    f.sparse_threshold = c.sparse_threshold;
    f.max_inducing = c.max_inducing;
    f.inducing_count = c.inducing_count;
    return f;
}

/// Grid over the training inputs of a field model (columns x, y, t).
inline GridSpec resolve_grid(const GridConfig& gc, const Eigen::MatrixXd& X) {
    const double x0 = X.col(0).minCoeff(), x1 = X.col(0).maxCoeff();
    const double y0 = X.col(1).minCoeff(), y1 = X.col(1).maxCoeff();
    const double t0 = X.col(2).minCoeff(), t1 = X.col(2).maxCoeff();
    const double px = std::max(gc.pad * (x1 - x0), 1e-6), py = std::max(gc.pad * (y1 - y0), 1e-6);
    GridSpec g{gc.x_min.value_or(x0 - px), gc.x_max.value_or(x1 + px), gc.nx,
               gc.y_min.value_or(y0 - py), gc.y_max.value_or(y1 + py), gc.ny, gc.times};
    if (g.times.empty())
        for (int k = 0; k < gc.n_times; ++k)
            g.times.push_back(gc.n_times == 1 ? t0 : t0 + (t1 - t0) * k / (gc.n_times - 1));
    g.validate();
    return g;
}

inline int run_simulate(const RunConfig& c, std::ostream& log) {
    const auto trajs = simulate(c.potential, c.simulation);
    ensure_dir(c.output_dir);
    const auto path = (std::filesystem::path(c.output_dir) / "trajectories.csv").string();
    write_planar_csv(path, trajs);
    log << "simulated " << trajs.size() << " agent(s) x " << c.simulation.steps << " steps -> " << path << '\n';
    return 0;
}

inline int run_benchmark_mode(const RunConfig& c, std::ostream& log) {
    const auto report = run_benchmark(c.benchmark);
    std::ostringstream table, cells;
    write_benchmark_report(table, report);
    write_benchmark_cells(cells, report);
    ensure_dir(c.output_dir);
    const std::filesystem::path root(c.output_dir);
    write_text(root / "report.csv", table.str());
    write_text(root / "cells.csv", cells.str());
    log << table.str();
    int failed = 0;
    for (const auto& cell : report.cells)
        if (!cell.mse) {
            ++failed;
            log << "cell failed: " << to_string(cell.kind) << " M=" << cell.agents << " seed=" << cell.seed << ' '
                << to_string(cell.method) << ": " << cell.error << '\n';
        }
    return failed == 0 ? 0 : 3;
}

inline int export_model_grid(const RunConfig& c, const FieldModel& fm, const ExportContext& ctx, std::ostream& log) {
    const auto grid = resolve_grid(c.grid, fm.model_vx.training_inputs());
    const auto result = eval_grid(fm, grid, c.kl);
    const auto files = export_grid(result, fm, c.output_dir, ctx);
    log << "wrote " << files.size() - 1 << " grid file(s) and manifest.json to " << c.output_dir << '\n';
    return 0;
}

inline int run_infer(const RunConfig& c, std::ostream& log) {
    const auto set = load_any_trajectories(c.input);
    for (const auto& w : set.warnings) log << "warning: " << w.message << '\n';
    if (set.trajectories.empty()) throw InvalidArgument(c.input + ": no usable trajectories (each agent needs >= 3 points)");
    TargetKind target = set.projection ? TargetKind::velocity : TargetKind::acceleration;
    if (c.target == "acceleration") target = TargetKind::acceleration;
    if (c.target == "velocity") target = TargetKind::velocity;

    TrajectoryOptions s1;
    s1.fit = fit_options(c);
    const auto posteriors = fit_trajectories(set.trajectories, s1);
    const auto obs = pool_observations(posteriors, {}, target);
    FieldOptions s2;
    s2.fit = fit_options(c);
    s2.use_stage_one_variance = c.use_stage_one_variance;
    s2.target_kind = target;
    const auto fm = build_field(obs, s2);

    ensure_dir(c.output_dir);
    const std::filesystem::path root(c.output_dir);
    write_planar_csv((root / "trajectories.csv").string(), set.trajectories);
    save_field_model((root / "model.json").string(), fm);
    log << "fitted " << set.trajectories.size() << " trajector" << (set.trajectories.size() == 1 ? "y" : "ies") << ", "
        << obs.size() << " " << to_string(target) << " observations ("
        << (fm.model_vx.mode() == GPMode::exact ? "exact" : "sparse") << " field model)\n";
    return export_model_grid(c, fm, {set.projection, c.input}, log);
}

inline int run_grid(const RunConfig& c, std::ostream& log) {
    const auto fm = load_field_model(c.model);
    ensure_dir(c.output_dir);
    return export_model_grid(c, fm, {std::nullopt, c.model}, log);
}

}  // namespace detail

/// Executes one run. Returns the process exit status; errors propagate as exceptions.
inline int run(const RunConfig& c, std::ostream& log) {
    switch (c.mode) {
        case RunMode::simulate: return detail::run_simulate(c, log);
        case RunMode::benchmark: return detail::run_benchmark_mode(c, log);
        case RunMode::infer: return detail::run_infer(c, log);
        case RunMode::grid: return detail::run_grid(c, log);
    }
    return 2;
}

}  // namespace gplaplace
