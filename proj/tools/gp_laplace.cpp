#include <CLI11.hpp>

#include <iostream>

#include "gplaplace/cli.hpp"
#include "gplaplace/runtime.hpp"

namespace {

template <typename T>
void put(nlohmann::json& j, const std::string& key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

}  // namespace

int main(int argc, char** argv) {
    gplaplace::tune_allocator();

    CLI::App app{"gp_laplace: infer sources and sinks of a potential field from agent trajectories"};
    app.set_version_flag("--version", std::string(GPLAPLACE_VERSION));
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> output, input, model, target, kl_variant;
    std::optional<int> restarts, nx, ny, n_times, agents, steps, inducing;
    std::optional<std::uint64_t> seed;
    std::optional<double> eta;
    std::optional<std::string> kind;
    std::vector<int> agent_counts;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> kinds, methods;
    bool ignore_stage_one_variance = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON configuration file (flags override its values)");
        sub->add_option("-o,--output", output, "Output directory");
        sub->add_option("--seed", seed, "Random seed");
    };
    auto fitting = [&](CLI::App* sub) {
        sub->add_option("--restarts", restarts, "Optimiser starts per GP");
        sub->add_option("--inducing", inducing, "Inducing points when sparse (0: min(500, N/2))");
    };
    auto gridding = [&](CLI::App* sub) {
        sub->add_option("--nx", nx, "Grid nodes along x");
        sub->add_option("--ny", ny, "Grid nodes along y");
        sub->add_option("--n-times", n_times, "Evaluation times");
        sub->add_option("--kl-variant", kl_variant, "paper | standard")->check(CLI::IsMember({"paper", "standard"}));
    };

    auto* sim = app.add_subcommand("simulate", "Simulate agents in a Gaussian-mixture potential");
    common(sim);
    sim->add_option("--kind", kind, "stationary | varying_strength | rotating");
    sim->add_option("--agents", agents, "Number of agents");
    sim->add_option("--steps", steps, "Steps per agent");
    sim->add_option("--eta", eta, "Step increment");

    auto* bench = app.add_subcommand("benchmark", "Laplacian MSE of GP-LAPLACE and the cubic baseline");
    common(bench);
    bench->add_option("--kinds", kinds, "Potential kinds");
    bench->add_option("--agent-counts", agent_counts, "Agent counts (columns of the report)");
    bench->add_option("--seeds", seeds, "Seeds");
    bench->add_option("--methods", methods, "gp_laplace | parametric | truth");
    bench->add_option("--restarts", restarts, "Optimiser starts per GP");
    bench->add_option("--inducing", inducing, "Inducing points for sparse stage two");

    auto* inf = app.add_subcommand("infer", "Fit both stages to trajectories and export grids");
    common(inf);
    fitting(inf);
    gridding(inf);
    inf->add_option("-i,--input", input, "Trajectory CSV (Movebank or agent_id,t,x,y)");
    inf->add_option("--target", target, "auto | acceleration | velocity")
        ->check(CLI::IsMember({"auto", "acceleration", "velocity"}));
    inf->add_flag("--ignore-stage-one-variance", ignore_stage_one_variance,
                  "Do not add stage-one derivative variances to the field noise");

    auto* grd = app.add_subcommand("grid", "Re-evaluate a saved field model on a new grid");
    common(grd);
    gridding(grd);
    grd->add_option("-m,--model", model, "model.json written by infer");

    CLI11_PARSE(app, argc, argv);
    auto* sub = app.get_subcommands().front();

    nlohmann::json o = nlohmann::json::object();
    o["mode"] = sub->get_name();
    put(o, "output_dir", output);
    put(o, "input", input);
    put(o, "model", model);
    put(o, "target", target);
    put(o, "kl_variant", kl_variant);
    put(o, "seed", seed);
    put(o, "restarts", restarts);
    if (ignore_stage_one_variance) o["use_stage_one_variance"] = false;
    if (sub == inf && inducing) o["sparse"]["inducing_count"] = *inducing;
    if (nx) o["grid"]["nx"] = *nx;
    if (ny) o["grid"]["ny"] = *ny;
    if (n_times) o["grid"]["n_times"] = *n_times;
    if (kind) o["potential"]["kind"] = *kind;
    if (agents) o["simulation"]["agents"] = *agents;
    if (steps) o["simulation"]["steps"] = *steps;
    if (eta) o["simulation"]["eta"] = *eta;
    if (sub == sim && seed) o["simulation"]["seed"] = *seed;
    if (!kinds.empty()) o["benchmark"]["kinds"] = kinds;
    if (!agent_counts.empty()) o["benchmark"]["agent_counts"] = agent_counts;
    if (!seeds.empty()) o["benchmark"]["seeds"] = seeds;
    if (!methods.empty()) o["benchmark"]["methods"] = methods;
    if (sub == bench && restarts) {
        o["benchmark"]["restarts"] = *restarts;
        o.erase("restarts");
    }
    if (sub == bench && inducing) o["benchmark"]["inducing_count"] = *inducing;

    try {
        const auto cfg = gplaplace::load_run_config(config_path, o);
        return gplaplace::run(cfg, std::cerr);
    } catch (const gplaplace::ConfigError& e) {
        std::cerr << "gp_laplace: " << e.what() << '\n';
        return 2;
    } catch (const gplaplace::FormatError& e) {
        std::cerr << "gp_laplace: format error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "gp_laplace: error: " << e.what() << '\n';
        return 1;
    }
}
