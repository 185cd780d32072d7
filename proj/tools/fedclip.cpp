// fedclip: run, tune and compare federated clipped-SGD experiments on the
// built-in synthetic objectives. Exit code 0 covers completed and diverged
// runs (divergence is a result); nonzero means the tool itself failed.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedclip/fedclip.hpp"

namespace {

int run_verb(const std::string& config_path, const std::string& output_dir, int threads) {
    fedclip::ExperimentConfig config = fedclip::ExperimentConfig::from_file(config_path);
    std::filesystem::path outdir = output_dir.empty() ? config.output_dir : output_dir;
    if (outdir.empty())
        throw fedclip::ConfigError(config_path + ": no output directory (config 'output_dir' or --output-dir)");
    const auto out = fedclip::run_experiment(config, outdir, threads);
    std::cout << out.summary.dump(2) << "\n";
    return 0;
}

int compare_verb(const std::vector<std::string>& config_paths, const std::string& output_dir,
                 int threads) {
    std::vector<std::filesystem::path> paths(config_paths.begin(), config_paths.end());
    const auto out = fedclip::compare_experiments(paths, output_dir, threads);
    std::cout << "wrote " << out.combined_csv.string() << "\n"
              << "wrote " << out.loss_svg.string() << "\n"
              << "wrote " << out.grad_norm_svg.string() << "\n";
    return 0;
}

int grid_verb(const std::string& config_path, const std::string& output_dir, int threads) {
    const auto gc = fedclip::GridConfig::from_file(config_path);
    std::filesystem::path outdir = output_dir.empty() ? gc.base.output_dir : output_dir;
    if (outdir.empty())
        throw fedclip::ConfigError(config_path + ": no output directory (config 'output_dir' or --output-dir)");
    const auto out = fedclip::run_grid(gc, outdir, threads);
    if (out.result.best) {
        const auto& b = out.result.table[*out.result.best];
        std::printf("best: gamma/eta=%g eta=%g final_loss=%.17g\n", b.clip_ratio, b.eta,
                    b.final_loss);
    } else {
        std::printf("no viable configuration: every grid cell diverged\n");
    }
    std::cout << "wrote " << out.table_csv.string() << "\n";
    return 0;
}

int plot_verb(const std::string& csv_path, const std::string& output_dir) {
    const std::filesystem::path csv(csv_path);
    std::filesystem::path outdir(output_dir);
    if (outdir.empty()) outdir = csv.has_parent_path() ? csv.parent_path() : ".";
    const auto paths = fedclip::emit_plots(csv, outdir);
    std::cout << "wrote " << paths.loss_svg.string() << "\n"
              << "wrote " << paths.grad_norm_svg.string() << "\n";
    return 0;
}

int check_hetero_verb(const std::string& config_path) {
    const auto hc = fedclip::HeterogeneityConfig::from_file(config_path);
    std::cout << fedclip::run_heterogeneity_check(hc).dump(2) << "\n";
    return 0;
}

int hyperparams_verb(const std::string& config_path) {
    std::cout << fedclip::resolve_hyperparams_only(config_path).dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated clipped-optimization simulation engine"};
    app.require_subcommand(1);

    int threads = 0; // 0 = FEDCLIP_THREADS or hardware concurrency
    app.add_option("--threads", threads, "worker thread cap (overrides FEDCLIP_THREADS)");

    std::string config_path, output_dir, csv_path;
    std::vector<std::string> config_paths;

    auto* run = app.add_subcommand("run", "run one experiment config");
    run->add_option("config", config_path, "experiment config JSON")->required();
    run->add_option("--output-dir", output_dir, "override the config's output_dir");

    auto* compare = app.add_subcommand("compare", "run several configs and merge the results");
    compare->add_option("configs", config_paths, "experiment configs (same objective family)")
        ->required()
        ->expected(-1);
    compare->add_option("--output-dir", output_dir, "directory for combined.csv and charts")
        ->required();

    auto* grid = app.add_subcommand("grid", "hyperparameter grid search");
    grid->add_option("config", config_path, "grid config JSON")->required();
    grid->add_option("--output-dir", output_dir, "override the config's output_dir");

    auto* plot = app.add_subcommand("plot", "render SVG charts from a trajectory CSV");
    plot->add_option("csv", csv_path, "trajectory.csv or combined.csv")->required();
    plot->add_option("--output-dir", output_dir, "directory for the SVG files");

    auto* hetero = app.add_subcommand("check-hetero", "scan the client-gradient bound on a grid");
    hetero->add_option("config", config_path, "heterogeneity-check config JSON")->required();

    auto* hyper = app.add_subcommand("hyperparams", "print the resolved step-size/clipping "
                                                    "parameters without running");
    hyper->add_option("config", config_path, "experiment config JSON in theorem mode")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_verb(config_path, output_dir, threads);
        if (compare->parsed()) return compare_verb(config_paths, output_dir, threads);
        if (grid->parsed()) return grid_verb(config_path, output_dir, threads);
        if (plot->parsed()) return plot_verb(csv_path, output_dir);
        if (hetero->parsed()) return check_hetero_verb(config_path);
        if (hyper->parsed()) return hyperparams_verb(config_path);
    } catch (const fedclip::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const fedclip::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
