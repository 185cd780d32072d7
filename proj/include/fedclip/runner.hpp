#pragma once

#include <chrono>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "fedclip/config.hpp"
#include "fedclip/csv.hpp"
#include "fedclip/grid_search.hpp"
#include "fedclip/monitor.hpp"
#include "fedclip/svg.hpp"

namespace fedclip {

namespace fs = std::filesystem;

struct ExperimentOutputs {
    fs::path trajectory_csv;
    fs::path summary_json;
    RunStatus status = RunStatus::kCompleted;
    RunResult result;
    json summary;
};

namespace detail {

inline std::string trace_round_csv(const RoundTrace& trace) {
    std::string out = "client,iteration";
    const std::size_t dim = trace.xbar_start.dim();
    for (std::size_t j = 0; j < dim; ++j) out += ",x" + std::to_string(j);
    out += "\n";
    for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
        for (std::size_t t = 0; t < trace.iterates[i].size(); ++t) {
            out += std::to_string(i) + "," + std::to_string(t);
            for (std::size_t j = 0; j < dim; ++j)
                out += "," + format_g17(trace.iterates[i][t][j]);
            out += "\n";
        }
    }
    return out;
}

} // namespace detail

/// Runs one experiment and writes trajectory.csv, summary.json and (when
/// monitoring) trace/round_*.csv under the output directory. Divergence is a
/// recorded result, not a failure.
inline ExperimentOutputs run_experiment(const ExperimentConfig& config,
                                        const fs::path& output_dir,
                                        int threads = 0) {
    ResolvedExperiment exp = resolve_experiment(config); // validate before touching the disk
    if (output_dir.empty()) throw ConfigError("run_experiment: output directory required");
    fs::create_directories(output_dir);
    const fs::path trace_dir = output_dir / "trace";
    if (config.monitor) fs::create_directories(trace_dir);

    RunOptions opt;
    opt.threads = threads;
    opt.monitor = config.monitor;
    opt.constants = exp.constants;
    opt.timing = config.timing;
    if (config.monitor) {
        opt.trace_sink = [&](const RoundTrace& trace) {
            char name[32];
            std::snprintf(name, sizeof name, "round_%06lld.csv", static_cast<long long>(trace.round));
            write_text_file((trace_dir / name).string(), detail::trace_round_csv(trace));
        };
    }

    const auto t0 = std::chrono::steady_clock::now();
    RunResult run = run_training(config.algorithm, exp.objectives, config.noise, exp.hp, exp.x0,
                                 config.seed, opt);
    const double total_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    const std::string csv = trajectory_to_csv(run.trajectory, config.timing);

    json summary;
    summary["status"] = to_string(run.trajectory.status);
    if (run.trajectory.status == RunStatus::kDiverged)
        summary["diverged_round"] = run.trajectory.diverged_round;
    summary["rounds_executed"] = static_cast<long long>(run.trajectory.rows.size()) - 1;
    summary["final_loss"] = run.trajectory.rows.back().loss;
    summary["final_grad_norm"] = run.trajectory.rows.back().grad_norm;
    summary["stationarity_metric"] = stationarity_metric(run.trajectory);
    summary["clipped_rounds"] = run.clipped_rounds;
    summary["violations"] = static_cast<long long>(run.violations.size());
    summary["premise_checked"] = run.premise_checked;
    summary["premise_holds"] = run.premise_holds;
    summary["trajectory_fnv64"] = fnv1a64_hex(csv);
    summary["elapsed_ms_total"] = total_ms;

    json resolved;
    resolved["algorithm"] = to_string(config.algorithm);
    resolved["eta"] = exp.hp.eta;
    resolved["gamma"] = exp.hp.gamma;
    resolved["clip_threshold"] = exp.hp.clip_threshold();
    resolved["interval"] = exp.hp.interval;
    resolved["rounds"] = exp.hp.rounds;
    resolved["clients"] = exp.hp.n_clients;
    resolved["seed"] = config.seed;
    if (config.algorithm == Algorithm::kScaffold || config.algorithm == Algorithm::kScaffoldClipped)
        resolved["scaffold_variant"] = "option_ii";
    if (exp.theorem) {
        json t;
        t["min_rounds"] = exp.theorem->min_rounds;
        t["Gamma"] = exp.theorem->Gamma;
        t["A"] = exp.theorem->A;
        t["B"] = exp.theorem->B;
        t["variant"] = to_string(config.theorem_variant);
        resolved["theorem"] = t;
    }
    summary["resolved"] = resolved;
    summary["resolved_config"] = exp.config.to_json();

    ExperimentOutputs out;
    out.trajectory_csv = output_dir / "trajectory.csv";
    out.summary_json = output_dir / "summary.json";
    out.status = run.trajectory.status;
    out.summary = summary;
    write_text_file(out.trajectory_csv.string(), csv);
    write_text_file(out.summary_json.string(), summary.dump(2) + "\n");
    out.result = std::move(run);
    return out;
}

inline ExperimentOutputs run_experiment(const fs::path& config_path, int threads = 0) {
    const ExperimentConfig config = ExperimentConfig::from_file(config_path);
    if (config.output_dir.empty())
        throw ConfigError(config_path.string() + ": 'output_dir' is required for run");
    return run_experiment(config, config.output_dir, threads);
}

struct CompareOutputs {
    fs::path combined_csv;
    fs::path loss_svg;
    fs::path grad_norm_svg;
    std::vector<std::string> labels;
};

/// Runs several configs over the same objective family and merges the results
/// into one CSV keyed by (label, algorithm, round) plus loss / gradient-norm
/// charts. Labels come from the config file stems.
inline CompareOutputs compare_experiments(const std::vector<fs::path>& config_paths,
                                          const fs::path& output_dir,
                                          int threads = 0) {
    if (config_paths.empty()) throw ConfigError("compare: need at least one config");
    std::vector<ExperimentConfig> configs;
    configs.reserve(config_paths.size());
    for (const auto& p : config_paths) configs.push_back(ExperimentConfig::from_file(p));

    const json family = configs.front().objective.to_json();
    for (std::size_t i = 1; i < configs.size(); ++i) {
        if (configs[i].objective.to_json() != family)
            throw ConfigError("compare: configs use different objective families (" +
                              config_paths[i].string() + ")");
    }

    CompareOutputs out;
    std::set<std::string> used;
    for (std::size_t i = 0; i < config_paths.size(); ++i) {
        std::string label = config_paths[i].stem().string();
        while (used.count(label)) label += "+";
        used.insert(label);
        out.labels.push_back(label);
    }

    std::vector<RunResult> runs(configs.size());
    parallel_for(configs.size(), resolve_threads(threads), [&](std::size_t i) {
        ResolvedExperiment exp = resolve_experiment(configs[i]);
        RunOptions opt;
        opt.threads = 1;
        runs[i] = run_training(configs[i].algorithm, exp.objectives, configs[i].noise, exp.hp,
                               exp.x0, configs[i].seed, opt);
    });

    std::string csv = "label,algorithm,";
    csv += kTrajectoryHeader;
    csv += "\n";
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const std::string prefix = out.labels[i] + "," + to_string(configs[i].algorithm) + ",";
        for (const auto& row : runs[i].trajectory.rows) {
            csv += prefix + std::to_string(row.round) + "," + format_g17(row.loss) + "," +
                   format_g17(row.grad_norm) + "," + (row.clipped ? "1" : "0") + "," +
                   format_g17(row.max_discrepancy) + ",0.000\n";
        }
    }

    fs::create_directories(output_dir);
    out.combined_csv = output_dir / "combined.csv";
    write_text_file(out.combined_csv.string(), csv);
    const PlotPaths plots = emit_plots(out.combined_csv, output_dir);
    out.loss_svg = plots.loss_svg;
    out.grad_norm_svg = plots.grad_norm_svg;
    return out;
}

/// Grid-search config: like an experiment config but with a "grid" block of
/// gamma/eta ratios and eta values instead of explicit hyperparameters.
struct GridConfig {
    ExperimentConfig base;
    GridSpec grid;

    static GridConfig from_file(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config: " + path.string());
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("grid"))
            throw ConfigError(path.string() + ": missing 'grid' block");
        const json grid_block = j.at("grid");
        cfg::check_keys(grid_block, "grid", {"gamma_over_eta", "eta"});
        GridConfig gc;
        for (const auto& v : cfg::require(grid_block, "grid", "gamma_over_eta"))
            gc.grid.clip_ratios.push_back(cfg::number(v, "grid.gamma_over_eta"));
        for (const auto& v : cfg::require(grid_block, "grid", "eta"))
            gc.grid.etas.push_back(cfg::number(v, "grid.eta"));
        gc.grid.validate();

        json base = j;
        base.erase("grid");
        // placeholder hyperparameters; each cell overrides them
        base["eta"] = 1.0;
        base["gamma"] = 1.0;
        try {
            gc.base = ExperimentConfig::from_json(base);
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        return gc;
    }
};

struct GridOutputs {
    fs::path table_csv;
    fs::path best_json;
    fs::path best_trajectory_csv; // empty when nothing converged
    GridSearchResult result;
};

inline GridOutputs run_grid(const GridConfig& gc, const fs::path& output_dir, int threads = 0) {
    ResolvedExperiment exp = resolve_experiment(gc.base);
    HyperParams base_hp = exp.hp;
    GridSearchResult result = grid_search(gc.base.algorithm, exp.objectives, gc.base.noise,
                                          base_hp, exp.x0, gc.grid, gc.base.seed, threads);

    std::string csv = "gamma_over_eta,eta,gamma,status,final_loss,stationarity,rounds_executed\n";
    json table = json::array();
    for (const auto& cell : result.table) {
        csv += format_g17(cell.clip_ratio) + "," + format_g17(cell.eta) + "," +
               format_g17(cell.gamma) + "," + to_string(cell.status) + "," +
               format_g17(cell.final_loss) + "," + format_g17(cell.stationarity) + "," +
               std::to_string(cell.rounds_executed) + "\n";
        json row;
        row["gamma_over_eta"] = cell.clip_ratio;
        row["eta"] = cell.eta;
        row["gamma"] = cell.gamma;
        row["status"] = to_string(cell.status);
        row["final_loss"] = cell.final_loss;
        row["stationarity"] = cell.stationarity;
        row["rounds_executed"] = cell.rounds_executed;
        table.push_back(row);
    }

    json best;
    if (result.best) {
        const GridCellResult& b = result.table[*result.best];
        best["viable"] = true;
        best["gamma_over_eta"] = b.clip_ratio;
        best["eta"] = b.eta;
        best["gamma"] = b.gamma;
        best["final_loss"] = b.final_loss;
        best["stationarity"] = b.stationarity;
    } else {
        best["viable"] = false;
        best["reason"] = "no viable configuration: every grid cell diverged";
    }

    fs::create_directories(output_dir);
    GridOutputs out;
    out.table_csv = output_dir / "grid_results.csv";
    out.best_json = output_dir / "best.json";
    write_text_file(out.table_csv.string(), csv);
    write_text_file((output_dir / "grid_results.json").string(), table.dump(2) + "\n");
    write_text_file(out.best_json.string(), best.dump(2) + "\n");
    if (result.best_trajectory) {
        out.best_trajectory_csv = output_dir / "best_trajectory.csv";
        write_text_file(out.best_trajectory_csv.string(),
                        trajectory_to_csv(*result.best_trajectory, false));
    }
    out.result = std::move(result);
    return out;
}

/// check-hetero config: objective + clients + rho + kappa (number or "auto")
/// and either a 1-D "grid" {min,max,step} or random "probes" {count,radius,seed}.
struct HeterogeneityConfig {
    ObjectiveSpec objective;
    std::size_t clients = 2;
    double rho = 1.0;
    double kappa = 0.0;
    bool grid_mode = true;
    double grid_min = -10.0, grid_max = 10.0, grid_step = 0.01;
    std::size_t probe_count = 100;
    double probe_radius = 1.0;
    std::uint64_t probe_seed = 0;

    static HeterogeneityConfig from_file(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config: " + path.string());
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        cfg::check_keys(j, "config", {"objective", "clients", "rho", "kappa", "grid", "probes"});
        HeterogeneityConfig hc;
        hc.objective = ObjectiveSpec::from_json(cfg::require(j, "config", "objective"));
        hc.clients = static_cast<std::size_t>(
            cfg::uinteger(cfg::require(j, "config", "clients"), "config.clients"));
        hc.rho = cfg::number(cfg::require(j, "config", "rho"), "config.rho");
        const json& kap = cfg::require(j, "config", "kappa");
        if (kap.is_string()) {
            if (kap.get<std::string>() != "auto" || hc.objective.family != "quartic")
                throw ConfigError("config.kappa: 'auto' is only defined for the quartic family");
            hc.kappa = kappa_H(hc.objective.H);
        } else {
            hc.kappa = cfg::number(kap, "config.kappa");
        }
        if (j.contains("grid") == j.contains("probes"))
            throw ConfigError("config: exactly one of 'grid' or 'probes' is required");
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            cfg::check_keys(g, "grid", {"min", "max", "step"});
            hc.grid_min = cfg::number(cfg::require(g, "grid", "min"), "grid.min");
            hc.grid_max = cfg::number(cfg::require(g, "grid", "max"), "grid.max");
            hc.grid_step = cfg::number(cfg::require(g, "grid", "step"), "grid.step");
        } else {
            hc.grid_mode = false;
            const json& p = j.at("probes");
            cfg::check_keys(p, "probes", {"count", "radius", "seed"});
            hc.probe_count = static_cast<std::size_t>(
                cfg::uinteger(cfg::require(p, "probes", "count"), "probes.count"));
            hc.probe_radius = cfg::number(cfg::require(p, "probes", "radius"), "probes.radius");
            if (p.contains("seed")) hc.probe_seed = cfg::uinteger(p.at("seed"), "probes.seed");
        }
        return hc;
    }
};

inline json run_heterogeneity_check(const HeterogeneityConfig& hc) {
    const auto objectives = hc.objective.make_objectives(hc.clients);
    std::vector<ParameterVector> probes;
    if (hc.grid_mode) {
        if (objectives.front()->dim() != 1)
            throw ConfigError("check-hetero: 'grid' mode needs a 1-D objective; use 'probes'");
        probes = make_grid_points_1d(hc.grid_min, hc.grid_max, hc.grid_step);
    } else {
        probes = make_random_points(objectives.front()->dim(), hc.probe_count, hc.probe_radius,
                                    hc.probe_seed);
    }
    const HeterogeneityReport report = heterogeneity_check(objectives, probes, hc.rho, hc.kappa);
    json out;
    out["holds"] = report.holds;
    out["worst_margin"] = report.worst_margin;
    out["rho"] = hc.rho;
    out["kappa"] = hc.kappa;
    out["points_checked"] = probes.size();
    json at = json::array();
    for (std::size_t i = 0; i < report.worst_point.dim(); ++i) at.push_back(report.worst_point[i]);
    out["worst_point"] = at;
    return out;
}

/// The `hyperparams` verb: resolve the theorem block without running.
inline json resolve_hyperparams_only(const fs::path& config_path) {
    const ExperimentConfig config = ExperimentConfig::from_file(config_path);
    if (!config.theorem_mode)
        throw ConfigError(config_path.string() + ": 'hyperparams' needs a config in theorem mode");
    const ResolvedHyperParams r = theorem1_hyperparams(*config.constants, config.clients,
                                                       config.interval, config.theorem_variant);
    json out;
    out["eta"] = r.eta;
    out["gamma"] = r.gamma;
    out["clip_threshold"] = r.clip_ratio;
    out["Gamma"] = r.Gamma;
    out["A"] = r.A;
    out["B"] = r.B;
    out["min_rounds"] = r.min_rounds;
    out["variant"] = to_string(config.theorem_variant);
    out["requested_rounds"] = config.rounds;
    out["meets_min_rounds"] = config.rounds >= r.min_rounds;
    return out;
}

} // namespace fedclip
