#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedclip/algorithms.hpp"
#include "fedclip/errors.hpp"
#include "fedclip/monitor.hpp"
#include "fedclip/parallel.hpp"
#include "fedclip/rng.hpp"

namespace fedclip {

/// Tuning grid over the clipping threshold gamma/eta and the step size eta.
struct GridSpec {
    std::vector<double> clip_ratios; // gamma / eta
    std::vector<double> etas;

    void validate() const {
        if (clip_ratios.empty() || etas.empty()) throw ConfigError("GridSpec: empty grid");
        for (double r : clip_ratios)
            if (!(r > 0.0)) throw ConfigError("GridSpec: gamma/eta values must be > 0");
        for (double e : etas)
            if (!(e > 0.0)) throw ConfigError("GridSpec: eta values must be > 0");
    }
};

struct GridCellResult {
    double clip_ratio = 0.0;
    double eta = 0.0;
    double gamma = 0.0;
    std::uint64_t seed = 0; // the derived per-cell seed, for exact replay
    RunStatus status = RunStatus::kCompleted;
    double final_loss = 0.0;
    double stationarity = 0.0;
    long long rounds_executed = 0;
};

struct GridSearchResult {
    std::vector<GridCellResult> table;           // row-major: ratios x etas
    std::optional<std::size_t> best;             // none when every cell diverged
    std::optional<Trajectory> best_trajectory;
};

/// Runs every (gamma/eta, eta) cell with an independent seed derived from the
/// master seed by cell index and picks the completed cell with the lowest
/// final loss, breaking ties toward the smaller eta.
inline GridSearchResult grid_search(Algorithm algo,
                                    const std::vector<ObjectivePtr>& objectives,
                                    const NoiseModel& noise,
                                    const HyperParams& base,
                                    const ParameterVector& x0,
                                    const GridSpec& grid,
                                    std::uint64_t seed,
                                    int threads = 0) {
    grid.validate();
    const std::size_t cells = grid.clip_ratios.size() * grid.etas.size();
    std::vector<GridCellResult> table(cells);
    std::vector<Trajectory> trajectories(cells);

    parallel_for(cells, resolve_threads(threads), [&](std::size_t cell) {
        const double ratio = grid.clip_ratios[cell / grid.etas.size()];
        const double eta = grid.etas[cell % grid.etas.size()];
        HyperParams hp = base;
        hp.eta = eta;
        hp.gamma = ratio * eta;
        RunOptions opt;
        opt.threads = 1; // cells are the parallel unit
        const std::uint64_t cell_seed = derive_seed(seed, cell);
        RunResult run = run_training(algo, objectives, noise, hp, x0, cell_seed, opt);

        GridCellResult& out = table[cell];
        out.clip_ratio = ratio;
        out.eta = eta;
        out.gamma = hp.gamma;
        out.seed = cell_seed;
        out.status = run.trajectory.status;
        out.final_loss = run.trajectory.rows.back().loss;
        out.stationarity = stationarity_metric(run.trajectory);
        out.rounds_executed = static_cast<long long>(run.trajectory.rows.size()) - 1;
        trajectories[cell] = std::move(run.trajectory);
    });

    GridSearchResult result;
    result.table = std::move(table);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        const GridCellResult& c = result.table[cell];
        if (c.status != RunStatus::kCompleted) continue;
        if (!result.best) {
            result.best = cell;
            continue;
        }
        const GridCellResult& b = result.table[*result.best];
        if (c.final_loss < b.final_loss ||
            (c.final_loss == b.final_loss && c.eta < b.eta)) {
            result.best = cell;
        }
    }
    if (result.best) result.best_trajectory = std::move(trajectories[*result.best]);
    return result;
}

} // namespace fedclip
