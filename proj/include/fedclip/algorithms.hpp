#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedclip/errors.hpp"
#include "fedclip/hyperparams.hpp"
#include "fedclip/monitor.hpp"
#include "fedclip/objective.hpp"
#include "fedclip/parallel.hpp"
#include "fedclip/rng.hpp"
#include "fedclip/step.hpp"
#include "fedclip/trajectory.hpp"
#include "fedclip/vector.hpp"

namespace fedclip {

/// Any coordinate beyond this magnitude (or non-finite) marks a run diverged.
inline constexpr double kDivergenceLimit = 1e12;

enum class Algorithm {
    kEpisode,
    kEpisodeUnclipped,
    kCelgc,
    kFedAvg,
    kScaffold,
    kScaffoldClipped,
    kNaiveParallelClip,
};

inline const char* to_string(Algorithm a) {
    switch (a) {
    case Algorithm::kEpisode: return "episode";
    case Algorithm::kEpisodeUnclipped: return "episode_unclipped";
    case Algorithm::kCelgc: return "celgc";
    case Algorithm::kFedAvg: return "fedavg";
    case Algorithm::kScaffold: return "scaffold";
    case Algorithm::kScaffoldClipped: return "scaffold_clipped";
    case Algorithm::kNaiveParallelClip: return "naive_parallel_clip";
    }
    return "unknown";
}

inline Algorithm algorithm_from_string(const std::string& s) {
    if (s == "episode") return Algorithm::kEpisode;
    if (s == "episode_unclipped") return Algorithm::kEpisodeUnclipped;
    if (s == "celgc") return Algorithm::kCelgc;
    if (s == "fedavg") return Algorithm::kFedAvg;
    if (s == "scaffold") return Algorithm::kScaffold;
    if (s == "scaffold_clipped") return Algorithm::kScaffoldClipped;
    if (s == "naive_parallel_clip") return Algorithm::kNaiveParallelClip;
    throw ConfigError("unknown algorithm '" + s + "'");
}

/// Per-client state carried across rounds. `control` is the SCAFFOLD control
/// variate c_i, zero-initialized and unused by the other algorithms.
struct ClientState {
    ParameterVector iterate;
    ParameterVector control;
};

/// Start-of-round controls: one resampled stochastic gradient per client, their
/// mean, and the episodic clip decision.
struct RoundState {
    std::vector<ParameterVector> controls; // G_r^i
    ParameterVector mean_control;          // G_r, averaged in ascending client order
    bool clip_round = false;               // ||G_r|| > gamma/eta
    long long round = 0;
};

struct RoundContext {
    std::vector<ObjectivePtr> objectives;
    NoiseModel noise;
    HyperParams hp;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate(const ParameterVector& xbar) const {
        hp.validate();
        noise.validate();
        if (objectives.empty()) throw ConfigError("RoundContext: no objectives");
        if (objectives.size() != hp.n_clients)
            throw ConfigError("RoundContext: objective count does not match n_clients");
        for (const auto& o : objectives) {
            if (o->dim() != xbar.dim())
                throw DimensionError("RoundContext: objective dimension does not match iterate");
        }
    }
};

struct RoundOutcome {
    bool clipped = false; // episodic flag, or "any step clipped" for per-step algorithms
    double max_discrepancy = 0.0;
    bool finite = true;
};

/// g_t^i = local - G_i + G, evaluated as local + (G - G_i) per coordinate so
/// the correction cancels bit for bit whenever G equals G_i (e.g. N = 1).
inline ParameterVector corrected_gradient(const ParameterVector& local,
                                          const ParameterVector& G_i,
                                          const ParameterVector& G) {
    local.require_same_dim(G_i, "corrected_gradient");
    local.require_same_dim(G, "corrected_gradient");
    ParameterVector out = local;
    for (std::size_t j = 0; j < out.dim(); ++j) out[j] += G[j] - G_i[j];
    return out;
}

/// Algorithm lines 3-6: fresh stochastic gradients at xbar for every client
/// (the round's dedicated control streams, independent of local-step draws),
/// their mean, and the clip decision for the round.
inline RoundState resample_controls(const RoundContext& ctx,
                                    long long round,
                                    const ParameterVector& xbar) {
    ctx.validate(xbar);
    const std::size_t n = ctx.objectives.size();
    RoundState rs;
    rs.round = round;
    rs.controls.resize(n);
    parallel_for(n, ctx.threads, [&](std::size_t i) {
        RngStream rng(ctx.seed, i, static_cast<std::uint64_t>(round), 0, DrawPurpose::kControl);
        rs.controls[i] = sample_stochastic_gradient(*ctx.objectives[i], xbar, ctx.noise, rng);
    });
    rs.mean_control = rs.controls.front();
    for (std::size_t i = 1; i < n; ++i) rs.mean_control += rs.controls[i];
    rs.mean_control *= 1.0 / static_cast<double>(n);
    rs.clip_round = rs.mean_control.norm() > ctx.hp.clip_threshold();
    return rs;
}

namespace detail {

inline bool within_limits(const ParameterVector& x) {
    return x.is_finite() && x.max_abs() <= kDivergenceLimit;
}

inline ParameterVector client_average(const std::vector<ClientState>& clients) {
    ParameterVector avg = clients.front().iterate;
    for (std::size_t i = 1; i < clients.size(); ++i) avg += clients[i].iterate;
    return avg *= 1.0 / static_cast<double>(clients.size());
}

inline void init_trace(RoundTrace* trace,
                       long long round,
                       bool clipped,
                       bool episodic,
                       const ParameterVector& xbar,
                       std::size_t n_clients,
                       std::size_t interval) {
    if (!trace) return;
    trace->round = round;
    trace->clipped = clipped;
    trace->episodic = episodic;
    trace->xbar_start = xbar;
    trace->iterates.assign(n_clients, {});
    for (auto& v : trace->iterates) v.reserve(interval);
}

// Shared local-step loop. `direction` maps (client, iteration, current iterate,
// local rng) to the update direction; `clip_flag` decides the branch given that
// direction. Returns the new client average.
template <typename DirectionFn, typename ClipFn>
ParameterVector local_rounds(const RoundContext& ctx,
                             long long round,
                             std::vector<ClientState>& clients,
                             const ParameterVector& xbar,
                             RoundOutcome& outcome,
                             RoundTrace* trace,
                             DirectionFn&& direction,
                             ClipFn&& clip_flag) {
    const std::size_t n = ctx.objectives.size();
    if (clients.size() != n) throw ConfigError("local_rounds: client state count mismatch");

    std::vector<double> discrepancy(n, 0.0);
    std::vector<char> finite(n, 1);
    std::vector<char> clipped_any(n, 0);

    parallel_for(n, ctx.threads, [&](std::size_t i) {
        ClientState& cs = clients[i];
        cs.iterate = xbar; // full synchronization at round start
        for (std::size_t t = 0; t < ctx.hp.interval; ++t) {
            RngStream rng(ctx.seed, i, static_cast<std::uint64_t>(round), t, DrawPurpose::kLocal);
            ParameterVector g = direction(i, t, cs.iterate, rng);
            if (!g.is_finite()) {
                finite[i] = 0;
                break;
            }
            const bool clip = clip_flag(i, g);
            if (clip) clipped_any[i] = 1;
            cs.iterate = clip_step(cs.iterate, g, ctx.hp.eta, ctx.hp.gamma, clip);
            if (trace) trace->iterates[i].push_back(cs.iterate);
            if (!within_limits(cs.iterate)) {
                finite[i] = 0;
                break;
            }
            discrepancy[i] = std::max(discrepancy[i], distance(cs.iterate, xbar));
        }
    });

    for (std::size_t i = 0; i < n; ++i) {
        outcome.max_discrepancy = std::max(outcome.max_discrepancy, discrepancy[i]);
        if (!finite[i]) outcome.finite = false;
        if (clipped_any[i]) outcome.clipped = true;
    }
    ParameterVector next = client_average(clients);
    if (!within_limits(next)) outcome.finite = false;
    return next;
}

} // namespace detail

/// One EPISODE round: resample controls, decide the clip branch once from
/// ||G_r|| vs gamma/eta, run I corrected local steps per client with that fixed
/// branch, average. `force_unclipped` is the clipping-removed ablation.
inline ParameterVector episode_round(const RoundContext& ctx,
                                     long long round,
                                     std::vector<ClientState>& clients,
                                     const ParameterVector& xbar,
                                     RoundOutcome& outcome,
                                     RoundTrace* trace = nullptr,
                                     bool force_unclipped = false,
                                     RoundState* round_state_out = nullptr) {
    RoundState rs = resample_controls(ctx, round, xbar);
    const bool clip = force_unclipped ? false : rs.clip_round;
    outcome.clipped = clip;
    // The drift bounds assume the executed branch is the ||G_r|| decision, so a
    // forced round only counts as episodic if the decision agrees.
    detail::init_trace(trace, round, clip, !force_unclipped || !rs.clip_round, xbar,
                       ctx.objectives.size(), ctx.hp.interval);
    ParameterVector next = detail::local_rounds(
        ctx, round, clients, xbar, outcome, trace,
        [&](std::size_t i, std::size_t, const ParameterVector& x, RngStream& rng) {
            ParameterVector local = sample_stochastic_gradient(*ctx.objectives[i], x, ctx.noise, rng);
            return corrected_gradient(local, rs.controls[i], rs.mean_control);
        },
        [&](std::size_t, const ParameterVector&) { return clip; });
    if (round_state_out) *round_state_out = std::move(rs);
    return next;
}

/// Clipped FedAvg: every client clips its own stochastic gradient at gamma/eta
/// on every iteration.
inline ParameterVector celgc_round(const RoundContext& ctx,
                                   long long round,
                                   std::vector<ClientState>& clients,
                                   const ParameterVector& xbar,
                                   RoundOutcome& outcome,
                                   RoundTrace* trace = nullptr) {
    ctx.validate(xbar);
    detail::init_trace(trace, round, false, false, xbar, ctx.objectives.size(), ctx.hp.interval);
    const double threshold = ctx.hp.clip_threshold();
    return detail::local_rounds(
        ctx, round, clients, xbar, outcome, trace,
        [&](std::size_t i, std::size_t, const ParameterVector& x, RngStream& rng) {
            return sample_stochastic_gradient(*ctx.objectives[i], x, ctx.noise, rng);
        },
        [&](std::size_t, const ParameterVector& g) { return g.norm() > threshold; });
}

/// Plain local SGD: I unclipped steps per client, then average.
inline ParameterVector fedavg_round(const RoundContext& ctx,
                                    long long round,
                                    std::vector<ClientState>& clients,
                                    const ParameterVector& xbar,
                                    RoundOutcome& outcome,
                                    RoundTrace* trace = nullptr) {
    ctx.validate(xbar);
    detail::init_trace(trace, round, false, false, xbar, ctx.objectives.size(), ctx.hp.interval);
    return detail::local_rounds(
        ctx, round, clients, xbar, outcome, trace,
        [&](std::size_t i, std::size_t, const ParameterVector& x, RngStream& rng) {
            return sample_stochastic_gradient(*ctx.objectives[i], x, ctx.noise, rng);
        },
        [](std::size_t, const ParameterVector&) { return false; });
}

/// SCAFFOLD with full participation and the difference-quotient (option II)
/// control update: local direction d = grad - c_i + c; at round end
/// c_i <- c_i - c + (xbar_r - y_i)/(I eta) and c <- c + mean(c_i delta).
/// The clipped variant clips the corrected direction at gamma/eta per step.
inline ParameterVector scaffold_round(const RoundContext& ctx,
                                      long long round,
                                      std::vector<ClientState>& clients,
                                      const ParameterVector& xbar,
                                      ParameterVector& server_control,
                                      bool clipped,
                                      RoundOutcome& outcome,
                                      RoundTrace* trace = nullptr) {
    ctx.validate(xbar);
    const std::size_t n = ctx.objectives.size();
    if (clients.size() != n) throw ConfigError("scaffold_round: client state count mismatch");
    for (auto& cs : clients) {
        if (cs.control.empty()) cs.control = ParameterVector::zeros(xbar.dim());
    }
    if (server_control.empty()) server_control = ParameterVector::zeros(xbar.dim());

    detail::init_trace(trace, round, false, false, xbar, n, ctx.hp.interval);
    const double threshold = ctx.hp.clip_threshold();
    ParameterVector next = detail::local_rounds(
        ctx, round, clients, xbar, outcome, trace,
        [&](std::size_t i, std::size_t, const ParameterVector& x, RngStream& rng) {
            ParameterVector local = sample_stochastic_gradient(*ctx.objectives[i], x, ctx.noise, rng);
            return corrected_gradient(local, clients[i].control, server_control);
        },
        [&](std::size_t, const ParameterVector& g) {
            return clipped && g.norm() > threshold;
        });

    if (!outcome.finite) return next;
    const double inv_step = 1.0 / (static_cast<double>(ctx.hp.interval) * ctx.hp.eta);
    ParameterVector delta_sum = ParameterVector::zeros(xbar.dim());
    for (std::size_t i = 0; i < n; ++i) {
        ParameterVector fresh = clients[i].control - server_control +
                                (xbar - clients[i].iterate) * inv_step;
        delta_sum += fresh - clients[i].control;
        clients[i].control = std::move(fresh);
    }
    server_control += delta_sum * (1.0 / static_cast<double>(n));
    return next;
}

/// Fully synchronized baseline: I iterations per round, each averaging fresh
/// stochastic gradients from all clients at the shared iterate and applying
/// one clipped SGD step to it.
inline ParameterVector naive_parallel_round(const RoundContext& ctx,
                                            long long round,
                                            std::vector<ClientState>& clients,
                                            const ParameterVector& xbar,
                                            RoundOutcome& outcome,
                                            RoundTrace* trace = nullptr) {
    ctx.validate(xbar);
    const std::size_t n = ctx.objectives.size();
    detail::init_trace(trace, round, false, false, xbar, 1, ctx.hp.interval);
    const double threshold = ctx.hp.clip_threshold();
    ParameterVector x = xbar;
    std::vector<ParameterVector> grads(n);
    for (std::size_t t = 0; t < ctx.hp.interval; ++t) {
        parallel_for(n, ctx.threads, [&](std::size_t i) {
            RngStream rng(ctx.seed, i, static_cast<std::uint64_t>(round), t, DrawPurpose::kLocal);
            grads[i] = sample_stochastic_gradient(*ctx.objectives[i], x, ctx.noise, rng);
        });
        ParameterVector mean = grads.front();
        for (std::size_t i = 1; i < n; ++i) mean += grads[i];
        mean *= 1.0 / static_cast<double>(n);
        if (!mean.is_finite()) {
            outcome.finite = false;
            break;
        }
        const bool clip = mean.norm() > threshold;
        if (clip) outcome.clipped = true;
        x = clip_step(x, mean, ctx.hp.eta, ctx.hp.gamma, clip);
        if (trace) trace->iterates[0].push_back(x);
        if (!detail::within_limits(x)) {
            outcome.finite = false;
            break;
        }
        outcome.max_discrepancy = std::max(outcome.max_discrepancy, distance(x, xbar));
    }
    for (auto& cs : clients) cs.iterate = x;
    return x;
}

struct RunOptions {
    int threads = 1;
    bool monitor = false; // record per-iteration iterates and check drift bounds
    std::optional<ProblemConstants> constants;
    std::function<void(const RoundTrace&)> trace_sink;
    bool timing = false; // fill elapsed_ms with measured wall clock
};

struct RunResult {
    Trajectory trajectory;
    ParameterVector final_iterate; // last finite xbar
    std::vector<DiscrepancyViolation> violations;
    bool premise_checked = false;
    bool premise_holds = false;
    long long clipped_rounds = 0;
};

/// The outer loop: executes hp.rounds rounds of the chosen algorithm from x0.
/// The trajectory holds one row per completed round plus the initial point;
/// a non-finite or out-of-range iterate stops the run with a diverged status
/// instead of raising.
inline RunResult run_training(Algorithm algo,
                              const std::vector<ObjectivePtr>& objectives,
                              const NoiseModel& noise,
                              const HyperParams& hp,
                              const ParameterVector& x0,
                              std::uint64_t seed,
                              const RunOptions& opt = {}) {
    RoundContext ctx{objectives, noise, hp, seed, resolve_threads(opt.threads)};
    ctx.validate(x0);
    if (!detail::within_limits(x0)) throw NumericError("run_training: non-finite initial point");

    RunResult result;
    if (opt.constants) {
        result.premise_checked = true;
        result.premise_holds = discrepancy_premises_hold(hp, *opt.constants);
    }

    std::vector<ClientState> clients(objectives.size());
    for (auto& cs : clients) cs.iterate = x0;
    ParameterVector server_control; // SCAFFOLD only
    ParameterVector xbar = x0;

    auto record = [&](long long round, bool clipped, double disc, double ms) {
        TrajectoryRow row;
        row.round = round;
        row.loss = mean_value(objectives, xbar);
        row.grad_norm = mean_gradient(objectives, xbar).norm();
        row.clipped = clipped;
        row.max_discrepancy = disc;
        row.elapsed_ms = ms;
        result.trajectory.rows.push_back(row);
    };

    record(0, false, 0.0, 0.0);

    RoundTrace trace;
    for (long long r = 0; r < hp.rounds; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        RoundOutcome outcome;
        RoundTrace* trace_ptr = opt.monitor ? &trace : nullptr;
        ParameterVector next;
        switch (algo) {
        case Algorithm::kEpisode:
            next = episode_round(ctx, r, clients, xbar, outcome, trace_ptr);
            break;
        case Algorithm::kEpisodeUnclipped:
            next = episode_round(ctx, r, clients, xbar, outcome, trace_ptr, /*force_unclipped=*/true);
            break;
        case Algorithm::kCelgc:
            next = celgc_round(ctx, r, clients, xbar, outcome, trace_ptr);
            break;
        case Algorithm::kFedAvg:
            next = fedavg_round(ctx, r, clients, xbar, outcome, trace_ptr);
            break;
        case Algorithm::kScaffold:
            next = scaffold_round(ctx, r, clients, xbar, server_control, false, outcome, trace_ptr);
            break;
        case Algorithm::kScaffoldClipped:
            next = scaffold_round(ctx, r, clients, xbar, server_control, true, outcome, trace_ptr);
            break;
        case Algorithm::kNaiveParallelClip:
            next = naive_parallel_round(ctx, r, clients, xbar, outcome, trace_ptr);
            break;
        }

        if (!outcome.finite) {
            result.trajectory.status = RunStatus::kDiverged;
            result.trajectory.diverged_round = r;
            break;
        }
        xbar = std::move(next);
        if (outcome.clipped) ++result.clipped_rounds;

        if (opt.monitor) {
            MonitorReport report = check_round_discrepancy(trace, hp, opt.constants);
            result.violations.insert(result.violations.end(), report.violations.begin(),
                                     report.violations.end());
            if (opt.trace_sink) opt.trace_sink(trace);
        }

        const double ms =
            opt.timing
                ? std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count()
                : 0.0;
        record(r + 1, outcome.clipped, outcome.max_discrepancy, ms);
    }
    result.final_iterate = std::move(xbar);
    return result;
}

} // namespace fedclip
