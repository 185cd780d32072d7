#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "fedclip/hyperparams.hpp"
#include "fedclip/objective.hpp"
#include "fedclip/trajectory.hpp"

namespace fedclip {

struct DiscrepancyViolation {
    long long round = 0;
    std::size_t client = 0;
    std::size_t iteration = 0;
    double distance = 0.0;
    double bound = 0.0;
    bool clipped = false;
};

struct MonitorReport {
    std::vector<DiscrepancyViolation> violations;
    bool premise_checked = false; // problem constants were available
    bool premise_holds = false;   // the discrepancy-lemma premises are satisfied
};

/// Premises under which the non-clipped drift bound is guaranteed:
/// 2 eta I (A L0 + B L1 kappa + B L1 rho (sigma + gamma/eta)) <= 1 and
/// max{2 eta I (2 sigma + gamma/eta), gamma I} <= C / L1 (infinite for L1 = 0).
inline bool discrepancy_premises_hold(const HyperParams& hp, const ProblemConstants& pc) {
    const auto [A, B] = smoothness_constants_ab(pc.C);
    const double ratio = hp.clip_threshold();
    const double I = static_cast<double>(hp.interval);
    const double gamma_big = A * pc.L0 + B * pc.L1 * pc.kappa + B * pc.L1 * pc.rho * (pc.sigma + ratio);
    if (2.0 * hp.eta * I * gamma_big > 1.0) return false;
    const double radius = std::max(2.0 * hp.eta * I * (2.0 * pc.sigma + ratio), hp.gamma * I);
    const double cap = pc.L1 > 0.0 ? pc.C / pc.L1 : std::numeric_limits<double>::infinity();
    return radius <= cap;
}

/// Checks the per-iteration drift bounds against one round's recorded
/// iterates: clipped rounds must satisfy ||x_t^i - xbar_r|| <= gamma I
/// unconditionally; non-clipped rounds must satisfy
/// ||x_t^i - xbar_r|| <= 2 eta I (2 sigma + gamma/eta), asserted only when the
/// premises hold. Bounds apply to rounds whose clip flag is the episodic
/// round-level decision; traces of per-iteration-clipping algorithms are not
/// judged. Violations are data, not errors.
inline MonitorReport check_round_discrepancy(const RoundTrace& trace,
                                             const HyperParams& hp,
                                             const std::optional<ProblemConstants>& pc) {
    MonitorReport report;
    if (pc) {
        report.premise_checked = true;
        report.premise_holds = discrepancy_premises_hold(hp, *pc);
    }
    if (!trace.episodic) return report;

    const double I = static_cast<double>(hp.interval);
    double bound;
    if (trace.clipped) {
        bound = hp.gamma * I;
    } else {
        if (!report.premise_checked || !report.premise_holds) return report;
        bound = 2.0 * hp.eta * I * (2.0 * (pc ? pc->sigma : 0.0) + hp.clip_threshold());
    }

    // slack for floating-point accumulation: I clipped steps of length gamma
    // can overshoot gamma*I by a few ulps
    const double tolerance = bound * (1.0 + 1e-9);
    for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
        for (std::size_t t = 0; t < trace.iterates[i].size(); ++t) {
            const double d = distance(trace.iterates[i][t], trace.xbar_start);
            if (d > tolerance) {
                report.violations.push_back(
                    DiscrepancyViolation{trace.round, i, t, d, bound, trace.clipped});
            }
        }
    }
    return report;
}

/// Mean exact global gradient norm over the recorded rounds, the quantity the
/// round-count theorem bounds by 3 epsilon.
inline double stationarity_metric(const Trajectory& traj) {
    if (traj.rows.empty()) throw ConfigError("stationarity_metric: empty trajectory");
    double s = 0.0;
    for (const auto& row : traj.rows) s += row.grad_norm;
    return s / static_cast<double>(traj.rows.size());
}

struct HeterogeneityReport {
    bool holds = true;
    double worst_margin = std::numeric_limits<double>::infinity();
    ParameterVector worst_point; // where the margin is attained
};

/// Brute-force scan of the bound max_i ||grad f_i(x)|| <= kappa + rho ||grad f(x)||
/// over the probe points. worst_margin is the minimum slack; negative means
/// the bound fails somewhere.
inline HeterogeneityReport heterogeneity_check(const std::vector<ObjectivePtr>& objectives,
                                               const std::vector<ParameterVector>& probes,
                                               double rho,
                                               double kappa) {
    if (objectives.empty()) throw ConfigError("heterogeneity_check: no objectives");
    if (probes.empty()) throw ConfigError("heterogeneity_check: no probe points");
    HeterogeneityReport report;
    for (const auto& x : probes) {
        const double global = mean_gradient(objectives, x).norm();
        double worst_client = 0.0;
        for (const auto& obj : objectives)
            worst_client = std::max(worst_client, obj->gradient(x).norm());
        const double margin = kappa + rho * global - worst_client;
        if (margin < report.worst_margin) {
            report.worst_margin = margin;
            report.worst_point = x;
        }
    }
    report.holds = report.worst_margin >= 0.0;
    return report;
}

inline std::vector<ParameterVector> make_grid_points_1d(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw ConfigError("make_grid_points_1d: bad range");
    std::vector<ParameterVector> points;
    for (double x = lo; x <= hi + 0.5 * step; x += step) points.push_back(ParameterVector{x});
    return points;
}

inline std::vector<ParameterVector> make_random_points(std::size_t dim,
                                                       std::size_t count,
                                                       double radius,
                                                       std::uint64_t seed) {
    if (dim == 0 || count == 0) throw ConfigError("make_random_points: empty request");
    std::vector<ParameterVector> points;
    points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        RngStream rng(seed, 0, 0, i, DrawPurpose::kDerive);
        ParameterVector p = ParameterVector::zeros(dim);
        for (std::size_t j = 0; j < dim; ++j) p[j] = rng.uniform_symmetric(radius);
        points.push_back(std::move(p));
    }
    return points;
}

} // namespace fedclip
