#pragma once

#include <cstdint>
#include <vector>

#include "fedclip/vector.hpp"

namespace fedclip {

enum class RunStatus { kCompleted, kDiverged };

inline const char* to_string(RunStatus s) {
    return s == RunStatus::kCompleted ? "completed" : "diverged";
}

/// One per-round record. Row 0 holds the initial-point metrics; row r >= 1
/// describes the state after r rounds together with the clip decision and the
/// maximum client discrepancy observed during the round that produced it.
struct TrajectoryRow {
    long long round = 0;
    double loss = 0.0;
    double grad_norm = 0.0; // exact global gradient norm at xbar
    bool clipped = false;
    double max_discrepancy = 0.0; // max over t, i of ||x_t^i - xbar_r||
    double elapsed_ms = 0.0;      // wall clock; excluded from deterministic output
};

struct Trajectory {
    std::vector<TrajectoryRow> rows;
    RunStatus status = RunStatus::kCompleted;
    long long diverged_round = -1; // round whose update left the finite range
};

/// Full per-iteration iterates of one round, recorded when monitoring.
struct RoundTrace {
    long long round = 0;
    bool clipped = false;
    bool episodic = false; // clip flag is the round-level ||G_r|| decision
    ParameterVector xbar_start;
    // iterates[i][t] = client i after local step t (t = 0..I-1)
    std::vector<std::vector<ParameterVector>> iterates;
};

} // namespace fedclip
