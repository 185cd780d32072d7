#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "fedclip/errors.hpp"

namespace fedclip {

/// Runtime knobs of one federated run.
struct HyperParams {
    double eta = 0.0;          // local step size
    double gamma = 0.0;        // clipping parameter
    std::size_t interval = 1;  // local steps per communication round (I)
    long long rounds = 0;      // rounds executed (R)
    std::size_t n_clients = 1; // N

    double clip_threshold() const { return gamma / eta; }

    void validate() const {
        if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("HyperParams: eta must be > 0");
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw ConfigError("HyperParams: gamma must be > 0");
        if (interval == 0) throw ConfigError("HyperParams: interval must be >= 1");
        if (rounds < 0) throw ConfigError("HyperParams: rounds must be >= 0");
        if (n_clients == 0) throw ConfigError("HyperParams: need at least one client");
    }
};

struct SmoothnessConstants {
    double A = 0.0;
    double B = 0.0;
};

/// A = 1 + e^C - (e^C - 1)/C and B = (e^C - 1)/C; the descent-inequality
/// constants for (L0,L1)-smooth functions over moves of length <= C/L1.
/// Requires C >= 1 so that A >= 1 and B >= 1.
inline SmoothnessConstants smoothness_constants_ab(double C) {
    if (!(C >= 1.0) || !std::isfinite(C))
        throw ConfigError("smoothness_constants_ab: requires C >= 1");
    const double ec = std::exp(C);
    const double B = (ec - 1.0) / C;
    return SmoothnessConstants{1.0 + ec - B, B};
}

/// The problem-level constants the round-count theorem consumes.
struct ProblemConstants {
    double L0 = 0.0;    // relaxed-smoothness intercept
    double L1 = 0.0;    // relaxed-smoothness slope
    double kappa = 0.0; // heterogeneity offset
    double rho = 1.0;   // heterogeneity multiplier (>= 1)
    double sigma = 0.0; // almost-sure stochastic gradient noise bound
    double Delta = 1.0; // bound on f(x0) - f*
    double epsilon = 0.1; // target stationarity
    double C = 1.0;     // smoothness-lemma radius constant

    void validate() const {
        if (!(L0 >= 0.0) || !(L1 >= 0.0)) throw ConfigError("ProblemConstants: L0, L1 must be >= 0");
        if (!(kappa >= 0.0)) throw ConfigError("ProblemConstants: kappa must be >= 0");
        if (!(rho >= 1.0)) throw ConfigError("ProblemConstants: rho must be >= 1");
        if (!(sigma >= 0.0)) throw ConfigError("ProblemConstants: sigma must be >= 0");
        if (!(Delta > 0.0)) throw ConfigError("ProblemConstants: Delta must be > 0");
        if (!(epsilon > 0.0)) throw ConfigError("ProblemConstants: epsilon must be > 0");
        if (!(C >= 1.0)) throw ConfigError("ProblemConstants: C must be >= 1");
    }
};

/// The theorem's step-size constants appear in two variants in the source
/// analysis: (216, 180, 16) in the statement and (856, 180, 8) in the proof.
/// kAppendix is the default; it is the set the proof actually supports.
enum class TheoremConstants { kMain, kAppendix };

inline const char* to_string(TheoremConstants c) {
    return c == TheoremConstants::kMain ? "main" : "appendix";
}

inline TheoremConstants theorem_constants_from_string(const std::string& s) {
    if (s == "main") return TheoremConstants::kMain;
    if (s == "appendix") return TheoremConstants::kAppendix;
    throw ConfigError("theorem_constants: expected 'main' or 'appendix', got '" + s + "'");
}

struct ResolvedHyperParams {
    double eta = 0.0;
    double gamma = 0.0;
    double clip_ratio = 0.0; // gamma / eta
    double Gamma = 0.0;      // A L0 + B L1 kappa + B L1 rho (sigma + gamma/eta)
    double A = 0.0;
    double B = 0.0;
    long long min_rounds = 0; // ceil(4 Delta / (eps^2 eta I))
};

/// Largest admissible step size and matching clipping parameter:
///   eta   = min{ 1/(c1 Gamma I), eps/(180 Gamma I sigma), N eps^2/(c3 A L0 sigma^2) }
///   gamma = (11 sigma + A L0 / (B L1 rho)) eta
/// Terms whose denominator vanishes at sigma = 0 are vacuous and dropped.
inline ResolvedHyperParams theorem1_hyperparams(const ProblemConstants& pc,
                                                std::size_t n_clients,
                                                std::size_t interval,
                                                TheoremConstants variant = TheoremConstants::kAppendix) {
    pc.validate();
    if (n_clients == 0) throw ConfigError("theorem1_hyperparams: need at least one client");
    if (interval == 0) throw ConfigError("theorem1_hyperparams: interval must be >= 1");
    if (pc.L1 <= 0.0)
        throw ConfigError("theorem1_hyperparams: L1 = 0 is not supported by the gamma formula; "
                          "set eta and gamma manually for globally smooth problems");

    const auto [A, B] = smoothness_constants_ab(pc.C);
    const double eps_bound = 3.0 * A * pc.L0 / (5.0 * B * pc.L1 * pc.rho);
    if (pc.epsilon > eps_bound)
        throw ConfigError("theorem1_hyperparams: epsilon exceeds the admissible bound 3AL0/(5BL1rho) = " +
                          std::to_string(eps_bound));

    const double c1 = (variant == TheoremConstants::kMain) ? 216.0 : 856.0;
    const double c3 = (variant == TheoremConstants::kMain) ? 16.0 : 8.0;

    ResolvedHyperParams r;
    r.A = A;
    r.B = B;
    r.clip_ratio = 11.0 * pc.sigma + A * pc.L0 / (B * pc.L1 * pc.rho);
    r.Gamma = A * pc.L0 + B * pc.L1 * pc.kappa + B * pc.L1 * pc.rho * (pc.sigma + r.clip_ratio);

    const double I = static_cast<double>(interval);
    const double N = static_cast<double>(n_clients);
    const double inf = std::numeric_limits<double>::infinity();
    const double t1 = 1.0 / (c1 * r.Gamma * I);
    const double t2 = pc.sigma > 0.0 ? pc.epsilon / (180.0 * r.Gamma * I * pc.sigma) : inf;
    const double t3 = (pc.sigma > 0.0 && pc.L0 > 0.0)
                          ? N * pc.epsilon * pc.epsilon / (c3 * A * pc.L0 * pc.sigma * pc.sigma)
                          : inf;
    r.eta = std::min(t1, std::min(t2, t3));
    r.gamma = r.clip_ratio * r.eta;
    r.min_rounds = static_cast<long long>(
        std::ceil(4.0 * pc.Delta / (pc.epsilon * pc.epsilon * r.eta * I)));
    return r;
}

} // namespace fedclip
