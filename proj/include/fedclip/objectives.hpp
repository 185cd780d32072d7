#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "fedclip/errors.hpp"
#include "fedclip/objective.hpp"
#include "fedclip/vector.hpp"

namespace fedclip {

struct ScalarEval {
    double value = 0.0;
    double gradient = 0.0;
};

/// Two-client quartic family with heterogeneity dial H >= 1:
///   f1(x) = x^4 - 3x^3 + H x^2 + x
///   f2(x) = x^4 - 3x^3 - 2H x^2 + x
/// Both are (L0,L1)-smooth but not globally L-smooth. The averaged loss is
/// f(x) = x^4 - 3x^3 - (H/2) x^2 + x with gradient 4x^3 - 9x^2 - Hx + 1.
inline ScalarEval quartic_eval(double H, int client, double x) {
    if (!(H >= 1.0)) throw ConfigError("quartic_eval: H must be >= 1");
    if (client != 1 && client != 2) throw ConfigError("quartic_eval: client must be 1 or 2");
    if (!std::isfinite(x)) throw NumericError("quartic_eval: non-finite x");
    const double h2 = (client == 1) ? H : -2.0 * H;
    const double x2 = x * x;
    ScalarEval e;
    e.value = x2 * x2 - 3.0 * x2 * x + h2 * x2 + x;
    e.gradient = 4.0 * x2 * x - 9.0 * x2 + 2.0 * h2 * x + 1.0;
    return e;
}

/// The two-client quadratic where per-iteration clipping stalls:
///   f_i(x) = x^2/2 + a_i x with a1 = -gamma - 1, a2 = gamma + 2, gamma > 1.
/// The averaged loss has its minimizer at x* = -1/2.
inline ScalarEval quadratic_eval(double gamma, int client, double x) {
    if (!(gamma > 1.0)) throw ConfigError("quadratic_eval: requires gamma > 1");
    if (client != 1 && client != 2) throw ConfigError("quadratic_eval: client must be 1 or 2");
    if (!std::isfinite(x)) throw NumericError("quadratic_eval: non-finite x");
    const double a = (client == 1) ? (-gamma - 1.0) : (gamma + 2.0);
    return ScalarEval{0.5 * x * x + a * x, x + a};
}

/// Heterogeneity constant for the quartic family: for every x,
/// ||grad f_i(x)|| <= 2 ||grad f(x)|| + kappa_H(H). Positive and strictly
/// increasing in H for H >= 1.
inline double kappa_H(double H) {
    if (!(H >= 1.0)) throw ConfigError("kappa_H: H must be >= 1");
    const double root = (-18.0 + std::sqrt(18.0 * 18.0 + 480.0 * H)) / 24.0;
    return 9.0 * root * root + 10.0 * H * root + 25.0 * H * H / 3.0 + 45.0 * H + 100.0;
}

class QuarticClient final : public Objective {
public:
    QuarticClient(double H, int client) : H_(H), client_(client) {
        (void)quartic_eval(H_, client_, 0.0); // validate parameters
    }

    std::size_t dim() const override { return 1; }
    double value(const ParameterVector& x) const override {
        return quartic_eval(H_, client_, x[0]).value;
    }
    ParameterVector gradient(const ParameterVector& x) const override {
        return ParameterVector{quartic_eval(H_, client_, x[0]).gradient};
    }

    double heterogeneity() const { return H_; }
    int client() const { return client_; }

private:
    double H_;
    int client_;
};

class QuadraticClient final : public Objective {
public:
    QuadraticClient(double gamma, int client) : gamma_(gamma), client_(client) {
        (void)quadratic_eval(gamma_, client_, 0.0);
    }

    std::size_t dim() const override { return 1; }
    double value(const ParameterVector& x) const override {
        return quadratic_eval(gamma_, client_, x[0]).value;
    }
    ParameterVector gradient(const ParameterVector& x) const override {
        return ParameterVector{quadratic_eval(gamma_, client_, x[0]).gradient};
    }

private:
    double gamma_;
    int client_;
};

/// N copies of the quartic pair, alternating f1/f2 so the averaged loss stays
/// (f1 + f2)/2 for any even client count.
inline std::vector<ObjectivePtr> make_quartic_clients(double H, std::size_t n_clients = 2) {
    if (n_clients == 0 || n_clients % 2 != 0)
        throw ConfigError("make_quartic_clients: client count must be even and positive");
    std::vector<ObjectivePtr> out;
    out.reserve(n_clients);
    for (std::size_t i = 0; i < n_clients; ++i)
        out.push_back(std::make_shared<QuarticClient>(H, static_cast<int>(i % 2) + 1));
    return out;
}

inline std::vector<ObjectivePtr> make_quadratic_counterexample(double gamma) {
    return {std::make_shared<QuadraticClient>(gamma, 1), std::make_shared<QuadraticClient>(gamma, 2)};
}

/// Grid bound for an L0 such that |f''| <= L0 + L1 |f'| holds for the quartic
/// clients and their average. The cubic gradient dominates the quadratic
/// Hessian outside [-x_max, x_max], so scanning a bounded grid suffices for
/// L1 > 0 and moderate H.
inline double quartic_l0_bound(double H, double L1, double x_max = 40.0, double step = 1e-3) {
    if (!(H >= 1.0)) throw ConfigError("quartic_l0_bound: H must be >= 1");
    if (!(L1 >= 0.0)) throw ConfigError("quartic_l0_bound: L1 must be >= 0");
    double l0 = 0.0;
    for (double x = -x_max; x <= x_max + 0.5 * step; x += step) {
        // second derivatives: f1'' = 12x^2 - 18x + 2H, f2'' = 12x^2 - 18x - 4H,
        // f'' = 12x^2 - 18x - H
        const double base = 12.0 * x * x - 18.0 * x;
        const double cands[3][2] = {
            {base + 2.0 * H, quartic_eval(H, 1, x).gradient},
            {base - 4.0 * H, quartic_eval(H, 2, x).gradient},
            {base - H, 0.5 * (quartic_eval(H, 1, x).gradient + quartic_eval(H, 2, x).gradient)},
        };
        for (const auto& c : cands) l0 = std::max(l0, std::abs(c[0]) - L1 * std::abs(c[1]));
    }
    return l0;
}

} // namespace fedclip
