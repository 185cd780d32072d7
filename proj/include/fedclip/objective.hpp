#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "fedclip/errors.hpp"
#include "fedclip/rng.hpp"
#include "fedclip/vector.hpp"

namespace fedclip {

/// A client's loss function: exact value and exact gradient.
///
/// Implementations are immutable after construction; evaluation is const and
/// safe to call concurrently.
class Objective {
public:
    virtual ~Objective() = default;

    virtual std::size_t dim() const = 0;
    virtual double value(const ParameterVector& x) const = 0;
    virtual ParameterVector gradient(const ParameterVector& x) const = 0;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

/// Global loss f(x) = (1/N) sum_i f_i(x). Summation order is ascending
/// client id so results are bit-reproducible.
inline double mean_value(const std::vector<ObjectivePtr>& objectives, const ParameterVector& x) {
    if (objectives.empty()) throw ConfigError("mean_value: no objectives");
    double s = 0.0;
    for (const auto& o : objectives) s += o->value(x);
    return s / static_cast<double>(objectives.size());
}

inline ParameterVector mean_gradient(const std::vector<ObjectivePtr>& objectives,
                                     const ParameterVector& x) {
    if (objectives.empty()) throw ConfigError("mean_gradient: no objectives");
    ParameterVector g = objectives.front()->gradient(x);
    for (std::size_t i = 1; i < objectives.size(); ++i) g += objectives[i]->gradient(x);
    return g *= 1.0 / static_cast<double>(objectives.size());
}

enum class NoiseKind {
    kNone,
    kUniformBall,
    kUniformPerCoordinate,
};

/// Bounded stochastic-gradient noise: every draw n satisfies ||n|| <= sigma
/// (a hard bound, not in expectation) and E[n] = 0.
struct NoiseModel {
    double sigma = 0.0;
    NoiseKind kind = NoiseKind::kNone;

    void validate() const {
        if (!(sigma >= 0.0) || !std::isfinite(sigma))
            throw ConfigError("NoiseModel: sigma must be finite and >= 0");
        if (sigma > 0.0 && kind == NoiseKind::kNone)
            throw ConfigError("NoiseModel: sigma > 0 requires a noise kind");
    }
};

/// One noise vector. kUniformPerCoordinate draws each coordinate uniform on
/// [-sigma/sqrt(d), sigma/sqrt(d)], which in one dimension with sigma = 1 is
/// exactly uniform noise on [-1, 1]. kUniformBall draws per-coordinate uniform
/// on [-sigma, sigma] and rescales onto the sigma-sphere if the norm exceeds
/// sigma; both constructions keep ||n|| <= sigma surely and are symmetric
/// around zero.
inline ParameterVector draw_noise(const NoiseModel& noise, std::size_t dim, RngStream& rng) {
    ParameterVector n = ParameterVector::zeros(dim);
    if (noise.sigma == 0.0 || noise.kind == NoiseKind::kNone) return n;
    switch (noise.kind) {
    case NoiseKind::kUniformPerCoordinate: {
        const double amp = noise.sigma / std::sqrt(static_cast<double>(dim));
        for (std::size_t i = 0; i < dim; ++i) n[i] = rng.uniform_symmetric(amp);
        break;
    }
    case NoiseKind::kUniformBall: {
        for (std::size_t i = 0; i < dim; ++i) n[i] = rng.uniform_symmetric(noise.sigma);
        const double nn = n.norm();
        if (nn > noise.sigma) n *= noise.sigma / nn;
        break;
    }
    case NoiseKind::kNone:
        break;
    }
    return n;
}

/// grad f_i(x) + n with ||n|| <= sigma almost surely. sigma = 0 returns the
/// exact gradient bit for bit.
inline ParameterVector sample_stochastic_gradient(const Objective& objective,
                                                  const ParameterVector& x,
                                                  const NoiseModel& noise,
                                                  RngStream& rng) {
    ParameterVector g = objective.gradient(x);
    if (noise.sigma == 0.0 || noise.kind == NoiseKind::kNone) return g;
    return g += draw_noise(noise, g.dim(), rng);
}

/// Central finite differences, the test oracle for analytic gradients.
inline ParameterVector finite_diff_gradient(const Objective& objective,
                                            const ParameterVector& x,
                                            double h = 1e-5) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("finite_diff_gradient: h must be > 0");
    if (x.dim() != objective.dim())
        throw DimensionError("finite_diff_gradient: point dimension does not match objective");
    ParameterVector g = ParameterVector::zeros(x.dim());
    ParameterVector probe = x;
    for (std::size_t j = 0; j < x.dim(); ++j) {
        probe[j] = x[j] + h;
        const double fp = objective.value(probe);
        probe[j] = x[j] - h;
        const double fm = objective.value(probe);
        probe[j] = x[j];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_gradient: non-finite objective value near x");
        g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
}

} // namespace fedclip
