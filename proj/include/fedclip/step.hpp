#pragma once

#include <cmath>

#include "fedclip/errors.hpp"
#include "fedclip/vector.hpp"

namespace fedclip {

/// The single update primitive shared by all algorithms.
///
/// clip == false:  x - eta * g          (moves exactly eta * ||g||)
/// clip == true:   x - gamma * g/||g||  (moves exactly gamma; g = 0 moves 0)
inline ParameterVector clip_step(const ParameterVector& x,
                                 const ParameterVector& g,
                                 double eta,
                                 double gamma,
                                 bool clip) {
    x.require_same_dim(g, "clip_step");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("clip_step: eta must be finite and > 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw ConfigError("clip_step: gamma must be finite and > 0");
    if (!x.is_finite() || !g.is_finite()) throw NumericError("clip_step: non-finite input");

    if (clip) {
        const double gn = g.norm();
        if (gn == 0.0) return x; // zero-gradient convention: no movement
        ParameterVector out = x;
        const double scale = gamma / gn;
        for (std::size_t i = 0; i < out.dim(); ++i) out[i] -= scale * g[i];
        return out;
    }
    ParameterVector out = x;
    for (std::size_t i = 0; i < out.dim(); ++i) out[i] -= eta * g[i];
    return out;
}

} // namespace fedclip
