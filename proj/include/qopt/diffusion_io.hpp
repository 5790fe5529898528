#pragma once

#include "qopt/diffusion.hpp"

#include <map>
#include <string>

namespace qopt {

/// A diffusion spec built from a named preset. Presets with deterministic
/// lambda(t) expose it for closed-form evaluation; rho_zero marks specs
/// eligible for the volatility-factor-only cross-check.
struct DiffusionPreset {
    std::string preset;
    DiffusionSpec spec;
    TimeFn lambda_deterministic; // null when lambda depends on Y
    bool lambda_is_deterministic = false;
    bool rho_zero = true;
    std::map<std::string, double> params; // echoed into reports
};

/// Diffusion spec format: line-oriented key/value, `#` comments.
///
///   format qopt-diffusion
///   version 1
///   preset constant
///   q 2
///   maturity 1
///   s0 1
///   y0 0
///   sigma 1
///   rho 0
///   lambda0 0.2
///
/// Presets: `constant` (lambda = lambda0), `linear-t`
/// (lambda = lambda0 + lambda1 t), `table` (lambda interpolated from
/// `lambda-at T VALUE` rows), `ou-sine` (lambda = lambda0 + lambda1 sin(Y),
/// dY = -kappa Y dt + beta dW).
DiffusionPreset parse_diffusion(const std::string& text, const std::string& filename = "<string>");
DiffusionPreset load_diffusion(const std::string& path);

} // namespace qopt
