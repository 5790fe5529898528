#pragma once

#include "qopt/projection.hpp"

namespace qopt {

enum class MeasureClass { Equivalent, AbsolutelyContinuous, Signed };

const char* to_string(MeasureClass c);

/// The q-optimal signed martingale measure assembled from the dual
/// minimizer: g* = sgn(g)|g|^{p-1}, mu = E[g*], density = g*/mu.
struct QOptimalSolution {
    Eigen::VectorXd g_star;
    double mu = 0.0;
    DensityVector density;
    double q_norm = 0.0;
    MeasureClass classification = MeasureClass::Equivalent;
    double q = 0.0;
    double p = 0.0;
};

struct ConsistencyReport {
    double mu_gap = 0.0;     // |E[g*] - E[|g*|^q]|
    double moment_gap = 0.0; // |E[|density|^q] - mu^{-q/p}|
    double tol = 0.0;
    bool pass = false;
};

struct PowerIdentityReport {
    double gap = 0.0; // |E[|g|^p] - E[sgn(g)|g|^{p-1}]|
    double tol = 0.0;
    bool pass = false;
};

/// Builds the q-optimal measure from a converged dual solve. The density is
/// renormalized after rounding so E[density] hits 1 at machine scale.
/// Classification compares min density against pos_tol * max |density|.
/// Throws std::runtime_error if mu = E[g*] is not strictly positive, which
/// contradicts a successful dual solve.
QOptimalSolution assemble(const ScenarioMarket& market, const ProjectionResult& dual,
                          double q, double pos_tol = 1e-10);

/// Checks E[g*] = E[|g*|^q] and E[|dQ*/dP|^q] = mu^{-q/p}.
ConsistencyReport mu_consistency(const ScenarioMarket& market, const QOptimalSolution& sol,
                                 double tol = 1e-8);

/// Checks E[|g|^p] = E[sgn(g)|g|^{p-1}]; the two sides coincide because the
/// projection residual g is orthogonal to f in the duality pairing.
PowerIdentityReport g_power_identity(const ScenarioMarket& market,
                                     const ProjectionResult& dual, double tol = 1e-8);

} // namespace qopt
