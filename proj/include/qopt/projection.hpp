#pragma once

#include "qopt/market.hpp"

#include <vector>

namespace qopt {

struct SolveOptions {
    double tol = 1e-10;           // gradient-norm stopping criterion
    int max_iter = 500;
    double degenerate_tol = 1e-8; // ||g||_p below this means 1 is attainable
    double hessian_floor = 1e-8;  // |residual| floor for exponents below 2
    double rank_tol = 1e-10;      // relative singular-value cutoff
};

/// Minimizer of ||1 - h||_p over the span of the gain basis, p = q/(q-1).
/// f = B theta is the projection of 1 onto the gains, g = 1 - f.
struct ProjectionResult {
    Eigen::VectorXd theta;
    Eigen::VectorXd f; // per state
    Eigen::VectorXd g; // 1 - f
    double p_norm = 0.0;
    double grad_norm = 0.0;
    double q = 0.0;
    double p = 0.0;
    int iterations = 0;
    std::vector<double> objective_trace; // objective value per iteration
};

/// Density of minimal L^q(P)-norm over the affine set of signed martingale
/// measures, u = u0 + V z.
struct PrimalResult {
    DensityVector u;
    double q_norm = 0.0;
    double q = 0.0;
    Eigen::VectorXd z;
    double grad_norm = 0.0;
    int iterations = 0;
    std::vector<double> objective_trace;
};

/// Holder-duality check: at the optimum ||u||_q * ||g||_p = 1.
struct DualityCertificate {
    double gap = 0.0;         // |q_norm - 1 / p_norm|
    double product_gap = 0.0; // |q_norm * p_norm - 1|
    double tol = 0.0;
    bool pass = false;
};

/// Solves min over theta of sum_i p_i |1 - (B theta)_i|^p by damped Newton
/// with backtracking; gradient steps take over when the capped Hessian is
/// uninformative. Throws InfeasibleMarketError when the minimal norm falls
/// below opts.degenerate_tol and ConvergenceError on iteration exhaustion.
ProjectionResult dual_project(const ScenarioMarket& market, const GainBasis& basis,
                              double q, const SolveOptions& opts = {});

/// Solves min over z of sum_i p_i |(u0 + V z)_i|^q on a precomputed affine
/// set, or computes the set first from market + basis.
PrimalResult primal_minimize(const ScenarioMarket& market, const MartingaleAffineSet& affine,
                             double q, const SolveOptions& opts = {});
PrimalResult primal_minimize(const ScenarioMarket& market, const GainBasis& basis,
                             double q, const SolveOptions& opts = {});

/// Both results must come from the same market and exponent; throws
/// std::invalid_argument on a q mismatch.
DualityCertificate duality_certificate(const ProjectionResult& dual,
                                       const PrimalResult& primal, double tol = 1e-7);

/// p = q / (q - 1); requires q > 1.
double conjugate_exponent(double q);

} // namespace qopt
