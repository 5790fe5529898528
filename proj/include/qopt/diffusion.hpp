#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace qopt {

using Coefficient = std::function<double(double s, double y, double t)>;
using YCoefficient = std::function<double(double y, double t)>;
using TimeFn = std::function<double(double t)>;

/// Univariate diffusion dS = mu dt + sigma dB with a volatility factor
/// dY = alpha dt + beta dW, dW = rho dB + sqrt(1 - rho^2) dZ. The market
/// price of risk is lambda = mu / sigma; sigma must stay away from zero on
/// the simulated range.
struct DiffusionSpec {
    Coefficient mu;
    Coefficient sigma;
    YCoefficient alpha;
    YCoefficient beta;
    TimeFn rho;
    double s0 = 1.0;
    double y0 = 0.0;
    double T = 1.0;
    double q = 2.0;
};

/// Per-path running sums over the uniform grid, left-point convention.
/// Quadratic variations of Brownian integrals use the compensator d[B] = dt,
/// which keeps the pathwise exponent algebra exact on the discrete grid.
struct PathFunctionals {
    double int_lambda_dB = 0.0;   // sum lambda dB
    double k_T = 0.0;             // sum lambda^2 dt (mean-variance trade-off)
    double int_lambdabar_dS = 0.0; // sum (lambda/sigma) dS
    double qv_MS = 0.0;           // sum sigma^2 dt
    double int_diff_dS = 0.0;     // sum (etabar - lambdabar) dS
    double qv_diff = 0.0;         // sum (eta - lambda)^2 dt
    double int_etabar_dMS = 0.0;  // sum (eta/sigma) sigma dB
    double int_etabar_dAS = 0.0;  // sum (eta/sigma) mu dt
    double int_eta2_dt = 0.0;     // sum eta^2 dt
    double int_xi_dW = 0.0;       // sum xi dW
    double int_xi2_dt = 0.0;      // sum xi^2 dt
    double s_T = 0.0;
    double y_T = 0.0;
};

struct SimOptions {
    bool antithetic = true;   // pair 2i+1 negates the increments of pair 2i
    bool parallel = true;     // OpenMP across paths; results are identical
    bool store_paths = false; // retain trajectories and increments
    double sigma_floor = 1e-12;
};

struct PathBundle {
    std::vector<double> grid; // n_steps + 1 time points
    std::vector<PathFunctionals> paths;
    // populated only when store_paths: row-major [path][step]
    std::vector<double> S, Y;      // (n_steps + 1) per path
    std::vector<double> dB, dZ, dW; // n_steps per path
    int n_paths = 0;
    int n_steps = 0;
    std::uint64_t seed = 0;
    bool antithetic = true;
};

struct ChEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long n_paths = 0;
    std::optional<double> closed_form;
};

/// ch_monte_carlo returns the (p-1)-power estimate together with the p-power
/// variant; the two target the same constant, so mean_gap is noise.
struct ChMonteCarloResult {
    ChEstimate estimate;         // -ln E[(E((q-1)(etabar-lambdabar).S)_T)^{p-1}]
    ChEstimate p_power_estimate; // same with exponent p
    double mean_gap = 0.0;       // difference of the two sample means
    double mean_gap_std_error = 0.0;
};

struct ResidualStats {
    double mean_abs = 0.0;
    double max_abs = 0.0;
    long n_paths = 0;
};

/// Euler-Maruyama paths on a uniform grid, deterministic given the seed.
/// Each path draws from its own substream derived from (seed, path index),
/// so results do not depend on execution order or thread count. Antithetic
/// pairs share a substream with negated increments. Throws
/// std::runtime_error with path/step diagnostics if sigma falls below
/// opts.sigma_floor.
PathBundle simulate(const DiffusionSpec& spec, int n_paths, int n_steps,
                    std::uint64_t seed, const SimOptions& opts = {});

/// Same kernel with candidate processes eta (price of volatility risk) and
/// xi (integrand of the orthogonal martingale part) accumulated alongside.
PathBundle simulate_with(const DiffusionSpec& spec, const Coefficient& eta,
                         const YCoefficient& xi, int n_paths, int n_steps,
                         std::uint64_t seed, const SimOptions& opts = {});

/// (q/2) * integral of lambda(t)^2 over [0, T], composite Simpson with
/// n_quad panels (rounded up to even).
double ch_deterministic(const TimeFn& lambda, double q, double T, int n_quad);

/// Estimates -ln E[(E((q-1)(etabar-lambdabar).S)_T)^{p-1}] by simulation;
/// standard errors use the delta method on the log. Pass eta = nullptr for
/// eta identically zero.
ChMonteCarloResult ch_monte_carlo(const DiffusionSpec& spec, const Coefficient& eta,
                                  int n_paths, int n_steps, std::uint64_t seed,
                                  const SimOptions& opts = {});

/// Independent estimator -ln E[exp(-(q/2) K_T)] that simulates the
/// volatility factor alone; valid as a cross-check when rho = 0.
ChEstimate ch_tradeoff_monte_carlo(const DiffusionSpec& spec, int n_paths, int n_steps,
                                   std::uint64_t seed, const SimOptions& opts = {});

/// For deterministic lambda: per path, compares E(-lambda.B)_T against
/// c * (E(-(q-1)lambdabar.S)_T)^{p-1} with c = exp((q/2) sum lambda^2 dt),
/// all from the same discrete increments. The exponents cancel
/// algebraically, so the returned max |LHS - RHS| is rounding-level.
double pathwise_identity_check(const DiffusionSpec& spec, int n_paths, int n_steps,
                               std::uint64_t seed, const SimOptions& opts = {});

/// Evaluates log-LHS minus log-RHS of the density representation equation
///   exp((q/2) lambdabar.A^S_T) E(M^Y)_T
///     = c E(etabar.(M^S + q A^S))_T exp(-((q-2)/2) etabar^2.[M^S]_T)
/// per path for a supplied candidate (eta, xi, c), M^Y = xi.W. Zero residual
/// certifies the candidate pathwise.
ResidualStats fundamental_eq_residual(const DiffusionSpec& spec, const Coefficient& eta,
                                      const YCoefficient& xi, double c, int n_paths,
                                      int n_steps, std::uint64_t seed,
                                      const SimOptions& opts = {});

/// Substream seed for one path: splitmix64 mixing of (seed, index).
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

} // namespace qopt
