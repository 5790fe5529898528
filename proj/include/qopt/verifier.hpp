#pragma once

#include "qopt/market.hpp"

#include <cstdint>
#include <string>

namespace qopt {

/// A measure proposed as q-optimal, given through the generator g* of its
/// density g*/E[g*]. Requires E[g*] > 0.
struct CandidateMeasure {
    Eigen::VectorXd g_star;
    double q = 0.0;
};

enum class Verdict { Optimal, NotOptimal, Inconclusive };

const char* to_string(Verdict v);

/// Outcome of the necessary-and-sufficient optimality test. The candidate is
/// optimal iff w = sgn(g*)|g*|^{q-1} has unit expectation under EVERY signed
/// martingale measure; on a finite tree that quantifier reduces exactly to
/// w lying in span{1, gains} with the right normalization.
struct VerificationReport {
    double membership_residual = 0.0;    // L2(P) distance of w from span{1, gains}
    double normalization_residual = 0.0; // |E_{Q_cand}[w] - 1|
    double sampled_max_residual = 0.0;   // max over sampled measures of |E_Q[w] - 1|
    Verdict verdict = Verdict::Inconclusive;
    std::string reason;
    double candidate_q_norm = 0.0;
};

struct VerifyOptions {
    double optimal_tol = 1e-8; // all residuals below: OPTIMAL
    double reject_tol = 1e-4;  // any residual above: NOT-OPTIMAL
    double ms_tol = 1e-8;      // martingale-measure membership pre-check
    int n_samples = 64;
    std::uint64_t seed = 42;
    double sample_box = 10.0;  // samples scaled so ||V z||_inf stays within
    double rank_tol = 1e-10;
};

/// Runs both the exact subspace test and the randomized sampling test.
/// A candidate that is not itself a signed martingale measure is rejected
/// up front. Throws std::invalid_argument for q <= 1 or E[g*] <= 0.
VerificationReport verify(const CandidateMeasure& candidate, const ScenarioMarket& market,
                          const GainBasis& basis, const VerifyOptions& opts = {});

/// Rescales a density u into a candidate whose self-expectation
/// E_Q[sgn(g*)|g*|^{q-1}] equals 1 exactly. Self-consistency alone does not
/// imply optimality; such candidates exercise the sampling quantifier.
CandidateMeasure self_consistent_candidate(const ScenarioMarket& market,
                                           const DensityVector& u, double q);

struct GridOptions {
    double lo = 0.0;          // ignored when auto_bounds
    double hi = 0.0;
    int points = 33;          // grid points per dimension
    int refine_sweeps = 200;  // coordinate-descent passes after the grid
    double coord_tol = 1e-10; // golden-section interval tolerance
    bool auto_bounds = true;  // derive bounds from the norm of u0
};

/// Independent minimizer of ||u0 + V z||_q: dense grid search refined by
/// per-coordinate golden-section descent. Requires affine dimension k <= 3;
/// throws std::invalid_argument otherwise.
DensityVector brute_force_oracle(const ScenarioMarket& market, const GainBasis& basis,
                                 double q, const GridOptions& opts = {});

} // namespace qopt
