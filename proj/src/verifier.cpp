#include "qopt/verifier.hpp"

#include "qopt/projection.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace qopt {

const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Optimal: return "OPTIMAL";
    case Verdict::NotOptimal: return "NOT-OPTIMAL";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
    }
    return "unknown";
}

namespace {

double q_norm_of(const Eigen::VectorXd& probs, const Eigen::VectorXd& u, double q) {
    return std::pow((probs.array() * u.array().abs().pow(q)).sum(), 1.0 / q);
}

} // namespace

VerificationReport verify(const CandidateMeasure& candidate, const ScenarioMarket& market,
                          const GainBasis& basis, const VerifyOptions& opts) {
    conjugate_exponent(candidate.q);
    const int n = market.n_states();
    if (candidate.g_star.size() != n)
        throw std::invalid_argument("candidate has the wrong number of states");
    const double mu = market.probs.dot(candidate.g_star);
    if (!(mu > 0.0)) throw std::invalid_argument("candidate has E[g*] <= 0");

    VerificationReport report;
    const Eigen::VectorXd u_cand = candidate.g_star / mu;
    report.candidate_q_norm = q_norm_of(market.probs, u_cand, candidate.q);

    // A candidate outside M^s cannot be the optimal element of M^s.
    double ms_residual = 0.0;
    for (int j = 0; j < basis.n_columns(); ++j) {
        const double moment =
            (market.probs.array() * u_cand.array() * basis.matrix.col(j).array()).sum();
        ms_residual = std::max(ms_residual, std::abs(moment));
    }
    if (ms_residual > opts.ms_tol) {
        report.membership_residual = ms_residual;
        report.verdict = Verdict::NotOptimal;
        report.reason = "candidate is not a signed martingale measure (max gain moment " +
                        std::to_string(ms_residual) + ")";
        return report;
    }

    const Eigen::ArrayXd gs = candidate.g_star.array();
    const Eigen::VectorXd w = (gs.sign() * gs.abs().pow(candidate.q - 1.0)).matrix();

    // Exact quantifier on a finite tree: E_Q[w] = 1 for every Q in the
    // affine set iff w lies in span{1, gains} and E_{Q_cand}[w] = 1.
    const int m = basis.n_columns();
    Eigen::MatrixXd S(n, 1 + m);
    S.col(0).setOnes();
    S.rightCols(m) = basis.matrix;
    const Eigen::VectorXd sqrt_p = market.probs.array().sqrt().matrix();
    const Eigen::MatrixXd WS = sqrt_p.asDiagonal() * S;
    const Eigen::VectorXd Ww = sqrt_p.asDiagonal() * w;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(WS, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(opts.rank_tol);
    report.membership_residual = (WS * svd.solve(Ww) - Ww).norm();

    report.normalization_residual =
        std::abs((market.probs.array() * u_cand.array() * w.array()).sum() - 1.0);

    // Randomized spot check of the same quantifier, independent of the
    // subspace reduction.
    const MartingaleAffineSet affine = martingale_affine_set(market, basis, opts.rank_tol);
    const int k = affine.k();
    if (k > 0 && opts.n_samples > 0) {
        std::mt19937_64 rng(opts.seed);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        std::uniform_real_distribution<double> radius(0.0, 1.0);
        for (int s = 0; s < opts.n_samples; ++s) {
            Eigen::VectorXd z(k);
            for (int i = 0; i < k; ++i) z[i] = unit(rng);
            Eigen::VectorXd dir = affine.V * z;
            const double extent = dir.array().abs().maxCoeff();
            if (extent > 0.0) dir *= opts.sample_box * radius(rng) / extent;
            const Eigen::VectorXd u = affine.u0 + dir;
            const double moment = (market.probs.array() * u.array() * w.array()).sum();
            report.sampled_max_residual =
                std::max(report.sampled_max_residual, std::abs(moment - 1.0));
        }
    }

    const double worst = std::max({report.membership_residual, report.normalization_residual,
                                   report.sampled_max_residual});
    if (worst <= opts.optimal_tol) {
        report.verdict = Verdict::Optimal;
        report.reason = "unit expectation holds across the whole measure class";
    } else if (worst >= opts.reject_tol) {
        report.verdict = Verdict::NotOptimal;
        if (report.membership_residual >= opts.reject_tol)
            report.reason = "sgn(g*)|g*|^{q-1} leaves the span of {1, gains}";
        else if (report.normalization_residual >= opts.reject_tol)
            report.reason = "expectation under the candidate itself is off 1";
        else
            report.reason = "a sampled martingale measure gives expectation off 1";
    } else {
        report.verdict = Verdict::Inconclusive;
        report.reason = "worst residual " + std::to_string(worst) +
                        " sits between the optimal and rejection thresholds";
    }
    return report;
}

CandidateMeasure self_consistent_candidate(const ScenarioMarket& market, const DensityVector& u,
                                           double q) {
    conjugate_exponent(q);
    const double q_moment = (market.probs.array() * u.values.array().abs().pow(q)).sum();
    if (!(q_moment > 0.0)) throw std::invalid_argument("density is identically zero");

    // With g* = s u, E_{Q_cand}[sgn(g*)|g*|^{q-1}] = s^{q-1} E[|u|^q]; this
    // scale makes the candidate's own normalization test pass exactly.
    const double s = std::pow(q_moment, -1.0 / (q - 1.0));
    CandidateMeasure candidate;
    candidate.g_star = s * u.values;
    candidate.q = q;
    return candidate;
}

namespace {

double line_objective(const Eigen::VectorXd& probs, const Eigen::VectorXd& u0,
                      const Eigen::MatrixXd& V, Eigen::VectorXd& z, int coord, double value,
                      double q) {
    const double saved = z[coord];
    z[coord] = value;
    const double obj = (probs.array() * (u0 + V * z).array().abs().pow(q)).sum();
    z[coord] = saved;
    return obj;
}

double golden_section(const Eigen::VectorXd& probs, const Eigen::VectorXd& u0,
                      const Eigen::MatrixXd& V, Eigen::VectorXd& z, int coord, double lo,
                      double hi, double q, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = line_objective(probs, u0, V, z, coord, c, q);
    double fd = line_objective(probs, u0, V, z, coord, d, q);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = line_objective(probs, u0, V, z, coord, c, q);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = line_objective(probs, u0, V, z, coord, d, q);
        }
    }
    return 0.5 * (a + b);
}

} // namespace

DensityVector brute_force_oracle(const ScenarioMarket& market, const GainBasis& basis, double q,
                                 const GridOptions& opts) {
    conjugate_exponent(q);
    const MartingaleAffineSet affine = martingale_affine_set(market, basis);
    const int k = affine.k();
    if (k > 3)
        throw std::invalid_argument("grid oracle supports affine dimension <= 3, got " +
                                    std::to_string(k));

    DensityVector best;
    best.reference = market.probs;
    if (k == 0) {
        best.values = affine.u0;
        return best;
    }

    double lo = opts.lo, hi = opts.hi;
    if (opts.auto_bounds) {
        // z = 0 is feasible, so the optimum obeys ||V z||_2 <= 2 ||u0||_2
        // in L^2; pad generously for small-probability states.
        const double radius = 4.0 * (1.0 + affine.u0.norm());
        lo = -radius;
        hi = radius;
    }
    if (!(hi > lo)) throw std::invalid_argument("empty search box");

    const int pts = std::max(2, opts.points);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd best_z = z;
    double best_obj = (market.probs.array() * affine.u0.array().abs().pow(q)).sum();

    std::vector<int> idx(k, 0);
    const int total = static_cast<int>(std::pow(pts, k));
    for (int flat = 0; flat < total; ++flat) {
        int rem = flat;
        for (int i = 0; i < k; ++i) {
            idx[i] = rem % pts;
            rem /= pts;
            z[i] = lo + (hi - lo) * idx[i] / (pts - 1);
        }
        const double obj = (market.probs.array() * (affine.u0 + affine.V * z).array().abs().pow(q)).sum();
        if (obj < best_obj) {
            best_obj = obj;
            best_z = z;
        }
    }

    z = best_z;
    double window = (hi - lo) / (pts - 1);
    for (int sweep = 0; sweep < opts.refine_sweeps; ++sweep) {
        const Eigen::VectorXd prev = z;
        double moved = 0.0;
        for (int i = 0; i < k; ++i) {
            const double zi = golden_section(market.probs, affine.u0, affine.V, z, i,
                                             z[i] - window, z[i] + window, q, opts.coord_tol);
            moved = std::max(moved, std::abs(zi - z[i]));
            z[i] = zi;
        }

        // Line search along the sweep's composite move; plain coordinate
        // descent crawls in correlated valleys.
        const Eigen::VectorXd dir = z - prev;
        const double dn = dir.norm();
        if (dn > 0.0) {
            const auto along = [&](double t) {
                return (market.probs.array() *
                        (affine.u0 + affine.V * (prev + t * dir)).array().abs().pow(q))
                    .sum();
            };
            const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
            double a = 0.0, b = 4.0;
            double c = b - inv_phi * (b - a);
            double d = a + inv_phi * (b - a);
            double fc = along(c);
            double fd = along(d);
            const double tol_t = opts.coord_tol / std::max(dn, opts.coord_tol);
            while (b - a > tol_t) {
                if (fc < fd) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - inv_phi * (b - a);
                    fc = along(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + inv_phi * (b - a);
                    fd = along(d);
                }
            }
            z = prev + 0.5 * (a + b) * dir;
        }

        // A move at the bracket edge means the window clipped the line
        // minimum; otherwise track the observed step scale.
        if (moved >= 0.45 * window)
            window *= 2.0;
        else
            window = std::max({4.0 * moved, 0.25 * window, 64.0 * opts.coord_tol});
        if (moved <= opts.coord_tol) break;
    }

    best.values = affine.u0 + affine.V * z;
    return best;
}

} // namespace qopt
