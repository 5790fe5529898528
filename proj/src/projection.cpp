#include "qopt/projection.hpp"

#include "qopt/errors.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qopt {

double conjugate_exponent(double q) {
    if (!(q > 1.0)) throw std::invalid_argument("exponent must satisfy q > 1");
    return q / (q - 1.0);
}

namespace {

struct PoweredFit {
    Eigen::VectorXd x;
    Eigen::VectorXd residual; // a + M x at the minimizer
    double objective = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    std::vector<double> trace;
};

double objective_at(const Eigen::VectorXd& w, double e, const Eigen::VectorXd& r) {
    return (w.array() * r.array().abs().pow(e)).sum();
}

// Minimizes a convex phi over [lo, hi] by golden-section; phi restricted to a
// line through a convex objective is unimodal, so bracketing is safe.
template <typename Phi>
double golden_line(const Phi& phi, double lo, double hi) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - gr * (hi - lo);
    double d = lo + gr * (hi - lo);
    double fc = phi(c);
    double fd = phi(d);
    for (int i = 0; i < 120 && (hi - lo) > 1e-14 * (1.0 + std::abs(hi)); ++i) {
        if (fc <= fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = phi(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = phi(d);
        }
    }
    return 0.5 * (lo + hi);
}

// For e < 2 an optimal residual component may sit near the kink r_i = 0,
// where the curvature |r_i|^(e-2) blows up: the floored Hessian cannot
// represent it and damped Newton stops making resolvable progress while
// the gradient norm is still far from the tolerance. The endgame solves
// the first-order system exactly in augmented variables: on the
// floor-active set the unknown is s_i in place of psi_i, so the
// stationarity block M^T psi = 0 is linear in s and the hard power map
// moves into the consistency block r_i(x) = sgn(s_i) (|s_i|/(e w_i))^m
// with m = 1/(e-1) > 1, which is smooth. Newton on the pair (x, s)
// converges where descent on the objective is trapped. The kink entries
// of the returned residual are written from s, since |r_i|^(e-1) computed
// from a residual of that size would carry no precision.
bool solve_kink_system(const Eigen::VectorXd& w, double e, const Eigen::VectorXd& a,
                       const Eigen::MatrixXd& M, const SolveOptions& opts, Eigen::VectorXd& x,
                       Eigen::VectorXd& r, double& obj, double& grad_norm_out) {
    const int k = static_cast<int>(M.cols());
    std::vector<int> kinks;
    std::vector<int> smooth;
    for (int i = 0; i < static_cast<int>(r.size()); ++i)
        (std::abs(r(i)) <= opts.hessian_floor ? kinks : smooth).push_back(i);
    if (kinks.empty()) return false;
    const int nk = static_cast<int>(kinks.size());

    const double m = 1.0 / (e - 1.0);
    const auto rho = [&](double s, int i) {
        return std::copysign(std::pow(std::abs(s) / (e * w(kinks[i])), m), s);
    };
    const auto residual_norms = [&](const Eigen::VectorXd& xc, const Eigen::VectorXd& sc,
                                    Eigen::VectorXd& f1, Eigen::VectorXd& f2) {
        const Eigen::VectorXd rc = a + M * xc;
        Eigen::VectorXd psi =
            (e * w.array() * rc.array().sign() * rc.array().abs().pow(e - 1.0)).matrix();
        for (int j = 0; j < nk; ++j) psi(kinks[j]) = sc(j);
        f1 = M.transpose() * psi;
        f2.resize(nk);
        for (int j = 0; j < nk; ++j) f2(j) = rc(kinks[j]) - rho(sc(j), j);
    };

    Eigen::VectorXd s(nk);
    for (int j = 0; j < nk; ++j) {
        const int i = kinks[j];
        s(j) = e * w(i) * std::copysign(std::pow(std::abs(r(i)), e - 1.0), r(i));
    }
    Eigen::VectorXd xc = x;
    Eigen::VectorXd f1, f2;
    residual_norms(xc, s, f1, f2);

    // Newton is locally quadratic here, so aim well below the tolerance and
    // let a stalled line search end the loop at whatever was reached.
    for (int it = 0; it < 60; ++it) {
        if (f1.norm() <= 1e-3 * opts.tol && f2.norm() <= 1e-13) break;

        const Eigen::VectorXd rc = a + M * xc;
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(k + nk, k + nk);
        Eigen::ArrayXd diag = Eigen::ArrayXd::Zero(rc.size());
        for (int i : smooth)
            diag(i) = e * (e - 1.0) * w(i) * std::pow(std::abs(rc(i)), e - 2.0);
        J.topLeftCorner(k, k) = M.transpose() * diag.matrix().asDiagonal() * M;
        for (int j = 0; j < nk; ++j) {
            J.block(0, k + j, k, 1) = M.row(kinks[j]).transpose();
            J.block(k + j, 0, 1, k) = M.row(kinks[j]);
            const double as = std::abs(s(j));
            J(k + j, k + j) =
                as > 0.0 ? -m * std::pow(as / (e * w(kinks[j])), m - 1.0) / (e * w(kinks[j]))
                         : 0.0;
        }
        Eigen::VectorXd F(k + nk);
        F.head(k) = f1;
        F.tail(nk) = f2;

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(opts.rank_tol);
        const Eigen::VectorXd delta = svd.solve(-F);

        const double fnorm = F.norm();
        double t = 1.0;
        bool moved = false;
        for (int halvings = 0; halvings < 40; ++halvings) {
            const Eigen::VectorXd xt = xc + t * delta.head(k);
            const Eigen::VectorXd st = s + t * delta.tail(nk);
            Eigen::VectorXd g1, g2;
            residual_norms(xt, st, g1, g2);
            const double gn = std::sqrt(g1.squaredNorm() + g2.squaredNorm());
            if (gn <= (1.0 - 1e-4 * t) * fnorm) {
                xc = xt;
                s = st;
                f1 = g1;
                f2 = g2;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break;
    }

    if (!(f1.norm() <= opts.tol && f2.norm() <= 1e-12)) return false;
    x = xc;
    r = a + M * x;
    for (int j = 0; j < nk; ++j) r(kinks[j]) = rho(s(j), j);
    obj = objective_at(w, e, r);
    grad_norm_out = f1.norm();
    return true;
}

// min over x of sum_i w_i |a_i + (M x)_i|^e for e > 1, by damped Newton.
// The Hessian M^T D M uses D_ii = e(e-1) w_i |r_i|^(e-2); residuals are
// floored when e < 2 so D stays finite. Steps come from a pseudo-inverse,
// so a rank-deficient M still yields the minimum-norm direction.
PoweredFit minimize_powered_residual(const Eigen::VectorXd& w, double e,
                                     const Eigen::VectorXd& a, const Eigen::MatrixXd& M,
                                     const SolveOptions& opts, const char* label) {
    PoweredFit fit;
    const int k = static_cast<int>(M.cols());
    fit.x = Eigen::VectorXd::Zero(k);
    fit.residual = a;
    fit.objective = objective_at(w, e, fit.residual);
    fit.trace.push_back(fit.objective);
    if (k == 0) return fit;

    Eigen::VectorXd x = fit.x;
    Eigen::VectorXd r = fit.residual;
    double obj = fit.objective;
    bool fp_stationary = false;

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        const Eigen::ArrayXd abs_r = r.array().abs();
        const Eigen::ArrayXd sgn = r.array().sign();
        const Eigen::VectorXd psi = (e * w.array() * sgn * abs_r.pow(e - 1.0)).matrix();
        const Eigen::VectorXd grad = M.transpose() * psi;
        const double grad_norm = grad.norm();

        fit.x = x;
        fit.residual = r;
        fit.objective = obj;
        fit.grad_norm = grad_norm;
        fit.iterations = iter;
        if (grad_norm <= opts.tol) return fit;
        if (e < 2.0 && fp_stationary &&
            solve_kink_system(w, e, a, M, opts, x, r, obj, fit.grad_norm)) {
            fit.x = x;
            fit.residual = r;
            fit.objective = obj;
            fit.trace.push_back(obj);
            return fit;
        }

        const Eigen::ArrayXd floored = e < 2.0 ? abs_r.max(opts.hessian_floor) : abs_r;
        const Eigen::VectorXd diag = (e * (e - 1.0) * w.array() * floored.pow(e - 2.0)).matrix();
        const Eigen::MatrixXd H = M.transpose() * diag.asDiagonal() * M;

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(opts.rank_tol);
        Eigen::VectorXd step = svd.solve(-grad);
        double slope = grad.dot(step);
        if (!(slope < 0.0)) {
            step = -grad;
            slope = -grad_norm * grad_norm;
        }

        // Armijo acceptance with slack at the floating-point resolution of
        // the objective; near the minimizer the predicted decrease drops
        // below one ulp and an exact comparison would reject real progress.
        // The doubling pass undoes the capped Hessian undersizing the step
        // near a residual kink, and a golden-section polish moves to the
        // line minimum when the quadratic model missizes the step; the
        // polished point is adopted only when it beats the accepted one by
        // more than the slack, so an exact Newton step survives untouched.
        // Gradient direction is the fallback when the Newton direction
        // yields no acceptable point.
        const double obj_ulp =
            4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(obj));
        bool accepted = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            const Eigen::VectorXd ms = M * step;
            const auto phi = [&](double t) { return objective_at(w, e, r + t * ms); };
            const auto acceptable = [&](double t, double f) {
                return f <= obj + 1e-4 * t * slope + obj_ulp;
            };
            double t1 = 1.0;
            double f1 = phi(t1);
            for (int halvings = 0; halvings < 64 && !acceptable(t1, f1); ++halvings) {
                t1 *= 0.5;
                f1 = phi(t1);
            }
            if (acceptable(t1, f1)) {
                double hi = 2.0 * t1;
                double fhi = phi(hi);
                for (int grows = 0; grows < 60 && fhi < f1 - obj_ulp; ++grows) {
                    t1 = hi;
                    f1 = fhi;
                    hi *= 2.0;
                    fhi = phi(hi);
                }
                const double t_star = golden_line(phi, 0.0, hi);
                const double f_star = phi(t_star);
                if (f_star < f1 - obj_ulp) t1 = t_star;
                const double obj_before = obj;
                x += t1 * step;
                r = a + M * x;
                obj = objective_at(w, e, r);
                fp_stationary = obj_before - obj <= obj_ulp;
                accepted = true;
            } else if (attempt == 0) {
                step = -grad;
                slope = -grad_norm * grad_norm;
            }
        }
        fit.trace.push_back(obj);
        if (!accepted)
            throw ConvergenceError(std::string(label) +
                                       ": line search stalled with gradient norm above tolerance",
                                   x, grad_norm, iter + 1);
    }

    {
        const Eigen::ArrayXd abs_r = r.array().abs();
        const Eigen::VectorXd psi = (e * w.array() * r.array().sign() * abs_r.pow(e - 1.0)).matrix();
        double grad_norm = (M.transpose() * psi).norm();
        if (grad_norm <= opts.tol ||
            (e < 2.0 && solve_kink_system(w, e, a, M, opts, x, r, obj, grad_norm))) {
            fit.x = x;
            fit.residual = r;
            fit.objective = obj;
            fit.grad_norm = grad_norm;
            fit.iterations = opts.max_iter;
            return fit;
        }
        throw ConvergenceError(std::string(label) + ": iteration budget exhausted", x, grad_norm,
                               opts.max_iter);
    }
}

} // namespace

ProjectionResult dual_project(const ScenarioMarket& market, const GainBasis& basis, double q,
                              const SolveOptions& opts) {
    const double p = conjugate_exponent(q);
    const int n = market.n_states();
    if (basis.matrix.rows() != n)
        throw std::invalid_argument("gain basis does not match the market's state count");

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    PoweredFit fit =
        minimize_powered_residual(market.probs, p, ones, -basis.matrix, opts, "dual projection");

    ProjectionResult result;
    result.theta = fit.x;
    result.g = fit.residual;
    result.f = ones - result.g;
    result.p_norm = std::pow(fit.objective, 1.0 / p);
    result.grad_norm = fit.grad_norm;
    result.q = q;
    result.p = p;
    result.iterations = fit.iterations;
    result.objective_trace = std::move(fit.trace);

    if (result.p_norm < opts.degenerate_tol)
        throw InfeasibleMarketError(
            "no signed martingale measure: the distance from 1 to the gain span is " +
                std::to_string(result.p_norm),
            result.p_norm);
    return result;
}

PrimalResult primal_minimize(const ScenarioMarket& market, const MartingaleAffineSet& affine,
                             double q, const SolveOptions& opts) {
    conjugate_exponent(q);
    if (affine.u0.size() != market.n_states())
        throw std::invalid_argument("affine set does not match the market's state count");

    PoweredFit fit =
        minimize_powered_residual(market.probs, q, affine.u0, affine.V, opts, "primal density");

    PrimalResult result;
    result.u.values = fit.residual;
    result.u.reference = market.probs;
    result.q_norm = std::pow(fit.objective, 1.0 / q);
    result.q = q;
    result.z = fit.x;
    result.grad_norm = fit.grad_norm;
    result.iterations = fit.iterations;
    result.objective_trace = std::move(fit.trace);
    return result;
}

PrimalResult primal_minimize(const ScenarioMarket& market, const GainBasis& basis, double q,
                             const SolveOptions& opts) {
    const MartingaleAffineSet affine = martingale_affine_set(market, basis, opts.rank_tol);
    return primal_minimize(market, affine, q, opts);
}

DualityCertificate duality_certificate(const ProjectionResult& dual, const PrimalResult& primal,
                                       double tol) {
    if (std::abs(dual.q - primal.q) > 1e-12)
        throw std::invalid_argument("dual and primal results use different exponents");

    DualityCertificate cert;
    cert.tol = tol;
    cert.gap = std::abs(primal.q_norm - 1.0 / dual.p_norm);
    cert.product_gap = std::abs(primal.q_norm * dual.p_norm - 1.0);
    cert.pass = cert.product_gap <= tol;
    return cert;
}

} // namespace qopt
