#include "qopt/qoptimal.hpp"

#include <cmath>
#include <stdexcept>

namespace qopt {

const char* to_string(MeasureClass c) {
    switch (c) {
    case MeasureClass::Equivalent: return "equivalent";
    case MeasureClass::AbsolutelyContinuous: return "absolutely-continuous";
    case MeasureClass::Signed: return "signed";
    }
    return "unknown";
}

QOptimalSolution assemble(const ScenarioMarket& market, const ProjectionResult& dual, double q,
                          double pos_tol) {
    if (std::abs(dual.q - q) > 1e-12)
        throw std::invalid_argument("dual result was computed for a different exponent");

    QOptimalSolution sol;
    sol.q = q;
    sol.p = dual.p;

    const Eigen::ArrayXd g = dual.g.array();
    sol.g_star = (g.sign() * g.abs().pow(dual.p - 1.0)).matrix();

    sol.mu = market.probs.dot(sol.g_star);
    if (!(sol.mu > 0.0))
        throw std::runtime_error("E[g*] is not positive; the dual solve did not converge");

    sol.density.values = sol.g_star / sol.mu;
    sol.density.reference = market.probs;
    sol.density.values /= market.probs.dot(sol.density.values);

    sol.q_norm =
        std::pow((market.probs.array() * sol.density.values.array().abs().pow(q)).sum(), 1.0 / q);

    const double scale = sol.density.values.array().abs().maxCoeff();
    const double min_value = sol.density.values.minCoeff();
    if (min_value > pos_tol * scale)
        sol.classification = MeasureClass::Equivalent;
    else if (min_value >= -pos_tol * scale)
        sol.classification = MeasureClass::AbsolutelyContinuous;
    else
        sol.classification = MeasureClass::Signed;
    return sol;
}

ConsistencyReport mu_consistency(const ScenarioMarket& market, const QOptimalSolution& sol,
                                 double tol) {
    ConsistencyReport report;
    report.tol = tol;

    const Eigen::ArrayXd w = market.probs.array();
    const double q_moment_of_g_star = (w * sol.g_star.array().abs().pow(sol.q)).sum();
    report.mu_gap = std::abs(sol.mu - q_moment_of_g_star);

    const double density_q_moment = (w * sol.density.values.array().abs().pow(sol.q)).sum();
    report.moment_gap = std::abs(density_q_moment - std::pow(sol.mu, -sol.q / sol.p));

    report.pass = report.mu_gap <= tol && report.moment_gap <= tol;
    return report;
}

PowerIdentityReport g_power_identity(const ScenarioMarket& market, const ProjectionResult& dual,
                                     double tol) {
    PowerIdentityReport report;
    report.tol = tol;

    const Eigen::ArrayXd w = market.probs.array();
    const Eigen::ArrayXd g = dual.g.array();
    const double lhs = (w * g.abs().pow(dual.p)).sum();
    const double rhs = (w * g.sign() * g.abs().pow(dual.p - 1.0)).sum();
    report.gap = std::abs(lhs - rhs);
    report.pass = report.gap <= tol;
    return report;
}

} // namespace qopt
