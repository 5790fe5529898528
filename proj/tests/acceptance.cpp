// Exercises every release gate in one binary: per-criterion PASS/FAIL lines,
// nonzero exit when any gate fails.
#include "qopt/pipeline.hpp"

#include "corpus.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

using namespace qopt;
using qopt::testing::CorpusInstance;

namespace {

int g_failures = 0;
int g_index = 0;

void report(const std::string& name, bool pass, const std::string& details) {
    ++g_index;
    if (!pass) ++g_failures;
    std::cout << "criterion " << g_index << " " << name << ": " << (pass ? "PASS" : "FAIL")
              << " (" << details << ")\n";
}

void run_criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
    try {
        const auto [pass, details] = fn();
        report(name, pass, details);
    } catch (const std::exception& err) {
        report(name, false, std::string("exception: ") + err.what());
    }
}

std::string sci(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", x);
    return buf;
}

struct SolvedCase {
    const CorpusInstance* instance;
    double q;
    SolveRun run;
};

std::string drop_clock_lines(const std::string& text) {
    std::istringstream in(text);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("wall_clock", 0) == 0) continue;
        out << line << '\n';
    }
    return out.str();
}

std::string data_file(const std::string& name) {
    return std::string(QOPT_DATA_DIR) + "/" + name;
}

DiffusionSpec constant_spec(double lambda, double q) {
    DiffusionSpec spec;
    spec.q = q;
    spec.sigma = [](double, double, double) { return 1.0; };
    spec.mu = [lambda](double, double, double) { return lambda; };
    return spec;
}

} // namespace

int main() {
    const std::vector<double> exponents = {1.2, 1.5, 2.0, 3.0, 5.0};
    const std::vector<CorpusInstance> corpus = qopt::testing::build_corpus();

    std::vector<SolvedCase> solved;
    std::string solve_failure;
    try {
        for (const CorpusInstance& instance : corpus)
            for (double q : exponents)
                solved.push_back({&instance, q, run_solve(instance.market, q)});
    } catch (const std::exception& err) {
        solve_failure = err.what();
    }

    run_criterion("duality_product", [&]() -> std::pair<bool, std::string> {
        if (!solve_failure.empty()) return {false, "solve failed: " + solve_failure};
        double worst = 0.0;
        for (const SolvedCase& c : solved)
            worst = std::max(worst, std::abs(c.run.solution.q_norm * c.run.dual.p_norm - 1.0));
        const bool pass = corpus.size() >= 20 && worst < 1e-7;
        return {pass, std::to_string(corpus.size()) + " markets x " +
                          std::to_string(exponents.size()) + " exponents, max |q_norm*p_norm - 1| = " +
                          sci(worst)};
    });

    run_criterion("oracle_agreement", [&]() -> std::pair<bool, std::string> {
        if (!solve_failure.empty()) return {false, "solve failed: " + solve_failure};
        double worst = 0.0;
        int n_checked = 0;
        for (const SolvedCase& c : solved) {
            if (c.run.affine.k() > 3) continue;
            const DensityVector oracle =
                brute_force_oracle(c.instance->market, c.run.basis, c.q);
            worst = std::max(worst,
                             (oracle.values - c.run.primal.u.values).cwiseAbs().maxCoeff());
            ++n_checked;
        }
        const bool pass = n_checked > 0 && worst <= 1e-6;
        return {pass, std::to_string(n_checked) + " low-dimension solves, sup density gap = " +
                          sci(worst)};
    });

    run_criterion("verifier_discrimination", [&]() -> std::pair<bool, std::string> {
        if (!solve_failure.empty()) return {false, "solve failed: " + solve_failure};
        int optimal_ok = 0;
        for (const SolvedCase& c : solved)
            if (c.run.verification.verdict == Verdict::Optimal) ++optimal_ok;
        const bool all_optimal = optimal_ok == static_cast<int>(solved.size());

        int rejected = 0, candidates = 0, impostors = 0;
        double min_impostor_residual = std::numeric_limits<double>::infinity();
        for (const SolvedCase& c : solved) {
            if (c.q != 2.0 && c.q != 3.0) continue;
            const ScenarioMarket& market = c.instance->market;

            if (c.run.affine.k() >= 1) {
                DensityVector shifted;
                shifted.reference = market.probs;
                shifted.values = c.run.primal.u.values +
                                 c.run.affine.V * Eigen::VectorXd::Ones(c.run.affine.k());
                const CandidateMeasure impostor =
                    self_consistent_candidate(market, shifted, c.q);
                const VerificationReport vr = verify(impostor, market, c.run.basis);
                ++candidates;
                ++impostors;
                if (vr.verdict == Verdict::NotOptimal)
                    ++rejected;
                min_impostor_residual =
                    std::min(min_impostor_residual, vr.sampled_max_residual);
            }

            CandidateMeasure bumped{c.run.solution.g_star, c.q};
            bumped.g_star[0] *= 1.05;
            const VerificationReport vb = verify(bumped, market, c.run.basis);
            ++candidates;
            if (vb.verdict == Verdict::NotOptimal) ++rejected;

            CandidateMeasure scaled{c.run.solution.g_star * 1.2, c.q};
            const VerificationReport vs = verify(scaled, market, c.run.basis);
            ++candidates;
            if (vs.verdict == Verdict::NotOptimal) ++rejected;
        }
        const bool pass = all_optimal && candidates >= 20 && rejected == candidates &&
                          impostors >= 5 && min_impostor_residual > 1e-3;
        return {pass, std::to_string(optimal_ok) + "/" + std::to_string(solved.size()) +
                          " solutions OPTIMAL, " + std::to_string(rejected) + "/" +
                          std::to_string(candidates) + " candidates rejected, " +
                          std::to_string(impostors) +
                          " self-consistent impostors, min sampled residual = " +
                          sci(min_impostor_residual)};
    });

    run_criterion("internal_identities", [&]() -> std::pair<bool, std::string> {
        if (!solve_failure.empty()) return {false, "solve failed: " + solve_failure};
        double worst_mu = 0.0, worst_moment = 0.0, worst_power = 0.0;
        for (const SolvedCase& c : solved) {
            worst_mu = std::max(worst_mu, c.run.consistency.mu_gap);
            worst_moment = std::max(worst_moment, c.run.consistency.moment_gap);
            worst_power = std::max(worst_power, c.run.power_identity.gap);
        }
        const bool pass = worst_mu < 1e-8 && worst_moment < 1e-8 && worst_power < 1e-8;
        return {pass, "max mu gap = " + sci(worst_mu) + ", max moment gap = " + sci(worst_moment) +
                          ", max power gap = " + sci(worst_power)};
    });

    run_criterion("zero_drift_exactness", [&]() -> std::pair<bool, std::string> {
        if (!solve_failure.empty()) return {false, "solve failed: " + solve_failure};
        double worst = 0.0;
        int n_checked = 0;
        for (const SolvedCase& c : solved) {
            if (!c.instance->zero_drift) continue;
            worst = std::max(worst, std::abs(c.run.solution.q_norm - 1.0));
            ++n_checked;
        }
        const bool pass = n_checked > 0 && worst <= 1e-12;
        return {pass, std::to_string(n_checked) + " driftless solves, max |q_norm - 1| = " +
                          sci(worst)};
    });

    run_criterion("mc_closed_form", [&]() -> std::pair<bool, std::string> {
        const DiffusionSpec spec = constant_spec(0.2, 2.0);
        const ChMonteCarloResult mc = ch_monte_carlo(spec, nullptr, 100000, 200, 42);
        const double err = std::abs(mc.estimate.value - 0.04);
        const bool pass = err <= 3.0 * mc.estimate.std_error && mc.estimate.std_error < 0.002;
        return {pass, "estimate = " + sci(mc.estimate.value) + ", target 0.04, |err| = " +
                          sci(err) + ", se = " + sci(mc.estimate.std_error)};
    });

    run_criterion("pathwise_identity", [&]() -> std::pair<bool, std::string> {
        double worst = 0.0;
        for (int steps : {100, 1000, 2000}) {
            worst = std::max(worst, pathwise_identity_check(constant_spec(0.2, 2.0), 1000, steps, 7));
            worst = std::max(worst, pathwise_identity_check(constant_spec(0.4, 1.5), 1000, steps, 8));
            DiffusionSpec ramp = constant_spec(0.0, 3.0);
            ramp.mu = [](double, double, double t) { return 0.1 + 0.5 * t; };
            worst = std::max(worst, pathwise_identity_check(ramp, 1000, steps, 9));
        }
        const bool pass = worst < 1e-10;
        return {pass, "3 specs x steps {100, 1000, 2000}, 1000 paths, max residual = " + sci(worst)};
    });

    run_criterion("tradeoff_cross_check", [&]() -> std::pair<bool, std::string> {
        DiffusionSpec spec;
        spec.q = 2.0;
        spec.sigma = [](double, double, double) { return 1.0; };
        spec.mu = [](double, double y, double) { return 0.3 + 0.2 * std::sin(y); };
        spec.alpha = [](double y, double) { return -1.0 * y; };
        spec.beta = [](double, double) { return 0.5; };
        spec.rho = [](double) { return 0.0; };
        const ChMonteCarloResult full = ch_monte_carlo(spec, nullptr, 100000, 100, 42);
        const ChEstimate y_only = ch_tradeoff_monte_carlo(spec, 100000, 100, 43);
        const double gap = std::abs(full.estimate.value - y_only.value);
        const double combined = std::sqrt(full.estimate.std_error * full.estimate.std_error +
                                          y_only.std_error * y_only.std_error);
        const bool pass = gap <= 3.0 * combined;
        return {pass, "full = " + sci(full.estimate.value) + ", factor-only = " + sci(y_only.value) +
                          ", |gap| = " + sci(gap) + ", 3 se = " + sci(3.0 * combined)};
    });

    run_criterion("report_determinism", [&]() -> std::pair<bool, std::string> {
        const std::string market_path = data_file("trinomial.market");
        const CommandResult s1 = cmd_solve(market_path, 2.0);
        const CommandResult s2 = cmd_solve(market_path, 2.0);
        const bool solve_equal = drop_clock_lines(s1.report) == drop_clock_lines(s2.report);
        const bool clock_present = s1.report.find("wall_clock_ms") != std::string::npos;

        SimulateCommandOptions opts;
        opts.n_paths = 2000;
        opts.n_steps = 50;
        const std::string spec_path = data_file("constant_lambda.diffusion");
        const CommandResult m1 = cmd_simulate(spec_path, opts);
        const CommandResult m2 = cmd_simulate(spec_path, opts);
        SimulateCommandOptions serial = opts;
        serial.sim.parallel = false;
        const CommandResult m3 = cmd_simulate(spec_path, serial);
        const bool sim_equal = drop_clock_lines(m1.report) == drop_clock_lines(m2.report) &&
                               drop_clock_lines(m1.report) == drop_clock_lines(m3.report);
        const bool pass = solve_equal && clock_present && sim_equal;
        return {pass, std::string("solve reports ") + (solve_equal ? "match" : "differ") +
                          ", simulate reports (parallel and serial) " +
                          (sim_equal ? "match" : "differ")};
    });

    std::cout << (g_failures == 0 ? "acceptance: all criteria passed"
                                  : "acceptance: " + std::to_string(g_failures) + " criteria failed")
              << std::endl;
    return g_failures;
}
