#include "qopt/pipeline.hpp"

#include "qopt/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace qopt {

SolveRun run_solve(const ScenarioMarket& market, double q, const SolveOptions& opts,
                   const VerifyOptions& verify_opts) {
    SolveRun run;
    run.basis = gain_basis(market);
    run.affine = martingale_affine_set(market, run.basis, opts.rank_tol);
    run.dual = dual_project(market, run.basis, q, opts);
    run.primal = primal_minimize(market, run.affine, q, opts);
    run.duality = duality_certificate(run.dual, run.primal);
    run.solution = assemble(market, run.dual, q);
    run.consistency = mu_consistency(market, run.solution);
    run.power_identity = g_power_identity(market, run.dual);
    run.verification = verify({run.solution.g_star, q}, market, run.basis, verify_opts);
    return run;
}

namespace {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::string join_values(const Eigen::VectorXd& v) {
    std::ostringstream out;
    for (int i = 0; i < v.size(); ++i) {
        if (i) out << " ";
        out << fmt17(v[i]);
    }
    return out.str();
}

void add_input(RunReport& report, const std::string& path, const std::string& bytes) {
    report.line("input", path);
    report.line("input_digest", content_digest(bytes));
}

void add_market_shape(RunReport& report, const ScenarioMarket& market) {
    report.integer("states", market.n_states());
    report.integer("assets", market.n_assets);
    report.integer("horizon", market.horizon);
}

CommandResult finish(RunReport& report, int exit_code, const Stopwatch& watch, bool want_json) {
    report.number("wall_clock_ms", watch.ms());
    CommandResult result;
    result.exit_code = exit_code;
    result.report = report.text();
    if (want_json) result.json = report.json();
    return result;
}

// Exit-code mapping shared by every command: 1 parse/usage, 2 infeasible,
// 3 non-convergence.
template <typename Fn>
CommandResult guarded(RunReport& report, const Stopwatch& watch, bool want_json, Fn&& body) {
    try {
        return body();
    } catch (const ParseError& e) {
        report.line("error", e.what());
        return finish(report, kExitUsage, watch, want_json);
    } catch (const InfeasibleMarketError& e) {
        report.line("error", e.what());
        return finish(report, kExitInfeasible, watch, want_json);
    } catch (const ConvergenceError& e) {
        report.line("error", e.what());
        report.number("error_grad_norm", e.grad_norm());
        report.integer("error_iterations", e.iterations());
        return finish(report, kExitNoConvergence, watch, want_json);
    } catch (const std::invalid_argument& e) {
        report.line("error", e.what());
        return finish(report, kExitUsage, watch, want_json);
    } catch (const std::runtime_error& e) {
        // unreadable files and other environment failures
        report.line("error", e.what());
        return finish(report, kExitUsage, watch, want_json);
    }
}

void add_solve_body(RunReport& report, const SolveRun& run, const VerifyOptions& verify_opts) {
    report.integer("gain_columns", run.basis.n_columns());
    report.integer("affine_dim", run.affine.k());
    report.number("q", run.solution.q);
    report.number("p", run.solution.p);
    report.integer("dual_iterations", run.dual.iterations);
    report.number("dual_grad_norm", run.dual.grad_norm);
    report.number("p_norm", run.dual.p_norm);
    report.integer("primal_iterations", run.primal.iterations);
    report.number("primal_grad_norm", run.primal.grad_norm);
    report.number("q_norm", run.solution.q_norm);
    report.number("mu", run.solution.mu);
    report.line("classification", to_string(run.solution.classification));
    report.line("g_star", join_values(run.solution.g_star));
    report.line("density", join_values(run.solution.density.values));

    const double solver_gap =
        (run.solution.density.values - run.primal.u.values).array().abs().maxCoeff();

    report.check("duality_product", run.duality.product_gap, run.duality.tol, run.duality.pass);
    report.check("primal_dual_density_gap", solver_gap, 1e-6, solver_gap <= 1e-6);
    report.check("mu_identity", run.consistency.mu_gap, run.consistency.tol,
                 run.consistency.mu_gap <= run.consistency.tol);
    report.check("moment_identity", run.consistency.moment_gap, run.consistency.tol,
                 run.consistency.moment_gap <= run.consistency.tol);
    report.check("power_identity", run.power_identity.gap, run.power_identity.tol,
                 run.power_identity.pass);
    report.check("verify_membership", run.verification.membership_residual,
                 verify_opts.optimal_tol,
                 run.verification.membership_residual <= verify_opts.optimal_tol);
    report.check("verify_normalization", run.verification.normalization_residual,
                 verify_opts.optimal_tol,
                 run.verification.normalization_residual <= verify_opts.optimal_tol);
    report.check("verify_sampled", run.verification.sampled_max_residual, verify_opts.optimal_tol,
                 run.verification.sampled_max_residual <= verify_opts.optimal_tol);
    report.line("verdict", to_string(run.verification.verdict));
}

} // namespace

CommandResult cmd_solve(const std::string& market_path, double q, const SolveCommandOptions& opts) {
    Stopwatch watch;
    RunReport report;
    std::ostringstream echo;
    echo << market_path << " --q " << fmt17(q) << " --tol " << fmt17(opts.solve.tol)
         << " --max-iter " << opts.solve.max_iter << " --seed " << opts.verify.seed;
    report.line("command", "solve " + echo.str());

    return guarded(report, watch, opts.want_json, [&]() {
        const std::string bytes = read_file(market_path);
        add_input(report, market_path, bytes);
        const ScenarioMarket market = parse_market(bytes, market_path);
        add_market_shape(report, market);

        const SolveRun run = run_solve(market, q, opts.solve, opts.verify);
        add_solve_body(report, run, opts.verify);

        if (!opts.emit_candidate_path.empty()) {
            write_file(opts.emit_candidate_path, serialize_candidate({run.solution.g_star, q}));
            report.line("candidate_written", opts.emit_candidate_path);
        }

        const bool ok =
            report.all_checks_pass() && run.verification.verdict == Verdict::Optimal;
        return finish(report, ok ? kExitOk : kExitVerificationFailed, watch, opts.want_json);
    });
}

CommandResult cmd_verify(const std::string& market_path, const std::string& candidate_path,
                         std::optional<double> q_override, const VerifyOptions& opts,
                         bool want_json) {
    Stopwatch watch;
    RunReport report;
    std::ostringstream echo;
    echo << market_path << " " << candidate_path;
    if (q_override) echo << " --q " << fmt17(*q_override);
    echo << " --seed " << opts.seed;
    report.line("command", "verify " + echo.str());

    return guarded(report, watch, want_json, [&]() {
        const std::string market_bytes = read_file(market_path);
        add_input(report, market_path, market_bytes);
        const ScenarioMarket market = parse_market(market_bytes, market_path);
        add_market_shape(report, market);

        const std::string cand_bytes = read_file(candidate_path);
        report.line("candidate", candidate_path);
        report.line("candidate_digest", content_digest(cand_bytes));
        CandidateMeasure candidate = parse_candidate(cand_bytes, candidate_path);
        if (q_override) candidate.q = *q_override;
        report.number("q", candidate.q);

        if (candidate.g_star.size() != market.n_states())
            throw std::invalid_argument("candidate lists " +
                                        std::to_string(candidate.g_star.size()) +
                                        " values but the market has " +
                                        std::to_string(market.n_states()) + " states");

        const GainBasis basis = gain_basis(market);
        const double mu = market.probs.dot(candidate.g_star);
        report.number("candidate_mu", mu);
        if (!(mu > 0.0)) {
            report.line("verdict", to_string(Verdict::NotOptimal));
            report.line("reason", "E[g*] <= 0, no normalized density exists");
            return finish(report, kExitVerificationFailed, watch, want_json);
        }

        const VerificationReport vr = verify(candidate, market, basis, opts);
        report.number("candidate_q_norm", vr.candidate_q_norm);
        report.check("verify_membership", vr.membership_residual, opts.optimal_tol,
                     vr.membership_residual <= opts.optimal_tol);
        report.check("verify_normalization", vr.normalization_residual, opts.optimal_tol,
                     vr.normalization_residual <= opts.optimal_tol);
        report.check("verify_sampled", vr.sampled_max_residual, opts.optimal_tol,
                     vr.sampled_max_residual <= opts.optimal_tol);
        report.line("verdict", to_string(vr.verdict));
        report.line("reason", vr.reason);

        return finish(report, vr.verdict == Verdict::Optimal ? kExitOk : kExitVerificationFailed,
                      watch, want_json);
    });
}

CommandResult cmd_sweep(const std::string& market_path, const std::vector<double>& q_list,
                        const SolveCommandOptions& opts) {
    Stopwatch watch;
    RunReport report;
    std::ostringstream echo;
    echo << market_path << " --q ";
    for (std::size_t i = 0; i < q_list.size(); ++i) {
        if (i) echo << ",";
        echo << fmt17(q_list[i]);
    }
    report.line("command", "sweep " + echo.str());

    return guarded(report, watch, opts.want_json, [&]() {
        if (q_list.empty()) throw std::invalid_argument("no exponents given; pass --q q1,q2,...");
        const std::string bytes = read_file(market_path);
        add_input(report, market_path, bytes);
        const ScenarioMarket market = parse_market(bytes, market_path);
        add_market_shape(report, market);

        std::vector<double> qs = q_list;
        std::sort(qs.begin(), qs.end());
        report.line("columns", "q p_norm q_norm mu classification duality verdict");

        bool all_ok = true;
        std::vector<double> q_norms;
        for (double q : qs) {
            const SolveRun run = run_solve(market, q, opts.solve, opts.verify);
            const bool row_ok =
                run.duality.pass && run.verification.verdict == Verdict::Optimal;
            all_ok = all_ok && row_ok;
            q_norms.push_back(run.solution.q_norm);
            std::ostringstream row;
            row << fmt17(q) << " " << fmt17(run.dual.p_norm) << " " << fmt17(run.solution.q_norm)
                << " " << fmt17(run.solution.mu) << " " << to_string(run.solution.classification)
                << " " << (run.duality.pass ? "PASS" : "FAIL") << " "
                << to_string(run.verification.verdict);
            report.line("row", row.str());
        }

        // ||u||_q grows with q for fixed u, so the optimal norm cannot drop.
        double worst_drop = 0.0;
        for (std::size_t i = 1; i < q_norms.size(); ++i)
            worst_drop = std::max(worst_drop, q_norms[i - 1] - q_norms[i]);
        report.check("q_norm_monotone", worst_drop, 1e-10, worst_drop <= 1e-10);

        all_ok = all_ok && report.all_checks_pass();
        return finish(report, all_ok ? kExitOk : kExitVerificationFailed, watch, opts.want_json);
    });
}

CommandResult cmd_simulate(const std::string& spec_path, const SimulateCommandOptions& opts) {
    Stopwatch watch;
    RunReport report;
    std::ostringstream echo;
    echo << spec_path << " --paths " << opts.n_paths << " --steps " << opts.n_steps << " --seed "
         << opts.seed;
    report.line("command", "simulate " + echo.str());

    return guarded(report, watch, opts.want_json, [&]() {
        const std::string bytes = read_file(spec_path);
        add_input(report, spec_path, bytes);
        const DiffusionPreset preset = parse_diffusion(bytes, spec_path);

        report.line("preset", preset.preset);
        for (const auto& [key, value] : preset.params) report.number(key, value);
        report.integer("paths", opts.n_paths);
        report.integer("steps", opts.n_steps);
        report.integer("seed", static_cast<long long>(opts.seed));
        report.line("antithetic", opts.sim.antithetic ? "on" : "off");

        const double q = preset.spec.q;
        const ChMonteCarloResult mc =
            ch_monte_carlo(preset.spec, nullptr, opts.n_paths, opts.n_steps, opts.seed, opts.sim);
        report.number("ch_estimate", mc.estimate.value);
        report.number("ch_std_error", mc.estimate.std_error);
        report.number("ch_p_power", mc.p_power_estimate.value);
        report.number("ch_p_power_std_error", mc.p_power_estimate.std_error);

        // The two powers of the same exponential target one constant; their
        // sample means differ by noise only.
        const double remark_tol = 3.0 * mc.mean_gap_std_error + 1e-12;
        report.check("remark_identity", std::abs(mc.mean_gap), remark_tol,
                     std::abs(mc.mean_gap) <= remark_tol);

        if (preset.lambda_is_deterministic) {
            const double dt = preset.spec.T / opts.n_steps;
            double k_grid = 0.0;
            for (int k = 0; k < opts.n_steps; ++k) {
                const double l = preset.lambda_deterministic(k * dt);
                k_grid += l * l * dt;
            }
            const double closed = ch_deterministic(preset.lambda_deterministic, q, preset.spec.T,
                                                   std::max(2048, 4 * opts.n_steps));
            report.number("ch_closed_form", closed);
            const double ch_tol = 3.0 * mc.estimate.std_error + std::abs(closed - 0.5 * q * k_grid);
            report.check("ch_vs_closed_form", std::abs(mc.estimate.value - closed), ch_tol,
                         std::abs(mc.estimate.value - closed) <= ch_tol);

            const double pathwise = pathwise_identity_check(preset.spec, opts.n_paths, opts.n_steps,
                                                            opts.seed, opts.sim);
            report.check("pathwise_identity", pathwise, 1e-10, pathwise <= 1e-10);

            // eta = 0, xi = 0, c = exp((q/2) sum lambda^2 dt) solves the
            // density representation when lambda is deterministic.
            const ResidualStats fr =
                fundamental_eq_residual(preset.spec, nullptr, nullptr, std::exp(0.5 * q * k_grid),
                                        opts.n_paths, opts.n_steps, opts.seed, opts.sim);
            report.check("fundamental_eq", fr.max_abs, 1e-10, fr.max_abs <= 1e-10);
        } else if (preset.rho_zero) {
            const std::uint64_t y_seed = opts.seed + 1;
            const ChEstimate y_only = ch_tradeoff_monte_carlo(preset.spec, opts.n_paths,
                                                              opts.n_steps, y_seed, opts.sim);
            report.integer("y_only_seed", static_cast<long long>(y_seed));
            report.number("ch_y_only", y_only.value);
            report.number("ch_y_only_std_error", y_only.std_error);
            const double combined =
                std::sqrt(mc.estimate.std_error * mc.estimate.std_error +
                          y_only.std_error * y_only.std_error);
            const double gap = std::abs(mc.estimate.value - y_only.value);
            report.check("trade_off_cross_check", gap, 3.0 * combined, gap <= 3.0 * combined);
        }

        return finish(report, report.all_checks_pass() ? kExitOk : kExitVerificationFailed, watch,
                      opts.want_json);
    });
}

CommandResult cmd_oracle(const std::string& market_path, double q,
                         const OracleCommandOptions& opts) {
    Stopwatch watch;
    RunReport report;
    report.line("command", "oracle " + market_path + " --q " + fmt17(q));

    return guarded(report, watch, opts.want_json, [&]() {
        const std::string bytes = read_file(market_path);
        add_input(report, market_path, bytes);
        const ScenarioMarket market = parse_market(bytes, market_path);
        add_market_shape(report, market);
        report.number("q", q);

        const GainBasis basis = gain_basis(market);
        const DensityVector oracle = brute_force_oracle(market, basis, q, opts.grid);
        const PrimalResult primal = primal_minimize(market, basis, q, opts.solve);

        const double oracle_norm =
            std::pow((market.probs.array() * oracle.values.array().abs().pow(q)).sum(), 1.0 / q);
        report.number("oracle_q_norm", oracle_norm);
        report.number("solver_q_norm", primal.q_norm);
        report.line("oracle_density", join_values(oracle.values));
        report.line("solver_density", join_values(primal.u.values));

        const double gap = (oracle.values - primal.u.values).array().abs().maxCoeff();
        report.check("oracle_match", gap, 1e-6, gap <= 1e-6);

        return finish(report, report.all_checks_pass() ? kExitOk : kExitVerificationFailed, watch,
                      opts.want_json);
    });
}

} // namespace qopt
