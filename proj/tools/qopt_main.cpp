#include "qopt/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonOut {
    std::string out_path;
    bool json = false;
};

void add_output_options(CLI::App* cmd, CommonOut& out) {
    cmd->add_option("--out", out.out_path, "also write the report to this file");
    cmd->add_flag("--json", out.json, "emit JSON instead of the text report");
}

int deliver(const qopt::CommandResult& result, const CommonOut& out) {
    const std::string& body = out.json ? result.json : result.report;
    std::cout << body;
    if (!out.out_path.empty()) {
        try {
            qopt::write_file(out.out_path, body);
        } catch (const std::exception& e) {
            std::cerr << e.what() << "\n";
            return qopt::kExitUsage;
        }
    }
    return result.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"q-optimal signed martingale measures: solve, verify, sweep, simulate, oracle"};
    app.require_subcommand(1);

    // solve
    auto* solve = app.add_subcommand("solve", "compute the q-optimal measure of a market file");
    std::string solve_market;
    qopt::SolveCommandOptions solve_opts;
    double solve_q = 2.0;
    CommonOut solve_out;
    solve->add_option("market", solve_market, "market file")->required();
    solve->add_option("--q", solve_q, "norm exponent, q > 1")->capture_default_str();
    solve->add_option("--tol", solve_opts.solve.tol, "gradient tolerance")->capture_default_str();
    solve->add_option("--max-iter", solve_opts.solve.max_iter, "iteration budget")
        ->capture_default_str();
    solve->add_option("--seed", solve_opts.verify.seed, "seed for the verification sampler")
        ->capture_default_str();
    solve->add_option("--emit-candidate", solve_opts.emit_candidate_path,
                      "write g* to this candidate file");
    add_output_options(solve, solve_out);

    // verify
    auto* verify = app.add_subcommand("verify", "test a candidate measure for optimality");
    std::string verify_market, verify_candidate;
    double verify_q = 0.0;
    qopt::VerifyOptions verify_opts;
    CommonOut verify_out;
    verify->add_option("market", verify_market, "market file")->required();
    verify->add_option("candidate", verify_candidate, "candidate file")->required();
    auto* verify_q_opt = verify->add_option("--q", verify_q, "override the candidate's exponent");
    verify->add_option("--seed", verify_opts.seed, "seed for the sampling quantifier")
        ->capture_default_str();
    add_output_options(verify, verify_out);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "solve one market across several exponents");
    std::string sweep_market;
    std::vector<double> sweep_qs;
    qopt::SolveCommandOptions sweep_opts;
    CommonOut sweep_out;
    sweep->add_option("market", sweep_market, "market file")->required();
    sweep->add_option("--q", sweep_qs, "comma-separated exponents")->delimiter(',');
    sweep->add_option("--tol", sweep_opts.solve.tol, "gradient tolerance")->capture_default_str();
    sweep->add_option("--max-iter", sweep_opts.solve.max_iter, "iteration budget")
        ->capture_default_str();
    sweep->add_option("--seed", sweep_opts.verify.seed, "seed for the verification sampler")
        ->capture_default_str();
    add_output_options(sweep, sweep_out);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo checks for a diffusion spec");
    std::string sim_spec;
    qopt::SimulateCommandOptions sim_opts;
    CommonOut sim_out;
    simulate->add_option("spec", sim_spec, "diffusion spec file")->required();
    simulate->add_option("--paths", sim_opts.n_paths, "number of paths")->capture_default_str();
    simulate->add_option("--steps", sim_opts.n_steps, "time steps")->capture_default_str();
    simulate->add_option("--seed", sim_opts.seed, "stream seed")->capture_default_str();
    simulate->add_flag("--serial", [&](std::int64_t) { sim_opts.sim.parallel = false; },
                       "disable the parallel path loop");
    simulate->add_flag("--no-antithetic", [&](std::int64_t) { sim_opts.sim.antithetic = false; },
                       "plain sampling instead of antithetic pairs");
    add_output_options(simulate, sim_out);

    // oracle
    auto* oracle = app.add_subcommand("oracle", "brute-force the optimal density, compare solver");
    std::string oracle_market;
    double oracle_q = 2.0;
    qopt::OracleCommandOptions oracle_opts;
    CommonOut oracle_out;
    oracle->add_option("market", oracle_market, "market file")->required();
    oracle->add_option("--q", oracle_q, "norm exponent, q > 1")->capture_default_str();
    oracle->add_option("--tol", oracle_opts.solve.tol, "solver gradient tolerance")
        ->capture_default_str();
    add_output_options(oracle, oracle_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : qopt::kExitUsage;
    }

    try {
        if (solve->parsed()) {
            solve_opts.want_json = solve_out.json;
            return deliver(qopt::cmd_solve(solve_market, solve_q, solve_opts), solve_out);
        }
        if (verify->parsed()) {
            std::optional<double> q_override;
            if (verify_q_opt->count() > 0) q_override = verify_q;
            return deliver(qopt::cmd_verify(verify_market, verify_candidate, q_override,
                                            verify_opts, verify_out.json),
                           verify_out);
        }
        if (sweep->parsed()) {
            sweep_opts.want_json = sweep_out.json;
            return deliver(qopt::cmd_sweep(sweep_market, sweep_qs, sweep_opts), sweep_out);
        }
        if (simulate->parsed()) {
            sim_opts.want_json = sim_out.json;
            return deliver(qopt::cmd_simulate(sim_spec, sim_opts), sim_out);
        }
        if (oracle->parsed()) {
            oracle_opts.want_json = oracle_out.json;
            return deliver(qopt::cmd_oracle(oracle_market, oracle_q, oracle_opts), oracle_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return qopt::kExitUsage;
    }
    return qopt::kExitUsage;
}
