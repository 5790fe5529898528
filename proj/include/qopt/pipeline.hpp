#pragma once

#include "qopt/diffusion_io.hpp"
#include "qopt/market_io.hpp"
#include "qopt/projection.hpp"
#include "qopt/qoptimal.hpp"
#include "qopt/report.hpp"
#include "qopt/verifier.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qopt {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitNoConvergence = 3;
inline constexpr int kExitVerificationFailed = 4;

struct CommandResult {
    int exit_code = kExitOk;
    std::string report;
    std::string json; // filled when json output was requested
};

/// Full in-memory solve: basis, dual and primal solves, duality certificate,
/// assembly, consistency checks, optimality verification.
struct SolveRun {
    GainBasis basis;
    MartingaleAffineSet affine;
    ProjectionResult dual;
    PrimalResult primal;
    DualityCertificate duality;
    QOptimalSolution solution;
    ConsistencyReport consistency;
    PowerIdentityReport power_identity;
    VerificationReport verification;
};

SolveRun run_solve(const ScenarioMarket& market, double q, const SolveOptions& opts = {},
                   const VerifyOptions& verify_opts = {});

struct SolveCommandOptions {
    SolveOptions solve;
    VerifyOptions verify;
    std::string emit_candidate_path; // write g* as a candidate file when set
    bool want_json = false;
};

CommandResult cmd_solve(const std::string& market_path, double q,
                        const SolveCommandOptions& opts = {});

CommandResult cmd_verify(const std::string& market_path, const std::string& candidate_path,
                         std::optional<double> q_override, const VerifyOptions& opts = {},
                         bool want_json = false);

CommandResult cmd_sweep(const std::string& market_path, const std::vector<double>& q_list,
                        const SolveCommandOptions& opts = {});

struct SimulateCommandOptions {
    int n_paths = 100000;
    int n_steps = 200;
    std::uint64_t seed = 42;
    SimOptions sim;
    bool want_json = false;
};

CommandResult cmd_simulate(const std::string& spec_path, const SimulateCommandOptions& opts = {});

struct OracleCommandOptions {
    GridOptions grid;
    SolveOptions solve;
    bool want_json = false;
};

CommandResult cmd_oracle(const std::string& market_path, double q,
                         const OracleCommandOptions& opts = {});

} // namespace qopt
