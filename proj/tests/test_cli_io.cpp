#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qopt/pipeline.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <unistd.h>
#include <sstream>
#include <string>

using namespace qopt;
namespace fs = std::filesystem;

namespace {

const std::string kTrinomial = "format qopt-market\n"
                               "version 1\n"
                               "horizon 1\n"
                               "assets 1\n"
                               "node 0 parent -1 prices 1\n"
                               "node 1 parent 0 prices 2\n"
                               "node 2 parent 0 prices 1\n"
                               "node 3 parent 0 prices 0.5\n"
                               "state 1 prob 0.333333333333333333\n"
                               "state 2 prob 0.333333333333333333\n"
                               "state 3 prob 0.333333333333333334\n";

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / fs::path("qopt-test-" + std::to_string(::getpid()) +
                                                    "-" + std::to_string(counter()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name, const std::string& content) {
        const std::string p = (path / name).string();
        write_file(p, content);
        return p;
    }
    static int counter() {
        static int n = 0;
        return n++;
    }
};

std::string drop_clock_lines(const std::string& report) {
    std::istringstream in(report);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("wall_clock", 0) == 0) continue;
        out << line << '\n';
    }
    return out.str();
}

bool has_line_starting(const std::string& report, const std::string& prefix) {
    std::istringstream in(report);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(prefix, 0) == 0) return true;
    return false;
}

std::string data_file(const std::string& name) {
    return std::string(QOPT_DATA_DIR) + "/" + name;
}

} // namespace

TEST_CASE("fmt17 output parses back to the identical double") {
    for (double x : {1.0, 1.0 / 3.0, 2.8e-17, -0.1, 123456.789, 5e300, 1e-300}) {
        CHECK(std::stod(fmt17(x)) == x);
    }
    CHECK(fmt17(1.0) == "1");
}

TEST_CASE("market serialization round-trips byte for byte") {
    const ScenarioMarket market = parse_market(kTrinomial, "inline");
    const std::string once = serialize_market(market);
    const ScenarioMarket again = parse_market(once, "reserialized");
    CHECK(serialize_market(again) == once);
    CHECK(again.probs.size() == 3);
    CHECK(again.horizon == 1);
}

TEST_CASE("candidate serialization round-trips byte for byte") {
    CandidateMeasure cand;
    cand.q = 1.5;
    cand.g_star = Eigen::VectorXd(3);
    cand.g_star << 0.6, 1.0, 1.2000000000000002;
    const std::string once = serialize_candidate(cand);
    const CandidateMeasure again = parse_candidate(once, "reserialized");
    CHECK(serialize_candidate(again) == once);
    CHECK(again.g_star[2] == cand.g_star[2]);
}

TEST_CASE("parse errors carry the offending file and line") {
    const std::string bad = "format qopt-market\n"
                            "version 1\n"
                            "horizon 1\n"
                            "assets 1\n"
                            "node 0 parent -1 prices one\n";
    try {
        parse_market(bad, "bad.market");
        FAIL("expected ParseError");
    } catch (const ParseError& err) {
        CHECK(err.file() == "bad.market");
        CHECK(err.line() == 5);
    }

    CHECK_THROWS_AS(parse_market("format qopt-market\nversion 2\n", "v2"), ParseError);
    CHECK_THROWS_AS(parse_market("format qopt-candidate\nversion 1\n", "wrong-format"), ParseError);
    CHECK_THROWS_AS(parse_candidate("format qopt-candidate\nversion 1\nq 1\nvalues 1 1\n", "q1"),
                    ParseError);
}

TEST_CASE("diffusion presets parse with defaults and validation") {
    const DiffusionPreset constant =
        parse_diffusion("format qopt-diffusion\nversion 1\npreset constant\nlambda0 0.2\n", "c");
    CHECK(constant.lambda_is_deterministic);
    CHECK(constant.rho_zero);
    CHECK(constant.lambda_deterministic(0.7) == 0.2);
    CHECK(constant.spec.q == 2.0);
    CHECK(constant.spec.T == 1.0);

    const DiffusionPreset linear = parse_diffusion(
        "format qopt-diffusion\nversion 1\npreset linear-t\nlambda0 0.1\nlambda1 0.3\nq 3\n", "l");
    CHECK(linear.lambda_deterministic(0.5) == doctest::Approx(0.25).epsilon(1e-15));

    const DiffusionPreset table = parse_diffusion("format qopt-diffusion\nversion 1\npreset table\n"
                                                  "lambda-at 0 0.1\nlambda-at 1 0.5\n",
                                                  "t");
    CHECK(table.lambda_deterministic(0.5) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(table.lambda_deterministic(2.0) == doctest::Approx(0.5).epsilon(1e-15)); // clamped

    const DiffusionPreset ou = parse_diffusion(
        "format qopt-diffusion\nversion 1\npreset ou-sine\n"
        "lambda0 0.3\nlambda1 0.2\nkappa 1\nbeta 0.5\nrho 0\n",
        "ou");
    CHECK_FALSE(ou.lambda_is_deterministic);
    CHECK(ou.rho_zero);
    CHECK(ou.spec.mu(1.0, 0.0, 0.0) == doctest::Approx(0.3).epsilon(1e-15));

    CHECK_THROWS_AS(parse_diffusion("format qopt-diffusion\nversion 1\npreset warp\n", "x"),
                    ParseError);
    CHECK_THROWS_AS(
        parse_diffusion("format qopt-diffusion\nversion 1\npreset constant\nfrobnicate 1\n", "x"),
        ParseError);
    CHECK_THROWS_AS(
        parse_diffusion("format qopt-diffusion\nversion 1\npreset constant\nlambda-at 0 1\n", "x"),
        ParseError);
    CHECK_THROWS_AS(
        parse_diffusion("format qopt-diffusion\nversion 1\npreset constant\nq 0.5\n", "x"),
        ParseError);
}

TEST_CASE("solve command succeeds end to end on a well-posed market") {
    TempDir tmp;
    const std::string path = tmp.file("trinomial.market", kTrinomial);
    const CommandResult result = cmd_solve(path, 2.0);
    CHECK(result.exit_code == kExitOk);
    CHECK(has_line_starting(result.report, "verdict OPTIMAL"));
    CHECK(has_line_starting(result.report, "q_norm "));
    CHECK(result.report.find("status FAIL") == std::string::npos);
}

TEST_CASE("solve command reports infeasible markets with exit 2") {
    const std::string text = "format qopt-market\n"
                             "version 1\n"
                             "horizon 1\n"
                             "assets 2\n"
                             "node 0 parent -1 prices 1 1\n"
                             "node 1 parent 0 prices 2 2\n"
                             "node 2 parent 0 prices 0.5 1\n"
                             "state 1 prob 0.5\n"
                             "state 2 prob 0.5\n";
    TempDir tmp;
    const CommandResult result = cmd_solve(tmp.file("infeasible.market", text), 2.0);
    CHECK(result.exit_code == kExitInfeasible);
    CHECK(has_line_starting(result.report, "error "));
}

TEST_CASE("solve command maps parse failures to the usage exit code") {
    TempDir tmp;
    const CommandResult bad = cmd_solve(tmp.file("bad.market", "format what\n"), 2.0);
    CHECK(bad.exit_code == kExitUsage);
    const CommandResult missing = cmd_solve((tmp.path / "nope.market").string(), 2.0);
    CHECK(missing.exit_code == kExitUsage);
}

TEST_CASE("solve command hits the non-convergence exit when starved of iterations") {
    TempDir tmp;
    const std::string path = tmp.file("trinomial.market", kTrinomial);
    SolveCommandOptions opts;
    opts.solve.max_iter = 0;
    const CommandResult result = cmd_solve(path, 3.0, opts);
    CHECK(result.exit_code == kExitNoConvergence);
    CHECK(has_line_starting(result.report, "error "));
}

TEST_CASE("emitted candidates verify as optimal through the verify command") {
    TempDir tmp;
    const std::string market_path = tmp.file("trinomial.market", kTrinomial);
    SolveCommandOptions opts;
    opts.emit_candidate_path = (tmp.path / "out.candidate").string();
    const CommandResult solved = cmd_solve(market_path, 1.5, opts);
    REQUIRE(solved.exit_code == kExitOk);

    const CommandResult verified = cmd_verify(market_path, opts.emit_candidate_path, std::nullopt);
    CHECK(verified.exit_code == kExitOk);
    CHECK(has_line_starting(verified.report, "verdict OPTIMAL"));

    CandidateMeasure cand = load_candidate(opts.emit_candidate_path);
    cand.g_star[0] += 0.05;
    const std::string corrupt_path = tmp.file("corrupt.candidate", serialize_candidate(cand));
    const CommandResult rejected = cmd_verify(market_path, corrupt_path, std::nullopt);
    CHECK(rejected.exit_code == kExitVerificationFailed);
    CHECK(has_line_starting(rejected.report, "verdict NOT-OPTIMAL"));
}

TEST_CASE("verify command rejects size mismatches as usage errors") {
    TempDir tmp;
    const std::string market_path = tmp.file("trinomial.market", kTrinomial);
    const std::string cand_path = tmp.file(
        "short.candidate", "format qopt-candidate\nversion 1\nq 2\nvalues 0.9 1.1\n");
    const CommandResult result = cmd_verify(market_path, cand_path, std::nullopt);
    CHECK(result.exit_code == kExitUsage);
}

TEST_CASE("sweep command emits one row per exponent and a monotonicity check") {
    TempDir tmp;
    const std::string path = tmp.file("trinomial.market", kTrinomial);
    const CommandResult result = cmd_sweep(path, {2.0, 1.2, 5.0});
    CHECK(result.exit_code == kExitOk);
    CHECK(has_line_starting(result.report, "columns q p_norm q_norm"));
    int rows = 0;
    std::istringstream in(result.report);
    std::string line;
    std::vector<double> qs;
    while (std::getline(in, line)) {
        if (line.rfind("row ", 0) == 0) {
            ++rows;
            std::istringstream fields(line.substr(4));
            double q;
            fields >> q;
            qs.push_back(q);
        }
    }
    CHECK(rows == 3);
    REQUIRE(qs.size() == 3);
    CHECK(qs[0] == 1.2);
    CHECK(qs[2] == 5.0);
    CHECK(has_line_starting(result.report, "check q_norm_monotone"));

    const CommandResult empty = cmd_sweep(path, {});
    CHECK(empty.exit_code == kExitUsage);
}

TEST_CASE("simulate command passes its internal checks on a small run") {
    TempDir tmp;
    const std::string path = tmp.file("constant.diffusion",
                                      "format qopt-diffusion\nversion 1\npreset constant\n"
                                      "lambda0 0.2\nq 2\n");
    SimulateCommandOptions opts;
    opts.n_paths = 4000;
    opts.n_steps = 50;
    const CommandResult result = cmd_simulate(path, opts);
    CHECK(result.exit_code == kExitOk);
    CHECK(has_line_starting(result.report, "ch_estimate "));
    CHECK(has_line_starting(result.report, "check ch_vs_closed_form"));
    CHECK(has_line_starting(result.report, "check pathwise_identity"));
    CHECK(result.report.find("status FAIL") == std::string::npos);
}

TEST_CASE("simulate command cross-checks the volatility-factor estimator when rho is zero") {
    TempDir tmp;
    const std::string path = tmp.file("ou.diffusion",
                                      "format qopt-diffusion\nversion 1\npreset ou-sine\n"
                                      "lambda0 0.3\nlambda1 0.2\nkappa 1\nbeta 0.5\nrho 0\n");
    SimulateCommandOptions opts;
    opts.n_paths = 4000;
    opts.n_steps = 50;
    const CommandResult result = cmd_simulate(path, opts);
    CHECK(result.exit_code == kExitOk);
    CHECK(has_line_starting(result.report, "check trade_off_cross_check"));
}

TEST_CASE("repeated runs are byte-identical apart from the clock") {
    TempDir tmp;
    const std::string market_path = tmp.file("trinomial.market", kTrinomial);
    const CommandResult s1 = cmd_solve(market_path, 3.0);
    const CommandResult s2 = cmd_solve(market_path, 3.0);
    CHECK(drop_clock_lines(s1.report) == drop_clock_lines(s2.report));
    CHECK(s1.report.find("wall_clock_ms") != std::string::npos);

    const std::string diff_path = tmp.file("constant.diffusion",
                                           "format qopt-diffusion\nversion 1\npreset constant\n"
                                           "lambda0 0.2\n");
    SimulateCommandOptions base;
    base.n_paths = 1000;
    base.n_steps = 20;
    const CommandResult m1 = cmd_simulate(diff_path, base);
    const CommandResult m2 = cmd_simulate(diff_path, base);
    CHECK(drop_clock_lines(m1.report) == drop_clock_lines(m2.report));

    SimulateCommandOptions serial = base;
    serial.sim.parallel = false;
    const CommandResult m3 = cmd_simulate(diff_path, serial);
    CHECK(drop_clock_lines(m3.report) == drop_clock_lines(m1.report));

    SimulateCommandOptions reseeded = base;
    reseeded.seed = 43;
    const CommandResult m4 = cmd_simulate(diff_path, reseeded);
    CHECK(drop_clock_lines(m4.report) != drop_clock_lines(m1.report));
}

TEST_CASE("json output mirrors the report and parses cleanly") {
    TempDir tmp;
    const std::string path = tmp.file("trinomial.market", kTrinomial);
    SolveCommandOptions opts;
    opts.want_json = true;
    const CommandResult result = cmd_solve(path, 2.0, opts);
    REQUIRE(result.exit_code == kExitOk);
    REQUIRE_FALSE(result.json.empty());
    const nlohmann::json parsed = nlohmann::json::parse(result.json);
    CHECK(parsed.contains("lines"));
    CHECK(parsed["failed_checks"].get<int>() == 0);
    bool saw_verdict = false;
    for (const auto& entry : parsed["lines"]) {
        if (entry["key"] == "verdict") {
            saw_verdict = true;
            CHECK(entry["value"] == "OPTIMAL");
        }
    }
    CHECK(saw_verdict);
}

TEST_CASE("shipped data files load and solve") {
    const ScenarioMarket trinomial = load_market(data_file("trinomial.market"));
    CHECK(trinomial.probs.size() == 3);
    const ScenarioMarket two_period = load_market(data_file("two_period.market"));
    CHECK(two_period.horizon == 2);
    bool infeasible_detected = false;
    try {
        const ScenarioMarket bad = load_market(data_file("infeasible.market"));
        martingale_affine_set(bad, gain_basis(bad));
    } catch (const InfeasibleMarketError&) {
        infeasible_detected = true;
    }
    CHECK(infeasible_detected);
    const DiffusionPreset preset = load_diffusion(data_file("constant_lambda.diffusion"));
    CHECK(preset.lambda_is_deterministic);
    const CommandResult solved = cmd_solve(data_file("binomial.market"), 2.0);
    CHECK(solved.exit_code == kExitOk);
}

TEST_CASE("oracle command agrees with the projection solver") {
    TempDir tmp;
    const std::string path = tmp.file("trinomial.market", kTrinomial);
    const CommandResult result = cmd_oracle(path, 2.0);
    CHECK(result.exit_code == kExitOk);
    CHECK(has_line_starting(result.report, "check oracle_match"));
    CHECK(result.report.find("status FAIL") == std::string::npos);
}
