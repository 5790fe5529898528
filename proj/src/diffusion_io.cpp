#include "qopt/diffusion_io.hpp"

#include "qopt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace qopt {

namespace {

double to_double(const std::string& file, int line, const std::string& token) {
    std::size_t pos = 0;
    double value = 0.0;
    try {
        value = std::stod(token, &pos);
    } catch (const std::exception&) {
        throw ParseError(file, line, "expected a number, got '" + token + "'");
    }
    if (pos != token.size())
        throw ParseError(file, line, "expected a number, got '" + token + "'");
    return value;
}

TimeFn table_lambda(std::vector<std::pair<double, double>> knots) {
    std::sort(knots.begin(), knots.end());
    return [knots = std::move(knots)](double t) {
        if (t <= knots.front().first) return knots.front().second;
        if (t >= knots.back().first) return knots.back().second;
        std::size_t i = 1;
        while (knots[i].first < t) ++i;
        const auto& [t0, v0] = knots[i - 1];
        const auto& [t1, v1] = knots[i];
        const double w = (t - t0) / (t1 - t0);
        return v0 + w * (v1 - v0);
    };
}

} // namespace

DiffusionPreset parse_diffusion(const std::string& text, const std::string& filename) {
    std::istringstream stream(text);
    std::string raw;
    int number = 0;

    std::string preset;
    std::map<std::string, double> params;
    std::vector<std::pair<double, double>> knots;
    bool saw_format = false, saw_version = false;

    while (std::getline(stream, raw)) {
        ++number;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        std::vector<std::string> tokens;
        std::string token;
        while (ls >> token) tokens.push_back(token);
        if (tokens.empty()) continue;

        const std::string& key = tokens[0];
        if (!saw_format) {
            if (tokens.size() != 2 || key != "format" || tokens[1] != "qopt-diffusion")
                throw ParseError(filename, number, "first line must be 'format qopt-diffusion'");
            saw_format = true;
        } else if (!saw_version) {
            if (tokens.size() != 2 || key != "version")
                throw ParseError(filename, number, "second line must declare a version");
            if (tokens[1] != "1")
                throw ParseError(filename, number,
                                 "unsupported version '" + tokens[1] + "', expected 1");
            saw_version = true;
        } else if (key == "preset") {
            if (tokens.size() != 2) throw ParseError(filename, number, "preset takes one name");
            preset = tokens[1];
        } else if (key == "lambda-at") {
            if (tokens.size() != 3)
                throw ParseError(filename, number, "expected 'lambda-at <time> <value>'");
            knots.emplace_back(to_double(filename, number, tokens[1]),
                               to_double(filename, number, tokens[2]));
        } else {
            if (tokens.size() != 2) throw ParseError(filename, number, key + " takes one value");
            static const char* known[] = {"q",  "maturity", "s0",      "y0",     "sigma",
                                          "rho", "lambda0", "lambda1", "kappa", "beta"};
            if (std::find_if(std::begin(known), std::end(known),
                             [&](const char* k) { return key == k; }) == std::end(known))
                throw ParseError(filename, number, "unknown directive '" + key + "'");
            params[key] = to_double(filename, number, tokens[1]);
        }
    }
    if (!saw_format || !saw_version)
        throw ParseError(filename, number, "missing 'format qopt-diffusion' / 'version 1' header");
    if (preset.empty()) throw ParseError(filename, 0, "missing 'preset'");

    auto value_or = [&](const std::string& key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    auto required = [&](const std::string& key) {
        auto it = params.find(key);
        if (it == params.end())
            throw ParseError(filename, 0, "preset '" + preset + "' needs '" + key + "'");
        return it->second;
    };

    DiffusionPreset out;
    out.preset = preset;
    out.spec.q = value_or("q", 2.0);
    out.spec.T = value_or("maturity", 1.0);
    out.spec.s0 = value_or("s0", 1.0);
    out.spec.y0 = value_or("y0", 0.0);
    const double sigma = value_or("sigma", 1.0);
    const double rho = value_or("rho", 0.0);
    if (!(out.spec.q > 1.0)) throw ParseError(filename, 0, "q must be greater than 1");
    if (!(out.spec.T > 0.0)) throw ParseError(filename, 0, "maturity must be positive");
    if (!(sigma > 0.0)) throw ParseError(filename, 0, "sigma must be positive");
    if (rho < -1.0 || rho > 1.0) throw ParseError(filename, 0, "rho must lie in [-1, 1]");
    out.spec.sigma = [sigma](double, double, double) { return sigma; };
    out.spec.rho = [rho](double) { return rho; };
    out.rho_zero = rho == 0.0;

    TimeFn lambda_t;
    if (preset == "constant") {
        const double l0 = required("lambda0");
        lambda_t = [l0](double) { return l0; };
    } else if (preset == "linear-t") {
        const double l0 = required("lambda0");
        const double l1 = required("lambda1");
        lambda_t = [l0, l1](double t) { return l0 + l1 * t; };
    } else if (preset == "table") {
        if (knots.empty()) throw ParseError(filename, 0, "preset 'table' needs 'lambda-at' rows");
        lambda_t = table_lambda(std::move(knots));
    } else if (preset == "ou-sine") {
        const double l0 = required("lambda0");
        const double l1 = required("lambda1");
        const double kappa = required("kappa");
        const double beta = required("beta");
        out.spec.mu = [l0, l1, sigma](double, double y, double) {
            return (l0 + l1 * std::sin(y)) * sigma;
        };
        out.spec.alpha = [kappa](double y, double) { return -kappa * y; };
        out.spec.beta = [beta](double, double) { return beta; };
        out.lambda_is_deterministic = false;
    } else {
        throw ParseError(filename, 0, "unknown preset '" + preset + "'");
    }
    if (!knots.empty() && preset != "table")
        throw ParseError(filename, 0, "'lambda-at' rows are only valid for preset 'table'");

    if (lambda_t) {
        out.lambda_deterministic = lambda_t;
        out.lambda_is_deterministic = true;
        out.spec.mu = [lambda_t, sigma](double, double, double t) { return lambda_t(t) * sigma; };
        out.spec.alpha = [](double, double) { return 0.0; };
        out.spec.beta = [](double, double) { return 0.0; };
    }
    out.params = std::move(params);
    return out;
}

DiffusionPreset load_diffusion(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, "cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_diffusion(buf.str(), path);
}

} // namespace qopt
