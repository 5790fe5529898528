#include "qopt/market_io.hpp"

#include "qopt/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

namespace qopt {

std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

namespace {

struct Line {
    int number = 0;
    std::vector<std::string> tokens;
};

std::vector<Line> tokenize(const std::string& text) {
    std::vector<Line> lines;
    std::istringstream stream(text);
    std::string raw;
    int number = 0;
    while (std::getline(stream, raw)) {
        ++number;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        Line line;
        line.number = number;
        std::string token;
        while (ls >> token) line.tokens.push_back(token);
        if (!line.tokens.empty()) lines.push_back(std::move(line));
    }
    return lines;
}

double to_double(const std::string& file, const Line& line, const std::string& token) {
    std::size_t pos = 0;
    double value = 0.0;
    try {
        value = std::stod(token, &pos);
    } catch (const std::exception&) {
        throw ParseError(file, line.number, "expected a number, got '" + token + "'");
    }
    if (pos != token.size())
        throw ParseError(file, line.number, "expected a number, got '" + token + "'");
    return value;
}

long to_long(const std::string& file, const Line& line, const std::string& token) {
    std::size_t pos = 0;
    long value = 0;
    try {
        value = std::stol(token, &pos);
    } catch (const std::exception&) {
        throw ParseError(file, line.number, "expected an integer, got '" + token + "'");
    }
    if (pos != token.size())
        throw ParseError(file, line.number, "expected an integer, got '" + token + "'");
    return value;
}

void check_header(const std::string& file, const std::vector<Line>& lines,
                  const std::string& format_name) {
    if (lines.size() < 2)
        throw ParseError(file, 1, "missing 'format " + format_name + "' / 'version 1' header");
    if (lines[0].tokens.size() != 2 || lines[0].tokens[0] != "format" ||
        lines[0].tokens[1] != format_name)
        throw ParseError(file, lines[0].number, "first line must be 'format " + format_name + "'");
    if (lines[1].tokens.size() != 2 || lines[1].tokens[0] != "version")
        throw ParseError(file, lines[1].number, "second line must declare a version");
    if (lines[1].tokens[1] != "1")
        throw ParseError(file, lines[1].number,
                         "unsupported version '" + lines[1].tokens[1] + "', expected 1");
}

std::string read_whole_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, "cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

ScenarioMarket parse_market(const std::string& text, const std::string& filename) {
    const std::vector<Line> lines = tokenize(text);
    check_header(filename, lines, "qopt-market");

    int horizon = -1;
    int assets = -1;
    std::vector<MarketNode> nodes;
    std::vector<std::pair<int, double>> state_probs;

    for (std::size_t i = 2; i < lines.size(); ++i) {
        const Line& line = lines[i];
        const std::string& key = line.tokens[0];
        if (key == "horizon") {
            if (line.tokens.size() != 2) throw ParseError(filename, line.number, "horizon takes one value");
            horizon = static_cast<int>(to_long(filename, line, line.tokens[1]));
        } else if (key == "assets") {
            if (line.tokens.size() != 2) throw ParseError(filename, line.number, "assets takes one value");
            assets = static_cast<int>(to_long(filename, line, line.tokens[1]));
        } else if (key == "node") {
            if (assets < 1)
                throw ParseError(filename, line.number, "'assets' must come before node lines");
            if (line.tokens.size() != static_cast<std::size_t>(5 + assets) ||
                line.tokens[2] != "parent" || line.tokens[4] != "prices")
                throw ParseError(filename, line.number,
                                 "expected 'node <id> parent <id> prices <" +
                                     std::to_string(assets) + " values>'");
            const long id = to_long(filename, line, line.tokens[1]);
            if (id != static_cast<long>(nodes.size()))
                throw ParseError(filename, line.number,
                                 "node ids must be dense and in order; expected " +
                                     std::to_string(nodes.size()));
            MarketNode node;
            node.parent = static_cast<int>(to_long(filename, line, line.tokens[3]));
            node.prices.resize(assets);
            for (int a = 0; a < assets; ++a)
                node.prices[a] = to_double(filename, line, line.tokens[5 + a]);
            nodes.push_back(std::move(node));
        } else if (key == "state") {
            if (line.tokens.size() != 4 || line.tokens[2] != "prob")
                throw ParseError(filename, line.number, "expected 'state <node-id> prob <p>'");
            const int node_id = static_cast<int>(to_long(filename, line, line.tokens[1]));
            state_probs.emplace_back(node_id, to_double(filename, line, line.tokens[3]));
        } else {
            throw ParseError(filename, line.number, "unknown directive '" + key + "'");
        }
    }

    if (horizon < 1) throw ParseError(filename, 0, "missing or invalid 'horizon'");
    if (assets < 1) throw ParseError(filename, 0, "missing or invalid 'assets'");
    if (nodes.empty()) throw ParseError(filename, 0, "no nodes");

    ScenarioMarket market;
    try {
        market = make_market(std::move(nodes), state_probs);
    } catch (const std::invalid_argument& e) {
        throw ParseError(filename, 0, e.what());
    }
    if (market.horizon != horizon)
        throw ParseError(filename, 0,
                         "declared horizon " + std::to_string(horizon) + " but the tree has depth " +
                             std::to_string(market.horizon));
    if (market.n_assets != assets)
        throw ParseError(filename, 0, "declared asset count does not match the node lines");
    return market;
}

ScenarioMarket load_market(const std::string& path) {
    return parse_market(read_whole_file(path), path);
}

std::string serialize_market(const ScenarioMarket& market) {
    std::ostringstream out;
    out << "format qopt-market\n";
    out << "version 1\n";
    out << "horizon " << market.horizon << "\n";
    out << "assets " << market.n_assets << "\n";
    for (const MarketNode& node : market.nodes) {
        out << "node " << node.id << " parent " << node.parent << " prices";
        for (int a = 0; a < market.n_assets; ++a) out << " " << fmt17(node.prices[a]);
        out << "\n";
    }
    for (int s = 0; s < market.n_states(); ++s)
        out << "state " << market.terminal_nodes[s] << " prob " << fmt17(market.probs[s]) << "\n";
    return out.str();
}

CandidateMeasure parse_candidate(const std::string& text, const std::string& filename) {
    const std::vector<Line> lines = tokenize(text);
    check_header(filename, lines, "qopt-candidate");

    CandidateMeasure candidate;
    bool have_q = false;
    bool have_values = false;
    for (std::size_t i = 2; i < lines.size(); ++i) {
        const Line& line = lines[i];
        const std::string& key = line.tokens[0];
        if (key == "q") {
            if (line.tokens.size() != 2) throw ParseError(filename, line.number, "q takes one value");
            candidate.q = to_double(filename, line, line.tokens[1]);
            have_q = true;
        } else if (key == "values") {
            if (line.tokens.size() < 2)
                throw ParseError(filename, line.number, "values needs at least one entry");
            candidate.g_star.resize(static_cast<int>(line.tokens.size()) - 1);
            for (std::size_t j = 1; j < line.tokens.size(); ++j)
                candidate.g_star[static_cast<int>(j) - 1] = to_double(filename, line, line.tokens[j]);
            have_values = true;
        } else {
            throw ParseError(filename, line.number, "unknown directive '" + key + "'");
        }
    }
    if (!have_q) throw ParseError(filename, 0, "missing 'q'");
    if (!(candidate.q > 1.0)) throw ParseError(filename, 0, "q must be greater than 1");
    if (!have_values) throw ParseError(filename, 0, "missing 'values'");
    return candidate;
}

CandidateMeasure load_candidate(const std::string& path) {
    return parse_candidate(read_whole_file(path), path);
}

std::string serialize_candidate(const CandidateMeasure& candidate) {
    std::ostringstream out;
    out << "format qopt-candidate\n";
    out << "version 1\n";
    out << "q " << fmt17(candidate.q) << "\n";
    out << "values";
    for (int i = 0; i < candidate.g_star.size(); ++i) out << " " << fmt17(candidate.g_star[i]);
    out << "\n";
    return out.str();
}

} // namespace qopt
