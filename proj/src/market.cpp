#include "qopt/market.hpp"

#include "qopt/errors.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qopt {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

} // namespace

int ScenarioMarket::state_of_node(int node_id) const {
    for (int s = 0; s < n_states(); ++s)
        if (terminal_nodes[s] == node_id) return s;
    return -1;
}

ScenarioMarket make_market(std::vector<MarketNode> nodes,
                           const std::vector<std::pair<int, double>>& state_probs) {
    require(!nodes.empty(), "market has no nodes");
    const int n_nodes = static_cast<int>(nodes.size());

    require(nodes[0].parent == -1, "node 0 must be the root (parent -1)");
    const int d = static_cast<int>(nodes[0].prices.size());
    require(d >= 1, "root carries no prices");

    for (int i = 0; i < n_nodes; ++i) {
        MarketNode& node = nodes[i];
        node.id = i;
        node.children.clear();
        require(static_cast<int>(node.prices.size()) == d,
                "node " + std::to_string(i) + ": expected " + std::to_string(d) + " prices");
        for (int a = 0; a < d; ++a)
            require(std::isfinite(node.prices[a]),
                    "node " + std::to_string(i) + ": non-finite price");
        if (i == 0) {
            node.depth = 0;
            continue;
        }
        require(node.parent >= 0 && node.parent < i,
                "node " + std::to_string(i) + ": parent must precede it");
        node.depth = nodes[node.parent].depth + 1;
        nodes[node.parent].children.push_back(i);
    }

    ScenarioMarket market;
    market.n_assets = d;

    int horizon = 0;
    for (const MarketNode& node : nodes) {
        if (node.children.empty()) {
            market.terminal_nodes.push_back(node.id);
            horizon = std::max(horizon, node.depth);
        } else {
            require(node.children.size() >= 2,
                    "node " + std::to_string(node.id) + ": non-terminal nodes need >= 2 children");
        }
    }
    market.horizon = horizon;
    require(horizon >= 1, "market needs at least one trading date");
    for (int id : market.terminal_nodes)
        require(nodes[id].depth == horizon,
                "node " + std::to_string(id) + ": every terminal node must sit at the horizon");

    const int n = static_cast<int>(market.terminal_nodes.size());
    require(state_probs.size() == static_cast<std::size_t>(n),
            "expected one probability per terminal node");
    market.probs = Eigen::VectorXd::Zero(n);
    std::vector<bool> seen(nodes.size(), false);
    for (const auto& [node_id, prob] : state_probs) {
        require(node_id >= 0 && node_id < n_nodes, "state refers to unknown node");
        require(nodes[node_id].children.empty(), "state refers to a non-terminal node");
        require(!seen[node_id], "duplicate state for node " + std::to_string(node_id));
        seen[node_id] = true;
        require(prob > 0.0, "non-positive probability");
        int s = 0;
        while (market.terminal_nodes[s] != node_id) ++s;
        market.probs[s] = prob;
    }
    const double total = market.probs.sum();
    require(std::abs(total - 1.0) <= 1e-12, "probability sum != 1 beyond tolerance 1e-12");

    market.nodes = std::move(nodes);
    return market;
}

ScenarioMarket build_one_period(const Eigen::VectorXd& prices_now,
                                const Eigen::MatrixXd& prices_next,
                                const Eigen::VectorXd& probs) {
    const int d = static_cast<int>(prices_now.size());
    const int n = static_cast<int>(prices_next.rows());
    require(d >= 1, "no assets");
    require(n >= 2, "need at least 2 next-states");
    require(prices_next.cols() == d, "prices_next has the wrong number of columns");
    require(probs.size() == n, "one probability per next-state required");

    std::vector<MarketNode> nodes(1 + n);
    nodes[0].parent = -1;
    nodes[0].prices = prices_now;
    std::vector<std::pair<int, double>> state_probs;
    state_probs.reserve(n);
    for (int i = 0; i < n; ++i) {
        nodes[1 + i].parent = 0;
        nodes[1 + i].prices = prices_next.row(i).transpose();
        state_probs.emplace_back(1 + i, probs[i]);
    }
    return make_market(std::move(nodes), state_probs);
}

GainBasis gain_basis(const ScenarioMarket& market) {
    const int n = market.n_states();
    const int d = market.n_assets;

    // ancestor[s][t] = node id on the path to state s at depth t
    std::vector<std::vector<int>> ancestor(n);
    for (int s = 0; s < n; ++s) {
        std::vector<int> path;
        for (int id = market.terminal_nodes[s]; id != -1; id = market.nodes[id].parent)
            path.push_back(id);
        ancestor[s].assign(path.rbegin(), path.rend());
    }

    GainBasis basis;
    std::vector<Eigen::VectorXd> columns;
    for (const MarketNode& node : market.nodes) {
        if (node.children.empty()) continue;
        for (int a = 0; a < d; ++a) {
            Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
            for (int s = 0; s < n; ++s) {
                if (ancestor[s][node.depth] != node.id) continue;
                const int next = ancestor[s][node.depth + 1];
                col[s] = market.nodes[next].prices[a] - node.prices[a];
            }
            columns.push_back(std::move(col));
            basis.descriptors.push_back({node.id, a, 1.0});
        }
    }

    basis.matrix.resize(n, static_cast<int>(columns.size()));
    for (int j = 0; j < static_cast<int>(columns.size()); ++j)
        basis.matrix.col(j) = columns[j];
    return basis;
}

MartingaleAffineSet martingale_affine_set(const ScenarioMarket& market,
                                          const GainBasis& basis, double rank_tol) {
    const int n = market.n_states();
    const int m = basis.n_columns();

    // Constraint rows: E[u] = 1 and E[u h_j] = 0.
    Eigen::MatrixXd A(1 + m, n);
    A.row(0) = market.probs.transpose();
    for (int j = 0; j < m; ++j)
        A.row(1 + j) = (market.probs.array() * basis.matrix.col(j).array()).transpose();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(1 + m);
    b[0] = 1.0;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV | Eigen::ComputeThinU);
    svd.setThreshold(rank_tol);
    const int rank = static_cast<int>(svd.rank());

    MartingaleAffineSet set;
    set.rank = rank;
    set.u0 = svd.solve(b);

    const double residual = (A * set.u0 - b).norm();
    if (residual > 1e-9)
        throw InfeasibleMarketError(
            "no signed martingale measure: the constant payoff 1 is attainable as a "
            "trading gain (constraint residual " + std::to_string(residual) + ")",
            residual);

    set.V = svd.matrixV().rightCols(n - rank);
    return set;
}

} // namespace qopt
