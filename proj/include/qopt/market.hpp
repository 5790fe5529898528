#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace qopt {

/// One node of a scenario tree. Nodes are stored in a flat array indexed by
/// id; the root has id 0 and parent -1. Every non-terminal node has at least
/// two children and every leaf sits at depth == horizon.
struct MarketNode {
    int id = 0;
    int parent = -1;
    int depth = 0;
    std::vector<int> children;
    Eigen::VectorXd prices; // one entry per asset
};

/// Finite discrete-time, finite-state market: a price tree plus reference
/// probabilities on the terminal atoms. States are the leaves, ordered by
/// node id; probs[i] is the reference probability of state i.
struct ScenarioMarket {
    std::vector<MarketNode> nodes;
    std::vector<int> terminal_nodes; // node id per state, ascending
    Eigen::VectorXd probs;           // strictly positive, sums to 1
    int horizon = 0;
    int n_assets = 0;

    int n_states() const { return static_cast<int>(terminal_nodes.size()); }
    int n_nodes() const { return static_cast<int>(nodes.size()); }

    /// State index for a terminal node id, -1 if the node is not terminal.
    int state_of_node(int node_id) const;
};

/// Audit record for one gain-basis column: buy `holding` units of asset
/// `asset` at node `node`, sell at the next trading date.
struct GainDescriptor {
    int node = 0;
    int asset = 0;
    double holding = 1.0;
};

/// Terminal values of the one-step trading gains. Column j holds, per state,
/// the gain of descriptor j; states outside the node's subtree see 0.
/// The columns span the space of all simple trading gains of the tree.
struct GainBasis {
    Eigen::MatrixXd matrix; // n_states x n_columns
    std::vector<GainDescriptor> descriptors;

    int n_columns() const { return static_cast<int>(matrix.cols()); }
};

/// Affine parametrization {u0 + V z : z in R^k} of the densities u with
/// E[u h_j] = 0 for every basis column and E[u] = 1. V has orthonormal
/// columns spanning the homogeneous directions {v : E[v h_j] = 0, E[v] = 0}.
struct MartingaleAffineSet {
    Eigen::VectorXd u0;
    Eigen::MatrixXd V; // n_states x k
    int rank = 0;      // rank of the constraint system

    int k() const { return static_cast<int>(V.cols()); }
};

/// Candidate Radon-Nikodym density against the reference probabilities.
struct DensityVector {
    Eigen::VectorXd values;
    Eigen::VectorXd reference; // the p_i it is a density against

    double expectation() const { return reference.dot(values); }
};

/// Validates tree structure, probabilities and prices; throws
/// std::invalid_argument with a description on the first violation.
ScenarioMarket make_market(std::vector<MarketNode> nodes,
                           const std::vector<std::pair<int, double>>& state_probs);

/// One-period market: d assets, one trading date, one row of prices_next per
/// terminal state. probs must be strictly positive and sum to 1 (tol 1e-12).
ScenarioMarket build_one_period(const Eigen::VectorXd& prices_now,
                                const Eigen::MatrixXd& prices_next,
                                const Eigen::VectorXd& probs);

/// Enumerates, for each non-terminal node and each asset, the gain of buying
/// one unit at that node and selling at the next date. On a finite tree the
/// span of these columns equals the span of all simple stopped gains.
GainBasis gain_basis(const ScenarioMarket& market);

/// Solves {E[u h_j] = 0 for all j, E[u] = 1} for the affine set of signed
/// martingale measure densities. Throws InfeasibleMarketError when the
/// system is inconsistent, i.e. the constant 1 lies in the span of the
/// gains. Singular values below rank_tol * s_max count as zero.
MartingaleAffineSet martingale_affine_set(const ScenarioMarket& market,
                                          const GainBasis& basis,
                                          double rank_tol = 1e-10);

} // namespace qopt
