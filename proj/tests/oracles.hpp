#pragma once

// Test-side numerics kept deliberately independent of the library's linear
// algebra: plain Gaussian elimination and a golden-section line search.

#include "qopt/market.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace qopt::testing {

using Matrix = std::vector<std::vector<double>>;

inline int ge_rank(Matrix a, double tol = 1e-10) {
    const int rows = static_cast<int>(a.size());
    if (rows == 0) return 0;
    const int cols = static_cast<int>(a[0].size());
    int rank = 0;
    for (int col = 0; col < cols && rank < rows; ++col) {
        int pivot = -1;
        double best = tol;
        for (int r = rank; r < rows; ++r)
            if (std::abs(a[r][col]) > best) {
                best = std::abs(a[r][col]);
                pivot = r;
            }
        if (pivot < 0) continue;
        std::swap(a[rank], a[pivot]);
        for (int r = 0; r < rows; ++r) {
            if (r == rank) continue;
            const double m = a[r][col] / a[rank][col];
            for (int c = col; c < cols; ++c) a[r][c] -= m * a[rank][c];
        }
        ++rank;
    }
    return rank;
}

/// Solves a x = b by elimination with partial pivoting; empty on a pivot
/// below tol.
inline std::optional<std::vector<double>> ge_solve(Matrix a, std::vector<double> b,
                                                   double tol = 1e-10) {
    const int n = static_cast<int>(a.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < tol) return std::nullopt;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double m = a[r][col] / a[col][col];
            for (int c = col; c < n; ++c) a[r][c] -= m * a[col][c];
            b[r] -= m * b[col];
        }
    }
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
    return x;
}

/// For q = 2 the optimal density is the element of span{1, gains} meeting
/// the constraints, so a Gram system gives it in closed form. Empty when the
/// Gram matrix is singular (redundant gain columns).
inline std::optional<Eigen::VectorXd> q2_density_oracle(const ScenarioMarket& market,
                                                        const GainBasis& basis) {
    const int n = market.n_states();
    const int m = basis.n_columns();
    Matrix gram(1 + m, std::vector<double>(1 + m, 0.0));
    std::vector<double> rhs(1 + m, 0.0);
    rhs[0] = 1.0;

    auto dot = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += market.probs[i] * x[i] * y[i];
        return acc;
    };
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    gram[0][0] = dot(ones, ones);
    for (int j = 0; j < m; ++j) {
        gram[0][1 + j] = gram[1 + j][0] = dot(ones, basis.matrix.col(j));
        for (int l = j; l < m; ++l)
            gram[1 + j][1 + l] = gram[1 + l][1 + j] = dot(basis.matrix.col(j), basis.matrix.col(l));
    }

    const auto coeffs = ge_solve(std::move(gram), std::move(rhs));
    if (!coeffs) return std::nullopt;
    Eigen::VectorXd u = (*coeffs)[0] * ones;
    for (int j = 0; j < m; ++j) u += (*coeffs)[1 + j] * basis.matrix.col(j);
    return u;
}

inline double golden_min(const std::function<double(double)>& fn, double lo, double hi,
                         double tol = 1e-12) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = fn(c), fd = fn(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = fn(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = fn(d);
        }
    }
    return 0.5 * (a + b);
}

} // namespace qopt::testing
