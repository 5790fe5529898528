#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace qopt {

// Input file could not be parsed; carries the offending line for diagnostics.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string file, int line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
          file_(std::move(file)), line_(line) {}

    const std::string& file() const { return file_; }
    int line() const { return line_; }

private:
    std::string file_;
    int line_;
};

// No signed martingale measure exists: the constant payoff 1 is attainable
// as a trading gain, so E[u]=1 cannot hold alongside E[u h]=0.
class InfeasibleMarketError : public std::runtime_error {
public:
    explicit InfeasibleMarketError(const std::string& what, double detected_norm = 0.0)
        : std::runtime_error(what), detected_norm_(detected_norm) {}

    double detected_norm() const { return detected_norm_; }

private:
    double detected_norm_;
};

// Iterative solve stopped before reaching the gradient tolerance.
// Carries the best iterate so callers can inspect how far it got.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, Eigen::VectorXd best_point,
                     double grad_norm, int iterations)
        : std::runtime_error(what), best_point_(std::move(best_point)),
          grad_norm_(grad_norm), iterations_(iterations) {}

    const Eigen::VectorXd& best_point() const { return best_point_; }
    double grad_norm() const { return grad_norm_; }
    int iterations() const { return iterations_; }

private:
    Eigen::VectorXd best_point_;
    double grad_norm_;
    int iterations_;
};

} // namespace qopt
