#include "qopt/diffusion.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace qopt {

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

namespace {

double eval(const Coefficient& fn, double s, double y, double t) {
    return fn ? fn(s, y, t) : 0.0;
}

double eval(const YCoefficient& fn, double y, double t) {
    return fn ? fn(y, t) : 0.0;
}

// One path, from its own generator. Pairs under antithetic sampling replay
// the same raw normals with the sign flipped, so a path never depends on
// whether its partner ran first or on another thread.
void run_path(const DiffusionSpec& spec, const Coefficient& eta, const YCoefficient& xi,
              int path, int n_steps, std::uint64_t seed, const SimOptions& opts,
              PathBundle& bundle) {
    const double dt = spec.T / n_steps;
    const double sqdt = std::sqrt(dt);
    const std::uint64_t stream = opts.antithetic ? path / 2 : path;
    const double flip = (opts.antithetic && path % 2 == 1) ? -1.0 : 1.0;
    std::mt19937_64 rng(substream_seed(seed, stream));
    std::normal_distribution<double> normal(0.0, 1.0);

    double s = spec.s0;
    double y = spec.y0;
    PathFunctionals f;

    double* row_s = nullptr;
    double* row_y = nullptr;
    double* row_db = nullptr;
    double* row_dz = nullptr;
    double* row_dw = nullptr;
    if (opts.store_paths) {
        row_s = bundle.S.data() + static_cast<std::size_t>(path) * (n_steps + 1);
        row_y = bundle.Y.data() + static_cast<std::size_t>(path) * (n_steps + 1);
        row_db = bundle.dB.data() + static_cast<std::size_t>(path) * n_steps;
        row_dz = bundle.dZ.data() + static_cast<std::size_t>(path) * n_steps;
        row_dw = bundle.dW.data() + static_cast<std::size_t>(path) * n_steps;
        row_s[0] = s;
        row_y[0] = y;
    }

    for (int k = 0; k < n_steps; ++k) {
        const double t = k * dt;
        const double db = flip * normal(rng) * sqdt;
        const double dz = flip * normal(rng) * sqdt;
        const double rho = spec.rho ? spec.rho(t) : 0.0;
        const double dw = rho * db + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * dz;

        const double sigma = spec.sigma(s, y, t);
        if (std::abs(sigma) < opts.sigma_floor)
            throw std::runtime_error("volatility collapsed to " + std::to_string(sigma) +
                                     " on path " + std::to_string(path) + " at step " +
                                     std::to_string(k));
        const double mu = spec.mu(s, y, t);
        const double lambda = mu / sigma;
        const double lambdabar = lambda / sigma;
        const double eta_k = eval(eta, s, y, t);
        const double etabar = eta_k / sigma;
        const double xi_k = eval(xi, y, t);
        const double alpha = spec.alpha ? spec.alpha(y, t) : 0.0;
        const double beta = spec.beta ? spec.beta(y, t) : 0.0;

        const double ds = mu * dt + sigma * db;
        const double dy = alpha * dt + beta * dw;

        f.int_lambda_dB += lambda * db;
        f.k_T += lambda * lambda * dt;
        f.int_lambdabar_dS += lambdabar * ds;
        f.qv_MS += sigma * sigma * dt;
        f.int_diff_dS += (etabar - lambdabar) * ds;
        f.qv_diff += (eta_k - lambda) * (eta_k - lambda) * dt;
        f.int_etabar_dMS += etabar * sigma * db;
        f.int_etabar_dAS += etabar * mu * dt;
        f.int_eta2_dt += eta_k * eta_k * dt;
        f.int_xi_dW += xi_k * dw;
        f.int_xi2_dt += xi_k * xi_k * dt;

        s += ds;
        y += dy;
        if (opts.store_paths) {
            row_s[k + 1] = s;
            row_y[k + 1] = y;
            row_db[k] = db;
            row_dz[k] = dz;
            row_dw[k] = dw;
        }
    }
    f.s_T = s;
    f.y_T = y;
    bundle.paths[path] = f;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    long n = 0;
};

// Under antithetic sampling the iid unit is the pair mean, not the path.
MeanSe mean_se(const std::vector<double>& x, bool antithetic) {
    MeanSe out;
    out.n = static_cast<long>(x.size());
    if (x.empty()) return out;

    std::vector<double> samples;
    if (antithetic) {
        samples.reserve(x.size() / 2);
        for (std::size_t j = 0; j + 1 < x.size(); j += 2)
            samples.push_back(0.5 * (x[j] + x[j + 1]));
    } else {
        samples = x;
    }

    double sum = 0.0;
    for (double v : samples) sum += v;
    out.mean = sum / samples.size();
    if (samples.size() >= 2) {
        double ss = 0.0;
        for (double v : samples) ss += (v - out.mean) * (v - out.mean);
        out.se = std::sqrt(ss / (samples.size() - 1.0) / samples.size());
    }
    return out;
}

ChEstimate log_mean_estimate(const std::vector<double>& x, bool antithetic) {
    const MeanSe ms = mean_se(x, antithetic);
    if (!(ms.mean > 0.0)) throw std::runtime_error("sample mean is not positive, -ln undefined");
    ChEstimate est;
    est.value = -std::log(ms.mean);
    est.std_error = ms.se / ms.mean;
    est.n_paths = ms.n;
    return est;
}

} // namespace

PathBundle simulate_with(const DiffusionSpec& spec, const Coefficient& eta, const YCoefficient& xi,
                         int n_paths, int n_steps, std::uint64_t seed, const SimOptions& opts) {
    if (n_paths < 1 || n_steps < 1) throw std::invalid_argument("need n_paths >= 1, n_steps >= 1");
    if (opts.antithetic && n_paths % 2 != 0)
        throw std::invalid_argument("antithetic sampling needs an even path count");
    if (!spec.mu || !spec.sigma) throw std::invalid_argument("spec is missing mu or sigma");
    if (!(spec.T > 0.0)) throw std::invalid_argument("maturity must be positive");

    PathBundle bundle;
    bundle.n_paths = n_paths;
    bundle.n_steps = n_steps;
    bundle.seed = seed;
    bundle.antithetic = opts.antithetic;
    bundle.grid.resize(n_steps + 1);
    const double dt = spec.T / n_steps;
    for (int k = 0; k <= n_steps; ++k) bundle.grid[k] = k * dt;
    bundle.paths.resize(n_paths);
    if (opts.store_paths) {
        bundle.S.resize(static_cast<std::size_t>(n_paths) * (n_steps + 1));
        bundle.Y.resize(static_cast<std::size_t>(n_paths) * (n_steps + 1));
        bundle.dB.resize(static_cast<std::size_t>(n_paths) * n_steps);
        bundle.dZ.resize(static_cast<std::size_t>(n_paths) * n_steps);
        bundle.dW.resize(static_cast<std::size_t>(n_paths) * n_steps);
    }

    std::string first_error;
    bool failed = false;
#ifdef _OPENMP
    if (opts.parallel) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n_paths; ++i) {
            try {
                run_path(spec, eta, xi, i, n_steps, seed, opts, bundle);
            } catch (const std::exception& e) {
#pragma omp critical
                {
                    if (!failed) first_error = e.what();
                    failed = true;
                }
            }
        }
        if (failed) throw std::runtime_error(first_error);
        return bundle;
    }
#endif
    for (int i = 0; i < n_paths; ++i) run_path(spec, eta, xi, i, n_steps, seed, opts, bundle);
    return bundle;
}

PathBundle simulate(const DiffusionSpec& spec, int n_paths, int n_steps, std::uint64_t seed,
                    const SimOptions& opts) {
    return simulate_with(spec, nullptr, nullptr, n_paths, n_steps, seed, opts);
}

double ch_deterministic(const TimeFn& lambda, double q, double T, int n_quad) {
    if (!lambda) throw std::invalid_argument("lambda is required");
    if (n_quad < 2) n_quad = 2;
    if (n_quad % 2 != 0) ++n_quad;
    const double h = T / n_quad;
    auto sq = [&](double t) {
        const double l = lambda(t);
        return l * l;
    };
    double acc = sq(0.0) + sq(T);
    for (int k = 1; k < n_quad; ++k) acc += (k % 2 == 1 ? 4.0 : 2.0) * sq(k * h);
    return 0.5 * q * acc * h / 3.0;
}

ChMonteCarloResult ch_monte_carlo(const DiffusionSpec& spec, const Coefficient& eta, int n_paths,
                                  int n_steps, std::uint64_t seed, const SimOptions& opts) {
    const double q = spec.q;
    if (!(q > 1.0)) throw std::invalid_argument("exponent must satisfy q > 1");
    const PathBundle bundle = simulate_with(spec, eta, nullptr, n_paths, n_steps, seed, opts);

    // ln E((q-1)(etabar-lambdabar).S)_T = (q-1) D - (q-1)^2 V / 2 with
    // D = int_diff_dS, V = qv_diff; powers p-1 and p collapse to the
    // exponents below because (p-1)(q-1) = 1 and p(q-1) = q.
    std::vector<double> g(bundle.paths.size()), gp(bundle.paths.size()), diff(bundle.paths.size());
    for (std::size_t i = 0; i < bundle.paths.size(); ++i) {
        const PathFunctionals& f = bundle.paths[i];
        g[i] = std::exp(f.int_diff_dS - 0.5 * (q - 1.0) * f.qv_diff);
        gp[i] = std::exp(q * f.int_diff_dS - 0.5 * q * (q - 1.0) * f.qv_diff);
        diff[i] = g[i] - gp[i];
    }

    ChMonteCarloResult result;
    result.estimate = log_mean_estimate(g, bundle.antithetic);
    result.p_power_estimate = log_mean_estimate(gp, bundle.antithetic);
    const MeanSe gap = mean_se(diff, bundle.antithetic);
    result.mean_gap = gap.mean;
    result.mean_gap_std_error = gap.se;
    return result;
}

ChEstimate ch_tradeoff_monte_carlo(const DiffusionSpec& spec, int n_paths, int n_steps,
                                   std::uint64_t seed, const SimOptions& opts) {
    const double q = spec.q;
    if (!(q > 1.0)) throw std::invalid_argument("exponent must satisfy q > 1");
    if (n_paths < 1 || n_steps < 1) throw std::invalid_argument("need n_paths >= 1, n_steps >= 1");
    if (opts.antithetic && n_paths % 2 != 0)
        throw std::invalid_argument("antithetic sampling needs an even path count");

    // Simulates the volatility factor alone and reads lambda at the initial
    // asset level; the estimator presumes lambda free of the asset price.
    const double dt = spec.T / n_steps;
    const double sqdt = std::sqrt(dt);
    std::vector<double> x(n_paths);

    auto one_path = [&](int i) {
        const std::uint64_t stream = opts.antithetic ? i / 2 : i;
        const double flip = (opts.antithetic && i % 2 == 1) ? -1.0 : 1.0;
        std::mt19937_64 rng(substream_seed(seed, stream));
        std::normal_distribution<double> normal(0.0, 1.0);
        double y = spec.y0;
        double k_T = 0.0;
        for (int k = 0; k < n_steps; ++k) {
            const double t = k * dt;
            const double dw = flip * normal(rng) * sqdt;
            const double lambda = spec.mu(spec.s0, y, t) / spec.sigma(spec.s0, y, t);
            k_T += lambda * lambda * dt;
            const double alpha = spec.alpha ? spec.alpha(y, t) : 0.0;
            const double beta = spec.beta ? spec.beta(y, t) : 0.0;
            y += alpha * dt + beta * dw;
        }
        x[i] = std::exp(-0.5 * q * k_T);
    };

#ifdef _OPENMP
    if (opts.parallel) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n_paths; ++i) one_path(i);
    } else
#endif
    {
        for (int i = 0; i < n_paths; ++i) one_path(i);
    }
    return log_mean_estimate(x, opts.antithetic);
}

double pathwise_identity_check(const DiffusionSpec& spec, int n_paths, int n_steps,
                               std::uint64_t seed, const SimOptions& opts) {
    const double q = spec.q;
    const double p = q / (q - 1.0);
    if (!(q > 1.0)) throw std::invalid_argument("exponent must satisfy q > 1");
    const PathBundle bundle = simulate(spec, n_paths, n_steps, seed, opts);

    double worst = 0.0;
    for (const PathFunctionals& f : bundle.paths) {
        const double lhs = std::exp(-f.int_lambda_dB - 0.5 * f.k_T);
        const double ln_dens = -(q - 1.0) * f.int_lambdabar_dS - 0.5 * (q - 1.0) * (q - 1.0) * f.k_T;
        const double rhs = std::exp(0.5 * q * f.k_T + (p - 1.0) * ln_dens);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

ResidualStats fundamental_eq_residual(const DiffusionSpec& spec, const Coefficient& eta,
                                      const YCoefficient& xi, double c, int n_paths, int n_steps,
                                      std::uint64_t seed, const SimOptions& opts) {
    const double q = spec.q;
    if (!(q > 1.0)) throw std::invalid_argument("exponent must satisfy q > 1");
    if (!(c > 0.0)) throw std::invalid_argument("the constant c must be positive");
    const double ln_c = std::log(c);
    const PathBundle bundle = simulate_with(spec, eta, xi, n_paths, n_steps, seed, opts);

    ResidualStats stats;
    stats.n_paths = n_paths;
    double sum = 0.0;
    for (const PathFunctionals& f : bundle.paths) {
        const double log_lhs = 0.5 * q * f.k_T + f.int_xi_dW - 0.5 * f.int_xi2_dt;
        const double log_rhs = ln_c + f.int_etabar_dMS + q * f.int_etabar_dAS -
                               0.5 * (q - 1.0) * f.int_eta2_dt;
        const double r = std::abs(log_lhs - log_rhs);
        sum += r;
        stats.max_abs = std::max(stats.max_abs, r);
    }
    stats.mean_abs = sum / n_paths;
    return stats;
}

} // namespace qopt
