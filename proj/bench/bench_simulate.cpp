// Times the path kernel with and without the parallel loop and checks that
// the two produce bitwise identical functionals.
#include "qopt/diffusion.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>

using namespace qopt;

namespace {

double run_ms(const DiffusionSpec& spec, int n_paths, int n_steps, const SimOptions& opts,
              PathBundle& out) {
    const auto start = std::chrono::steady_clock::now();
    out = simulate(spec, n_paths, n_steps, 42, opts);
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count();
}

} // namespace

int main(int argc, char** argv) {
    int n_paths = 200000;
    int n_steps = 200;
    if (argc > 1) n_paths = std::stoi(argv[1]);
    if (argc > 2) n_steps = std::stoi(argv[2]);

    DiffusionSpec spec;
    spec.q = 2.0;
    spec.sigma = [](double s, double, double) { return 0.2 + 0.05 * std::tanh(s); };
    spec.mu = [](double s, double y, double) {
        return (0.3 + 0.2 * std::sin(y)) * (0.2 + 0.05 * std::tanh(s));
    };
    spec.alpha = [](double y, double) { return -1.0 * y; };
    spec.beta = [](double, double) { return 0.5; };
    spec.rho = [](double) { return 0.0; };

    std::printf("paths %d  steps %d\n", n_paths, n_steps);

    SimOptions serial;
    serial.parallel = false;
    SimOptions parallel;
    parallel.parallel = true;

    PathBundle warm;
    run_ms(spec, n_paths / 10, n_steps, parallel, warm);

    PathBundle a, b;
    const double serial_ms = run_ms(spec, n_paths, n_steps, serial, a);
    const double parallel_ms = run_ms(spec, n_paths, n_steps, parallel, b);

    if (a.paths.size() != b.paths.size()) {
        std::printf("FAIL: path counts differ\n");
        return 1;
    }
    for (std::size_t i = 0; i < a.paths.size(); ++i) {
        if (std::memcmp(&a.paths[i], &b.paths[i], sizeof(PathFunctionals)) != 0) {
            std::printf("FAIL: functionals differ at path %zu\n", i);
            return 1;
        }
    }

    std::printf("serial    %10.1f ms\n", serial_ms);
    std::printf("parallel  %10.1f ms\n", parallel_ms);
    std::printf("speedup   %10.2fx\n", serial_ms / parallel_ms);
    std::printf("results bitwise identical\n");
    return 0;
}
