#include "geophase/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geophase/errors.hpp"
#include "geophase/numerics.hpp"

namespace geophase {

SpectralSolution eigensolve(const PotentialModel& model, const ControlVector& R, int lmax,
                            int N) {
    if (lmax < 1)
        throw numerical_error("eigensolve: lmax must be at least 1 (the doublet needs two levels)");
    const double D = domain_width(model, R);
    const std::vector<double> V = grid_potential(model, R, N);
    const double h = D / (N + 1);

    // Resolution heuristic: the highest requested state oscillates with local
    // wavenumber at most k_est = sqrt(V_max + ((lmax+1) pi / D)^2); demand at
    // least 20 nodes per half-oscillation pi / k_est.
    const double v_max = V.empty() ? 0.0 : *std::max_element(V.begin(), V.end());
    const double k_box = (lmax + 1) * std::numbers::pi / D;
    const double k_est = std::sqrt(std::max(0.0, v_max) + k_box * k_box);
    if (std::numbers::pi / k_est < 20.0 * h)
        throw numerical_error(
            "eigensolve: grid too coarse for the requested level; need at least 20 nodes "
            "per half-oscillation, increase N");

    std::vector<double> diag(static_cast<size_t>(N));
    std::vector<double> off(static_cast<size_t>(N) - 1, -1.0 / (h * h));
    for (int i = 0; i < N; ++i) diag[static_cast<size_t>(i)] = 2.0 / (h * h) + V[static_cast<size_t>(i)];

    TridiagEigen eig = tridiag_lowest(diag, off, lmax + 1, 1e-8);

    SpectralSolution sol;
    sol.R = R;
    sol.D = D;
    sol.h = h;
    sol.N = N;
    sol.eigenvalues = std::move(eig.values);
    sol.residuals = std::move(eig.residuals);
    sol.states = std::move(eig.vectors);
    // Unit Euclidean norm -> continuum normalization. With implicit zeros at
    // the walls the trapezoid rule gives h * sum(v^2) = h, so divide by
    // sqrt(h).
    const double scale = 1.0 / std::sqrt(h);
    for (auto& v : sol.states)
        for (double& x : v) x *= scale;
    return fix_gauge(std::move(sol));
}

SpectralSolution fix_gauge(SpectralSolution sol, const SpectralSolution* reference) {
    for (int l = 0; l < sol.levels(); ++l) {
        auto& v = sol.states[static_cast<size_t>(l)];
        double flip = 0.0;
        if (reference == nullptr) {
            double amax = 0.0;
            for (double x : v) amax = std::max(amax, std::abs(x));
            for (double x : v) {
                if (std::abs(x) > 1e-8 * amax) {
                    flip = (x < 0.0) ? -1.0 : 1.0;
                    break;
                }
            }
        } else {
            if (l >= reference->levels())
                throw numerical_error("fix_gauge: reference is missing the requested level");
            const double o = overlap(*reference, l, sol, l);
            if (std::abs(o) < 0.5)
                throw numerical_error(
                    "fix_gauge: overlap with the reference below 0.5; gauge chaining is "
                    "ambiguous, refine the path sampling");
            flip = (o < 0.0) ? -1.0 : 1.0;
        }
        if (flip < 0.0)
            for (double& x : v) x = -x;
    }
    return sol;
}

namespace {

// Linear interpolation of a stored state at x, zero outside (0, D).
double lerp_state(const SpectralSolution& s, int l, double x) {
    if (x <= 0.0 || x >= s.D) return 0.0;
    const auto& v = s.states[static_cast<size_t>(l)];
    const double u = x / s.h;  // node index coordinate, node i at u = i + ... (x_i = (i+1) h)
    const int j = static_cast<int>(std::floor(u));
    const double f = u - j;
    // Values at grid nodes j*h and (j+1)*h, with the walls implicit.
    auto at = [&](int node) -> double {
        if (node <= 0 || node > s.N) return 0.0;
        return v[static_cast<size_t>(node - 1)];
    };
    return (1.0 - f) * at(j) + f * at(j + 1);
}

}  // namespace

double overlap(const SpectralSolution& sa, int la, const SpectralSolution& sb, int lb) {
    if (la >= sa.levels() || lb >= sb.levels())
        throw numerical_error("overlap: requested level not present in the solution");
    if (sa.D == sb.D && sa.N == sb.N) {
        // Identical grids: trapezoid reduces to h * dot product.
        const auto& va = sa.states[static_cast<size_t>(la)];
        const auto& vb = sb.states[static_cast<size_t>(lb)];
        double dot = 0.0;
        for (size_t i = 0; i < va.size(); ++i) dot += va[i] * vb[i];
        return dot * sa.h;
    }
    // Union grid of both node sets over [0, max(Da, Db)], zero extension.
    std::vector<double> nodes;
    nodes.reserve(static_cast<size_t>(sa.N + sb.N + 4));
    nodes.push_back(0.0);
    for (int i = 1; i <= sa.N + 1; ++i) nodes.push_back(i * sa.h);
    for (int i = 1; i <= sb.N + 1; ++i) nodes.push_back(i * sb.h);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    double acc = 0.0;
    double prev_x = nodes[0];
    double prev_f = lerp_state(sa, la, prev_x) * lerp_state(sb, lb, prev_x);
    for (size_t k = 1; k < nodes.size(); ++k) {
        const double x = nodes[k];
        const double f = lerp_state(sa, la, x) * lerp_state(sb, lb, x);
        acc += 0.5 * (x - prev_x) * (f + prev_f);
        prev_x = x;
        prev_f = f;
    }
    return acc;
}

double eval_state(const SpectralSolution& sol, int l, double x) {
    if (l >= sol.levels())
        throw numerical_error("eval_state: requested level not present in the solution");
    if (x <= 0.0 || x >= sol.D) return 0.0;
    const auto& v = sol.states[static_cast<size_t>(l)];
    auto at = [&](int node) -> double {
        if (node <= 0 || node > sol.N) return 0.0;
        return v[static_cast<size_t>(node - 1)];
    };
    // Three nearest nodes around x (node i sits at i h, i = 0 .. N+1 with the
    // walls implicit): quadratic Lagrange interpolation.
    int j = static_cast<int>(std::lround(x / sol.h));
    j = std::clamp(j, 1, sol.N);
    const double x0 = (j - 1) * sol.h, x1 = j * sol.h, x2 = (j + 1) * sol.h;
    const double f0 = at(j - 1), f1 = at(j), f2 = at(j + 1);
    const double l0 = (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2));
    const double l1 = (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2));
    const double l2 = (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
    return f0 * l0 + f1 * l1 + f2 * l2;
}

double wall_derivative(const SpectralSolution& sol, int l) {
    if (l >= sol.levels())
        throw numerical_error("wall_derivative: requested level not present in the solution");
    const auto& v = sol.states[static_cast<size_t>(l)];
    const size_t n = v.size();
    // One-sided second-order stencil at x = D with phi(D) = 0:
    // phi'(D) = (3 phi(D) - 4 phi(D - h) + phi(D - 2h)) / (2h).
    return (-4.0 * v[n - 1] + v[n - 2]) / (2.0 * sol.h);
}

std::vector<SpectralSolution> solve_chain(const PotentialModel& model, const ControlPath& path,
                                          int lmax, int N) {
    std::vector<SpectralSolution> chain;
    chain.reserve(path.samples.size());
    for (size_t k = 0; k < path.samples.size(); ++k) {
        SpectralSolution sol = eigensolve(model, path.samples[k].R, lmax, N);
        if (k > 0) sol = fix_gauge(std::move(sol), &chain[k - 1]);
        chain.push_back(std::move(sol));
    }
    return chain;
}

}  // namespace geophase
