#pragma once

#include <vector>

#include "geophase/potential.hpp"

namespace geophase {

// Transverse eigenpairs at one control point. Eigenfunctions are stored at
// the N interior nodes x_i = i h (the hard-wall zeros at x = 0 and x = D are
// implicit) and carry continuum normalization, trapezoid(phi^2) = 1.
struct SpectralSolution {
    ControlVector R;
    double D = 0.0;
    double h = 0.0;
    int N = 0;
    std::vector<double> eigenvalues;
    std::vector<std::vector<double>> states;
    std::vector<double> residuals;

    int levels() const { return static_cast<int>(eigenvalues.size()); }
};

// Lowest lmax + 1 eigenpairs of -phi'' + V phi = eps phi on [0, D(R)] with
// Dirichlet walls, second-order central differences on N interior nodes.
// Requires lmax >= 1 and a grid fine enough to give the highest requested
// state at least 20 nodes per half-oscillation. The returned solution carries
// the reference-free gauge (first non-negligible value away from x = 0 is
// positive).
SpectralSolution eigensolve(const PotentialModel& model, const ControlVector& R, int lmax,
                            int N = 2000);

// Deterministic sign convention. Without a reference, each state's first
// non-negligible value away from x = 0 is made positive. With a reference,
// each state is flipped if its zero-extension overlap with the reference
// state of the same level is negative; an overlap magnitude below 0.5 is a
// gauge-chaining failure (error) because the sign would be ambiguous.
SpectralSolution fix_gauge(SpectralSolution sol, const SpectralSolution* reference = nullptr);

// Inner product of states from two solutions with possibly different domains
// and grids: both are extended by zero beyond their own wall and integrated
// by the trapezoid rule on the union of the two node sets.
double overlap(const SpectralSolution& sa, int la, const SpectralSolution& sb, int lb);

// State value at arbitrary x by quadratic interpolation through the three
// nearest nodes (zero-extended beyond the walls).
double eval_state(const SpectralSolution& sol, int l, double x);

// One-sided second-order derivative at the far wall x = D, using phi(D) = 0.
double wall_derivative(const SpectralSolution& sol, int l);

// Eigensolve along a path with the gauge chained from sample to sample.
std::vector<SpectralSolution> solve_chain(const PotentialModel& model, const ControlPath& path,
                                          int lmax, int N = 2000);

}  // namespace geophase
