#pragma once

#include <functional>
#include <vector>

namespace geophase {

// Control-space point. For the structured well the components are (L, w).
using ControlVector = std::vector<double>;

struct PathSample {
    double y = 0.0;
    ControlVector R;
};

// A modulation path y -> R(y). Sample ordinates are strictly increasing; a
// closed path repeats its first control point exactly at the end.
struct ControlPath {
    std::vector<PathSample> samples;
    bool closed = false;

    double y_start() const { return samples.front().y; }
    double y_end() const { return samples.back().y; }
};

// Transverse potential families on [0, D(R)] with hard walls at both ends.
// Units: hbar = 2m = 1, lengths in units of the reference width a.
//
// The structured well is the primary system: D = a + L + w with a barrier of
// height V0 on [a/2, a/2 + L]. At w = 0 the two outer wells have equal width
// a/2, and for sub-barrier doublets the spectrum is L-independent (the
// stretchable-well property), with epsilon^2 pinned near V0 = 9 pi^2 / a^2.
struct StructuredWell {
    double a = 1.0;
    double V0 = 0.0;  // filled with 9 pi^2 / a^2 by make_structured_well
};

// Piecewise-constant family with optional linear binding of edge positions,
// segment values, and the domain width to control components:
// quantity = base + R[control] (control < 0 means fixed).
struct PiecewiseConstant {
    struct Bound {
        double base = 0.0;
        int control = -1;
    };
    std::vector<Bound> edges;   // interior step positions, ascending
    std::vector<Bound> values;  // one per segment, size edges.size() + 1
    Bound domain;               // D
};

// Control-independent sampled potential, linearly interpolated.
struct Tabulated {
    std::vector<double> x;
    std::vector<double> V;
};

struct PotentialModel {
    enum class Family { structured_well, piecewise_constant, tabulated };
    Family family = Family::structured_well;
    StructuredWell sw;
    PiecewiseConstant pc;
    Tabulated tab;
};

PotentialModel make_structured_well(double a = 1.0);
PotentialModel make_piecewise_constant(PiecewiseConstant pc);
PotentialModel make_tabulated(Tabulated tab);

// Domain width D(R). Validates the control vector (finite entries; for the
// structured well L >= 0 and w >= 0; positive region widths).
double domain_width(const PotentialModel& model, const ControlVector& R);

// Pointwise V(x; R). Steps are left-closed/right-open: the value exactly at
// an interior step edge is the value of the segment starting there. Errors
// if x is outside [0, D(R)].
double evaluate_potential(const PotentialModel& model, const ControlVector& R, double x);

// Potential assigned to the N interior nodes x_i = i h, h = D/(N+1), of the
// discretized operator. Step families use a triangle-kernel (cloud-in-cell)
// assignment, V_i = (1/h) int V(s) max(0, 1 - |s - x_i|/h) ds, so that the
// discrete spectrum varies smoothly when a step edge crosses between grid
// nodes; tabulated potentials are already continuous and are sampled
// pointwise.
std::vector<double> grid_potential(const PotentialModel& model, const ControlVector& R, int N);

// Rectangle loop in (L, w) control space, traversed corner order
// (L_in, w_in) -> (L_in, w_fin) -> (L_fin, w_fin) -> (L_fin, w_in) -> close,
// with n samples per edge (4n + 1 samples total) mapped uniformly onto
// y in [y_start, y_start + y_length].
struct RectangleSpec {
    double L_in = 0.0, w_in = 0.0;
    double L_fin = 0.0, w_fin = 0.0;
    int samples_per_edge = 64;
    double y_start = 0.0;
    double y_length = 100.0;
};

ControlPath build_path(const RectangleSpec& spec);

// Explicit sample list. Errors: fewer than 2 samples, non-increasing y,
// inconsistent control dimensions, or a closed flag with mismatched
// endpoints.
ControlPath build_path(std::vector<PathSample> samples, bool closed);

// Remap the longitudinal coordinate through a strictly increasing map g,
// keeping the control samples. Geometric quantities must be invariant under
// this operation.
ControlPath reparameterize(const ControlPath& path, const std::function<double(double)>& g);

}  // namespace geophase
