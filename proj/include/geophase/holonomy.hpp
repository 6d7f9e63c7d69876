#pragma once

#include <optional>
#include <vector>

#include "geophase/connection.hpp"
#include "geophase/numerics.hpp"
#include "geophase/potential.hpp"

namespace geophase {

enum class HolonomyMethod { ordered_exponential, abelian_line_integral, abelian_stokes };

const char* method_name(HolonomyMethod m);

// Result of transporting the mode frame around a control-space path. U is
// unitary within 1e-8. When alpha is present, the {0,1} block of U equals
// the rotation [[cos a, -sin a], [sin a, cos a]] within 1e-8 (the two-level
// holonomy exp(-i alpha sigma_2)). geometric is false for open paths, whose
// "holonomy" depends on the gauge at the endpoints.
struct Holonomy {
    CMat U;
    std::optional<double> alpha;
    HolonomyMethod method = HolonomyMethod::ordered_exponential;
    bool geometric = true;
};

// Path-ordered product U = prod_k exp(-K(midpoint_k) . dR_k), later segments
// multiplying from the left. Segment generators use the mean of the two
// bounding connection samples. A segment whose generator Frobenius norm
// exceeds step_bound raises an error asking for a finer path. alpha is filled
// when all segment generators commute within tolerance and the total
// generator is supported on the {0,1} block.
Holonomy ordered_exponential(const ConnectionField& field, bool closed_path,
                             double step_bound = 0.1);

// Prefix transports U(sample 0 -> sample k) for k = 0 .. M-1 (U_0 = 1), with
// the same segment rule as ordered_exponential.
std::vector<CMat> cumulative_holonomies(const ConnectionField& field, double step_bound = 0.1);

// Abelian line integral alpha = sum_k lambda(midpoint_k) . dR_k of the
// two-level field, with U = exp(-i alpha sigma_2).
Holonomy abelian_phase_line(const LambdaField& lambda, bool closed_path);

// Two-level lambda vectors tabulated on a tensor grid in (L, w).
struct LambdaGrid {
    std::vector<double> L;  // ascending
    std::vector<double> w;  // ascending
    std::vector<std::vector<ControlVector>> lambda;  // [i along L][j along w]
};

LambdaGrid tabulate_lambda(const PotentialModel& model, std::vector<double> L_axis,
                           std::vector<double> w_axis, ConnectionMethod method, int lmax,
                           int N = 2000, int threads = 1);

// Berry curvature F = d_L lambda_w - d_w lambda_L at the grid nodes, by
// central differences inside and one-sided second-order stencils on the grid
// boundary.
struct CurvatureSample {
    ControlVector R;
    double F = 0.0;
};

std::vector<CurvatureSample> curvature_samples(const LambdaGrid& grid);

// Surface integral of the curvature over the rectangle, oriented to match
// the canonical traversal (L_in, w_in) -> (L_in, w_fin) -> (L_fin, w_fin) ->
// (L_fin, w_in) -> close, which runs clockwise in the (L, w) plane; the
// surface normal from the right-hand rule therefore gives
// alpha = int (d_w lambda_L - d_L lambda_w) dL dw, making the result agree
// with the line integral along that traversal. Errors if the rectangle exits
// the sampled window.
Holonomy abelian_phase_stokes(const LambdaGrid& grid, const RectangleSpec& rect);

// h1 followed into h2 as the matrix product h1.U * h2.U. alpha is kept only
// when both factors carry one and the product is itself a {0,1}-block
// rotation by the summed angle.
Holonomy compose(const Holonomy& h1, const Holonomy& h2);

// Identity on dim levels with exp(i alpha sigma_2) in the (l, lp) block,
// sigma_2 = [[0, -i], [i, 0]]. For the (0, 1) block this is the two-level
// holonomy with angle -alpha.
Holonomy embed_two_level(double alpha, int l, int lp, int dim);

}  // namespace geophase
