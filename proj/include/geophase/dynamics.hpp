#pragma once

#include <optional>
#include <vector>

#include "geophase/connection.hpp"
#include "geophase/holonomy.hpp"
#include "geophase/numerics.hpp"
#include "geophase/potential.hpp"
#include "geophase/spectrum.hpp"

namespace geophase {

// Longitudinal mode-space state at station y: amplitudes C over the retained
// levels 0 .. l_off (so l_off + 1 = C.size()), their y-derivatives, and the
// conserved total energy epsilon, which must exceed every retained
// transverse level along the path (propagating, not evanescent).
struct ModeState {
    double y = 0.0;
    std::vector<cplx> C;
    std::vector<cplx> dC;
    double epsilon = 0.0;
};

// Transverse spectrum at one path sample in mode space: the diagonal of
// Omega, plus the doublet midpoint omega_bar = (eps0 + eps1)/2 and gap
// Delta = eps1 - eps0.
struct OmegaSample {
    std::vector<double> eps;
    double omega_bar = 0.0;
    double gap = 0.0;
};

OmegaSample assemble_omega(const SpectralSolution& sol);
std::vector<OmegaSample> assemble_omega(const std::vector<SpectralSolution>& chain);

// Keep only the lowest `levels` levels of a field / omega chain (the
// coupled-mode gate runs on the doublet while validity reporting looks one
// level past the cutoff).
ConnectionField truncate_field(const ConnectionField& field, int levels);
std::vector<OmegaSample> truncate_omega(const std::vector<OmegaSample>& omegas, int levels);

struct ValidityReport {
    // int |K_{l l'}| dy for every retained-to-discarded pair l' <= l0 <
    // l_off < l (what the adiabatic elimination of levels above l_off
    // neglects), parameterization-invariant.
    std::vector<std::pair<int, int>> adiabatic_pairs;
    std::vector<double> adiabatic_integrals;
    // max over the path of (eps^(l0) - eps^(0)) / (eps^(l_off + 1) - eps^(l0)).
    double quasi_degeneracy_ratio = 0.0;
    // max over the path and retained levels of |d eps_l / dy| / (2 eps^(3/2)).
    double wkb_ratio = 0.0;
    // max over segments of |K_y| Delta y (Frobenius norm).
    double max_step_knorm = 0.0;
    double thr_adiabatic = 0.1, thr_quasi_degeneracy = 0.1, thr_wkb = 0.01;
    bool adiabatic_ok = true, quasi_degeneracy_ok = true, wkb_ok = true;

    bool all_ok() const { return adiabatic_ok && quasi_degeneracy_ok && wkb_ok; }
};

struct PropagationResult {
    ModeState final_state;
    std::vector<cplx> C_pred;
    double fidelity = 0.0;
    double leakage = 0.0;
    double dynamical_phase = 0.0;  // int sqrt(epsilon - omega_bar) dy
    std::optional<double> alpha;   // from the internal holonomy prediction
    std::optional<ValidityReport> validity;
    // Amplitudes at the path samples (used for gauge transforms).
    std::vector<double> y_samples;
    std::vector<std::vector<cplx>> C_samples;
    // Optional dense population trace |C_l(y)|^2.
    std::vector<double> trace_y;
    std::vector<std::vector<double>> trace_pop;
};

struct IntegrateOptions {
    // Target sqrt(epsilon) * dy per RK4 step; hard error above 0.2.
    double step_factor = 0.05;
    // Per-segment |K . dR| bound for the internal prediction holonomy. The
    // direct integration subdivides segments on its own, so this only guards
    // the path-ordering error of the reference transport; for a two-level
    // field the generators commute and the bound can be loose.
    double holonomy_step_bound = 0.5;
    bool record_trace = false;
    int trace_stride = 16;
};

// Direct integration of the coupled-mode equation
//   (d_y + K_y)^2 C + (epsilon - Omega_y) C = 0
// as the first-order system v = C' + K C, C' = v - K C,
// v' = -K v - (epsilon - Omega) C, which never differentiates the sampled
// K_y. K and Omega are interpolated linearly inside each path segment; the
// fixed RK4 step subdivides every segment. Launch is the pure right-mover
// C(Y0) = C0, dC(Y0) = (i sqrt(epsilon - Omega_{Y0}) - K_{Y0}) C0. The
// prediction C_pred = exp(i phase_refined) U C0 with U the ordered
// exponential of the same field is attached along with
// fidelity = |<C_pred|C(Y)>| / (|C_pred| |C(Y)|) and the population fraction
// above the doublet as leakage.
PropagationResult integrate_coupled(const ControlPath& path, const ConnectionField& field,
                                    const std::vector<OmegaSample>& omegas, double epsilon,
                                    const std::vector<cplx>& C0,
                                    const IntegrateOptions& opts = {});

// Frame change into the transported basis, C_tilde(y_k) = U_k^dag C(y_k)
// with U_k the cumulative holonomy of the field up to sample k (inverse
// applies U_k and undoes it).
std::vector<std::vector<cplx>> gauge_transform(const std::vector<CMat>& cumulative,
                                               const std::vector<std::vector<cplx>>& C,
                                               bool inverse = false);

// Scalar WKB factors: the refined longitudinal phase int sqrt(epsilon -
// omega_bar(y)) dy (exact per segment for the linear interpolant) and the
// crude sqrt(epsilon) (Y - Y0). Errors if epsilon - omega_bar is not
// positive along the whole path.
struct WkbPropagator {
    double phase_refined = 0.0;
    double phase_crude = 0.0;
};

WkbPropagator wkb_propagator(const ControlPath& path, const std::vector<OmegaSample>& omegas,
                             double epsilon);

// C_pred = exp(i phase) U C0.
std::vector<cplx> predict_output(const std::vector<cplx>& C0, const Holonomy& holonomy,
                                 double phase = 0.0);

struct ValidityThresholds {
    double adiabatic = 0.1;
    double quasi_degeneracy = 0.1;
    double wkb = 0.01;
};

// Quantitative check of the three assumptions behind the two-level gate
// picture: smallness of the neglected couplings (integrals over pairs
// l' <= l0 < l_off < l), quasi-degeneracy of the working multiplet relative
// to the first discarded level, and slow variation on the longitudinal
// wavelength scale. The field and omega chain must retain at least
// l_off + 2 levels.
ValidityReport validity_report(const ControlPath& path, const ConnectionField& field,
                               const std::vector<OmegaSample>& omegas, double epsilon, int l0,
                               int l_off, const ValidityThresholds& thr = {});

}  // namespace geophase
