/*
 * Dynamics-module tests.
 *
 * The coupled-mode integration (d_y + K)^2 C + (eps - Omega) C = 0 is checked
 * against closed-form solutions wherever they exist:
 *   - K = 0, constant Omega: decoupled plane waves, whose two-mode beat also
 *     fixes the fidelity definition quantitatively,
 *   - constant K on a degenerate doublet: the transport law
 *     C(Y) = e^{i sqrt(eps - omega) Y} R(kY) C0 is exact, so integration,
 *     prediction, holonomy angle, and gauge transport can all be compared at
 *     RK4 accuracy,
 *   - WKB factors against an independent adaptive quadrature.
 *
 * The canonical gate rectangle is run end to end at eps = 1e3, 1e4, 1e5
 * against frozen values: monotone fidelities, dynamical phases, the frozen
 * holonomy angle, and the honest validity report (adiabatic flag red, the
 * others green).
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "geophase/connection.hpp"
#include "geophase/dynamics.hpp"
#include "geophase/errors.hpp"
#include "geophase/holonomy.hpp"
#include "geophase/numerics.hpp"
#include "geophase/potential.hpp"
#include "geophase/spectrum.hpp"

using namespace geophase;

namespace {

Mat antisym2(double k01) {
    Mat k(2, 2);
    k(0, 1) = k01;
    k(1, 0) = -k01;
    return k;
}

ControlPath two_point_path(double y0, double y1, ControlVector R0, ControlVector R1) {
    ControlPath path;
    path.samples = {{y0, std::move(R0)}, {y1, std::move(R1)}};
    return path;
}

OmegaSample omega_of(std::vector<double> eps) {
    OmegaSample o;
    o.eps = std::move(eps);
    o.omega_bar = 0.5 * (o.eps[0] + o.eps[1]);
    o.gap = o.eps[1] - o.eps[0];
    return o;
}

// Straight 1-D control ramp R(y) = y with a constant doublet connection
// K^R = k J: the coupled-mode problem is exactly solvable,
// C(y) = e^{i sqrt(eps - omega) y} rot(k y) C0.
struct ConstantRotationSetup {
    ControlPath path;
    ConnectionField field;
    std::vector<OmegaSample> omegas;
    double k = 0.14;
    double omega = 10.0;
    double Y = 5.0;

    ConstantRotationSetup() {
        const int M = 10;
        for (int i = 0; i <= M; ++i) {
            const double y = Y * i / M;
            path.samples.push_back({y, {y}});
            ConnectionSample s;
            s.R = {y};
            s.components = {antisym2(k)};
            field.samples.push_back(std::move(s));
            omegas.push_back(omega_of({omega, omega}));
        }
    }

    std::vector<cplx> exact(double epsilon, const std::vector<cplx>& C0) const {
        const double theta = k * Y;
        const cplx ph = std::exp(cplx(0.0, std::sqrt(epsilon - omega) * Y));
        return {ph * (std::cos(theta) * C0[0] - std::sin(theta) * C0[1]),
                ph * (std::sin(theta) * C0[0] + std::cos(theta) * C0[1])};
    }
};

double max_component_error(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("decoupled plane waves: launch, phases, purity, and the fidelity beat") {
    // Constant control point, zero connection: each mode evolves as
    // C_l(y) = C_l(0) e^{i sqrt(eps - eps_l) y}.
    const double epsilon = 100.0, Y = 5.0;
    const std::vector<double> eps = {1.0, 4.0};
    const ControlPath path = two_point_path(0.0, Y, {0.3}, {0.3});
    ConnectionField field;
    for (int i = 0; i < 2; ++i) {
        ConnectionSample s;
        s.R = {0.3};
        s.components = {Mat(2, 2)};
        field.samples.push_back(std::move(s));
    }
    const std::vector<OmegaSample> omegas = {omega_of(eps), omega_of(eps)};
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const std::vector<cplx> C0 = {cplx(inv_sqrt2, 0.0), cplx(inv_sqrt2, 0.0)};

    const PropagationResult res = integrate_coupled(path, field, omegas, epsilon, C0);

    const double ph0 = std::sqrt(epsilon - eps[0]) * Y;
    const double ph1 = std::sqrt(epsilon - eps[1]) * Y;
    const std::vector<cplx> exact = {C0[0] * std::exp(cplx(0.0, ph0)),
                                     C0[1] * std::exp(cplx(0.0, ph1))};
    CHECK(max_component_error(res.final_state.C, exact) <= 2e-5);

    // The launch is a pure right mover and stays one: the left-moving
    // projection (C - dC / (i q_l)) / 2 vanishes at the output.
    for (int l = 0; l < 2; ++l) {
        const double q = std::sqrt(epsilon - eps[static_cast<size_t>(l)]);
        const cplx left = 0.5 * (res.final_state.C[static_cast<size_t>(l)] -
                                 res.final_state.dC[static_cast<size_t>(l)] / cplx(0.0, q));
        CHECK(std::abs(left) <= 1e-6);
    }

    // The prediction carries the doublet-midpoint WKB phase for both modes,
    // so the two-mode fidelity is exactly the beat |cos((ph0 - ph1)/2)|.
    CHECK(res.fidelity == doctest::Approx(std::abs(std::cos(0.5 * (ph0 - ph1)))).epsilon(1e-4));
    CHECK(res.leakage == 0.0);
    REQUIRE(res.alpha.has_value());
    CHECK(*res.alpha == 0.0);
    CHECK(res.dynamical_phase == doctest::Approx(std::sqrt(epsilon - 2.5) * Y).epsilon(1e-14));

    // Sample bookkeeping: amplitudes are recorded at every path sample.
    REQUIRE(res.y_samples.size() == path.samples.size());
    CHECK(res.y_samples.front() == path.y_start());
    CHECK(res.y_samples.back() == path.y_end());
    REQUIRE(res.C_samples.size() == path.samples.size());
    CHECK(std::abs(res.C_samples.front()[0] - C0[0]) == 0.0);
}

TEST_CASE("constant doublet rotation: integration matches the exact transport law") {
    const ConstantRotationSetup s;
    const double epsilon = 400.0;
    const std::vector<cplx> C0 = {cplx(1.0, 0.0), cplx(0.0, 0.0)};

    IntegrateOptions opts;
    opts.record_trace = true;
    opts.trace_stride = 50;
    const PropagationResult res = integrate_coupled(s.path, s.field, s.omegas, epsilon, C0, opts);

    const std::vector<cplx> exact = s.exact(epsilon, C0);
    CHECK(max_component_error(res.final_state.C, exact) <= 1e-4);
    // For a degenerate doublet with constant K the gate law is exact, so the
    // prediction agrees with the direct integration to RK4 accuracy.
    CHECK(max_component_error(res.C_pred, exact) <= 1e-12);
    CHECK(res.fidelity >= 1.0 - 1e-9);
    REQUIRE(res.alpha.has_value());
    CHECK(*res.alpha == doctest::Approx(s.k * s.Y).epsilon(1e-12));
    CHECK(res.dynamical_phase ==
          doctest::Approx(std::sqrt(epsilon - s.omega) * s.Y).epsilon(1e-13));

    // Population trace: recorded on the stride, norm conserved.
    REQUIRE(!res.trace_y.empty());
    CHECK(res.trace_y.front() == s.path.y_start());
    CHECK(res.trace_y.back() == s.path.y_end());
    for (const auto& pop : res.trace_pop) {
        REQUIRE(pop.size() == 2);
        CHECK(pop[0] + pop[1] == doctest::Approx(1.0).epsilon(1e-6));
    }

    // Global phase and scale of the input must not move the fidelity.
    const cplx phase = std::exp(cplx(0.0, 0.9));
    const PropagationResult res_phase =
        integrate_coupled(s.path, s.field, s.omegas, epsilon, {phase, cplx(0.0, 0.0)});
    CHECK(res_phase.fidelity == doctest::Approx(res.fidelity).epsilon(1e-12));
    const PropagationResult res_scale =
        integrate_coupled(s.path, s.field, s.omegas, epsilon, {cplx(2.0, 0.0), cplx(0.0, 0.0)});
    CHECK(res_scale.fidelity == doctest::Approx(res.fidelity).epsilon(1e-12));
}

TEST_CASE("step refinement converges at fourth order") {
    const ConstantRotationSetup s;
    const double epsilon = 400.0;
    const std::vector<cplx> C0 = {cplx(1.0, 0.0), cplx(0.0, 0.0)};
    const std::vector<cplx> exact = s.exact(epsilon, C0);

    auto error_at = [&](double step_factor) {
        IntegrateOptions opts;
        opts.step_factor = step_factor;
        const PropagationResult res =
            integrate_coupled(s.path, s.field, s.omegas, epsilon, C0, opts);
        return max_component_error(res.final_state.C, exact);
    };
    const double e1 = error_at(0.1);
    const double e2 = error_at(0.05);
    const double e3 = error_at(0.025);
    CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.25));
    CHECK(e2 / e3 == doctest::Approx(16.0).epsilon(0.25));
}

TEST_CASE("gauge transform: transported frame and round trip") {
    const ConstantRotationSetup s;
    const double epsilon = 400.0;
    const std::vector<cplx> C0 = {cplx(1.0, 0.0), cplx(0.0, 0.0)};
    const PropagationResult res = integrate_coupled(s.path, s.field, s.omegas, epsilon, C0);

    const std::vector<CMat> cums = cumulative_holonomies(s.field, 0.5);
    REQUIRE(cums.size() == res.C_samples.size());
    const std::vector<std::vector<cplx>> tilde = gauge_transform(cums, res.C_samples);

    // In the lab frame the upper mode fills up to sin(kY); in the transported
    // frame the mixing collapses to the integration error.
    CHECK(std::abs(res.C_samples.back()[1]) ==
          doctest::Approx(std::sin(s.k * s.Y)).epsilon(1e-4));
    for (const auto& c : tilde) CHECK(std::abs(c[1]) <= 1e-4);

    const std::vector<std::vector<cplx>> back = gauge_transform(cums, tilde, true);
    for (size_t kk = 0; kk < back.size(); ++kk)
        CHECK(max_component_error(back[kk], res.C_samples[kk]) <= 1e-12);

    std::vector<CMat> short_chain(cums.begin(), cums.end() - 1);
    CHECK_THROWS_AS(gauge_transform(short_chain, res.C_samples), numerical_error);
    std::vector<std::vector<cplx>> wrong_dim(cums.size(), std::vector<cplx>(3));
    CHECK_THROWS_AS(gauge_transform(cums, wrong_dim), numerical_error);
}

TEST_CASE("wkb propagator: exact branches and the quadrature oracle") {
    const double epsilon = 20.0;

    // omega_bar = 0: refined and crude factors coincide at sqrt(eps) dy.
    {
        ControlPath path = two_point_path(0.0, 3.0, {0.1}, {0.1});
        path.samples.insert(path.samples.begin() + 1, {1.2, {0.1}});
        const std::vector<OmegaSample> omegas(3, omega_of({0.0, 0.0}));
        const WkbPropagator wkb = wkb_propagator(path, omegas, epsilon);
        CHECK(wkb.phase_crude == doctest::Approx(std::sqrt(epsilon) * 3.0).epsilon(1e-15));
        CHECK(wkb.phase_refined == doctest::Approx(wkb.phase_crude).epsilon(1e-14));
    }

    // Constant omega_bar = c: refined factor sqrt(eps - c) (Y - Y0).
    {
        const ControlPath path = two_point_path(0.0, 2.0, {0.1}, {0.1});
        const std::vector<OmegaSample> omegas(2, omega_of({3.0, 5.0}));
        const WkbPropagator wkb = wkb_propagator(path, omegas, epsilon);
        CHECK(wkb.phase_refined == doctest::Approx(std::sqrt(epsilon - 4.0) * 2.0).epsilon(1e-14));
    }

    // Linear ramp omega_bar: 3 -> 7 over y in [0, 2]; the segment formula is
    // the exact integral of sqrt(eps - omega_bar(y)), cross-checked with an
    // independent adaptive quadrature.
    {
        const ControlPath path = two_point_path(0.0, 2.0, {0.0}, {1.0});
        const std::vector<OmegaSample> omegas = {omega_of({3.0, 3.0}), omega_of({7.0, 7.0})};
        const WkbPropagator wkb = wkb_propagator(path, omegas, epsilon);
        const double oracle = adaptive_simpson(
            [&](double y) { return std::sqrt(epsilon - (3.0 + 2.0 * y)); }, 0.0, 2.0, 1e-12);
        CHECK(wkb.phase_refined == doctest::Approx(oracle).epsilon(1e-10));
    }

    // Evanescent and misaligned inputs are rejected.
    {
        const ControlPath path = two_point_path(0.0, 1.0, {0.0}, {1.0});
        const std::vector<OmegaSample> omegas(2, omega_of({9.0, 11.0}));
        bool threw = false;
        try {
            wkb_propagator(path, omegas, 6.9);
        } catch (const numerical_error& e) {
            threw = true;
            CHECK(std::string(e.what()).find("evanescent") != std::string::npos);
        }
        CHECK(threw);
        const std::vector<OmegaSample> short_chain(1, omega_of({1.0, 2.0}));
        CHECK_THROWS_AS(wkb_propagator(path, short_chain, epsilon), numerical_error);
    }
}

TEST_CASE("predict_output: rotations, phases, and dimension checks") {
    // embed_two_level(-pi/2) has the block [[0, -1], [1, 0]]: it maps the
    // lower basis state onto the upper one.
    const Holonomy quarter = embed_two_level(-std::numbers::pi / 2.0, 0, 1, 2);
    const std::vector<cplx> up = predict_output({cplx(1.0, 0.0), cplx(0.0, 0.0)}, quarter);
    CHECK(std::abs(up[0]) <= 1e-15);
    CHECK(std::abs(up[1] - cplx(1.0, 0.0)) <= 1e-15);

    // Pure phase on the identity.
    const Holonomy ident = embed_two_level(0.0, 0, 1, 2);
    const std::vector<cplx> phased =
        predict_output({cplx(0.6, 0.0), cplx(0.0, 0.8)}, ident, 1.3);
    const cplx ph = std::exp(cplx(0.0, 1.3));
    CHECK(std::abs(phased[0] - 0.6 * ph) <= 1e-15);
    CHECK(std::abs(phased[1] - cplx(0.0, 0.8) * ph) <= 1e-15);

    // A pi/4 doublet rotation sends (1, 1)/sqrt(2) to (0, 1).
    LambdaField lam;
    lam.samples.push_back({{0.0}, {std::numbers::pi / 4.0}, 0.0});
    lam.samples.push_back({{1.0}, {std::numbers::pi / 4.0}, 0.0});
    const Holonomy eighth = abelian_phase_line(lam, false);
    const double r = 1.0 / std::sqrt(2.0);
    const std::vector<cplx> swapped = predict_output({cplx(r, 0.0), cplx(r, 0.0)}, eighth);
    CHECK(std::abs(swapped[0]) <= 1e-12);
    CHECK(std::abs(swapped[1] - cplx(1.0, 0.0)) <= 1e-12);

    CHECK_THROWS_AS(predict_output({cplx(1.0, 0.0)}, quarter), numerical_error);
}

TEST_CASE("assemble_omega and truncation bookkeeping") {
    const PotentialModel m = make_structured_well();
    const SpectralSolution sol = eigensolve(m, {0.35, 0.0}, 3, 800);
    const OmegaSample o = assemble_omega(sol);
    REQUIRE(o.eps.size() == 4);
    CHECK(o.omega_bar == 0.5 * (sol.eigenvalues[0] + sol.eigenvalues[1]));
    CHECK(o.gap == sol.eigenvalues[1] - sol.eigenvalues[0]);

    SpectralSolution single;
    single.eigenvalues = {1.0};
    CHECK_THROWS_AS(assemble_omega(single), numerical_error);

    // Chain version follows the chain order.
    RectangleSpec rect;
    rect.L_in = 0.33;
    rect.w_in = 0.0;
    rect.L_fin = 0.37;
    rect.w_fin = 0.004;
    rect.samples_per_edge = 2;
    const ControlPath path = build_path(rect);
    const std::vector<SpectralSolution> chain = solve_chain(m, path, 2, 500);
    const std::vector<OmegaSample> omegas = assemble_omega(chain);
    REQUIRE(omegas.size() == chain.size());
    CHECK(omegas[3].omega_bar ==
          0.5 * (chain[3].eigenvalues[0] + chain[3].eigenvalues[1]));

    // Field truncation keeps the top-left block and the method tag.
    ConnectionField field3;
    for (int i = 0; i < 3; ++i) {
        ConnectionSample s;
        s.R = {0.1 * i};
        Mat k(3, 3);
        k(0, 1) = 0.3 + i;
        k(1, 0) = -k(0, 1);
        k(0, 2) = 0.7;
        k(2, 0) = -0.7;
        s.components = {k};
        field3.samples.push_back(std::move(s));
    }
    field3.method = ConnectionMethod::finite_difference;
    const ConnectionField field2 = truncate_field(field3, 2);
    CHECK(field2.method == ConnectionMethod::finite_difference);
    REQUIRE(field2.samples.size() == 3);
    CHECK(field2.samples[1].components[0].rows == 2);
    CHECK(field2.samples[1].components[0](0, 1) == 1.3);
    CHECK_THROWS_AS(truncate_field(field3, 1), numerical_error);
    CHECK_THROWS_AS(truncate_field(field3, 4), numerical_error);

    const std::vector<OmegaSample> trunc = truncate_omega(omegas, 2);
    REQUIRE(trunc[0].eps.size() == 2);
    CHECK(trunc[0].eps[1] == omegas[0].eps[1]);
    CHECK_THROWS_AS(truncate_omega(omegas, 5), numerical_error);
}

TEST_CASE("integrate_coupled rejects inconsistent inputs") {
    const double epsilon = 100.0;
    const ControlPath path = two_point_path(0.0, 2.0, {0.3}, {0.3});
    ConnectionField field;
    for (int i = 0; i < 2; ++i) {
        ConnectionSample s;
        s.R = {0.3};
        s.components = {Mat(2, 2)};
        field.samples.push_back(std::move(s));
    }
    const std::vector<OmegaSample> omegas(2, omega_of({1.0, 4.0}));
    const std::vector<cplx> C0 = {cplx(1.0, 0.0), cplx(0.0, 0.0)};

    auto expect_message = [&](auto&& call, const char* needle) {
        bool threw = false;
        try {
            call();
        } catch (const numerical_error& e) {
            threw = true;
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
        CHECK(threw);
    };

    // Launch below the top retained level: evanescent.
    expect_message([&] { integrate_coupled(path, field, omegas, 3.5, C0); }, "evanescent");

    // Step-factor guard rails.
    IntegrateOptions bad;
    bad.step_factor = 0.0;
    expect_message([&] { integrate_coupled(path, field, omegas, epsilon, C0, bad); },
                   "step factor must be positive");
    bad.step_factor = 0.3;
    expect_message([&] { integrate_coupled(path, field, omegas, epsilon, C0, bad); },
                   "cannot resolve");

    // Dimension bookkeeping.
    expect_message([&] { integrate_coupled(path, field, omegas, epsilon, {cplx(1.0, 0.0)}); },
                   "at least the doublet");
    ConnectionField field3 = field;
    for (auto& s : field3.samples) s.components = {Mat(3, 3)};
    expect_message([&] { integrate_coupled(path, field3, omegas, epsilon, C0); },
                   "must match C0");
    std::vector<OmegaSample> thin(2);
    thin[0].eps = {1.0};
    thin[1].eps = {1.0};
    expect_message([&] { integrate_coupled(path, field, thin, epsilon, C0); },
                   "fewer levels than C0");

    ConnectionField misaligned = field;
    misaligned.samples.pop_back();
    expect_message([&] { integrate_coupled(path, misaligned, omegas, epsilon, C0); },
                   "must align");
}

TEST_CASE("validity report: exact integrals, flags, and reparameterization invariance") {
    // One segment, slope dR/dy = 1: K_y equals the stored K^R. The (2,0)
    // entry changes sign along the segment, exercising the exact
    // piecewise-linear |.| integral; (2,1) and (0,1) stay constant.
    ControlPath path = two_point_path(0.0, 1.0, {0.0}, {1.0});
    Mat ka(3, 3), kb(3, 3);
    auto set = [](Mat& m, int i, int j, double v) {
        m(i, j) = v;
        m(j, i) = -v;
    };
    set(ka, 0, 1, 0.4);
    set(kb, 0, 1, 0.4);
    set(ka, 2, 0, 0.3);
    set(kb, 2, 0, -0.1);
    set(ka, 2, 1, 0.2);
    set(kb, 2, 1, 0.2);
    ConnectionField field;
    ConnectionSample sa, sb;
    sa.R = {0.0};
    sa.components = {ka};
    sb.R = {1.0};
    sb.components = {kb};
    field.samples = {sa, sb};
    const std::vector<OmegaSample> omegas(2, omega_of({0.0, 5.0, 10.0}));

    const ValidityReport rep = validity_report(path, field, omegas, 100.0, 1, 1);
    REQUIRE(rep.adiabatic_pairs.size() == 2);
    CHECK(rep.adiabatic_pairs[0] == std::pair<int, int>(2, 0));
    CHECK(rep.adiabatic_pairs[1] == std::pair<int, int>(2, 1));
    // Sign change: int |0.3 - 0.4 y| dy = (0.3^2 + 0.1^2) / (2 * 0.4).
    CHECK(rep.adiabatic_integrals[0] == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(rep.adiabatic_integrals[1] == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(rep.max_step_knorm == doctest::Approx(frobenius_norm(0.5 * (ka + kb))).epsilon(1e-14));
    CHECK(rep.wkb_ratio == 0.0);
    CHECK(rep.quasi_degeneracy_ratio == doctest::Approx(1.0).epsilon(1e-14));
    // adiabatic integrals exceed 0.1, the multiplet is not quasi-degenerate.
    CHECK_FALSE(rep.adiabatic_ok);
    CHECK_FALSE(rep.quasi_degeneracy_ok);
    CHECK(rep.wkb_ok);
    CHECK_FALSE(rep.all_ok());

    // Custom thresholds move the verdicts, not the numbers.
    ValidityThresholds loose;
    loose.adiabatic = 0.25;
    loose.quasi_degeneracy = 2.0;
    const ValidityReport rep2 = validity_report(path, field, omegas, 100.0, 1, 1, loose);
    CHECK(rep2.adiabatic_integrals[0] == rep.adiabatic_integrals[0]);
    CHECK(rep2.adiabatic_ok);
    CHECK(rep2.quasi_degeneracy_ok);

    // The neglected-coupling integrals are parameterization invariant; the
    // WKB ratio scales inversely with the dilation.
    const ControlPath slow = reparameterize(path, [](double y) { return 5.0 * y; });
    const ValidityReport rep5 = validity_report(slow, field, omegas, 100.0, 1, 1);
    CHECK(rep5.adiabatic_integrals[0] ==
          doctest::Approx(rep.adiabatic_integrals[0]).epsilon(1e-12));
    CHECK(rep5.adiabatic_integrals[1] ==
          doctest::Approx(rep.adiabatic_integrals[1]).epsilon(1e-12));
    CHECK(rep5.max_step_knorm == doctest::Approx(rep.max_step_knorm).epsilon(1e-12));

    // A y-independent guide has nothing geometric to neglect.
    const ControlPath straight = two_point_path(0.0, 1.0, {0.5}, {0.5});
    const ValidityReport rep0 = validity_report(straight, field, omegas, 100.0, 1, 1);
    CHECK(rep0.adiabatic_integrals[0] == 0.0);
    CHECK(rep0.adiabatic_integrals[1] == 0.0);
    CHECK(rep0.max_step_knorm == 0.0);

    // Validation: index ordering, retained levels, spectrum ordering.
    CHECK_THROWS_AS(validity_report(path, field, omegas, 100.0, 2, 1), numerical_error);
    CHECK_THROWS_AS(validity_report(path, field, omegas, 100.0, 1, 2), numerical_error);
    CHECK_THROWS_AS(validity_report(path, field, omegas, 0.0, 1, 1), numerical_error);
    std::vector<OmegaSample> thin = omegas;
    thin[0].eps = {0.0, 5.0};
    thin[1].eps = {0.0, 5.0};
    CHECK_THROWS_AS(validity_report(path, field, thin, 100.0, 1, 1), numerical_error);
    std::vector<OmegaSample> unordered(2);
    unordered[0].eps = {1.0, 3.0, 2.5};
    unordered[1].eps = {1.0, 3.0, 2.5};
    bool threw = false;
    try {
        validity_report(path, field, unordered, 100.0, 1, 1);
    } catch (const numerical_error& e) {
        threw = true;
        CHECK(std::string(e.what()).find("not ordered above the multiplet") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("gate rectangle: frozen fidelities, phases, and the honest validity flags") {
    const PotentialModel m = make_structured_well();
    RectangleSpec rect;
    rect.L_in = 0.3;
    rect.w_in = 0.0;
    rect.L_fin = 0.5;
    rect.w_fin = 0.02;
    rect.samples_per_edge = 64;
    rect.y_start = 0.0;
    rect.y_length = 100.0;
    const ControlPath path = build_path(rect);
    const std::vector<SpectralSolution> chain = solve_chain(m, path, 3, 2000);
    const ConnectionField field4 =
        build_connection_field(m, path, chain, ConnectionMethod::analytic_structured_well);
    const std::vector<OmegaSample> omegas4 = assemble_omega(chain);
    const ConnectionField field2 = truncate_field(field4, 2);
    const std::vector<OmegaSample> omegas2 = truncate_omega(omegas4, 2);
    const std::vector<cplx> C0 = {cplx(1.0, 0.0), cplx(0.0, 0.0)};

    const PropagationResult r3 = integrate_coupled(path, field2, omegas2, 1.0e3, C0);
    const PropagationResult r4 = integrate_coupled(path, field2, omegas2, 1.0e4, C0);
    const PropagationResult r5 = integrate_coupled(path, field2, omegas2, 1.0e5, C0);

    CHECK(r3.fidelity == doctest::Approx(0.9933457484524572).epsilon(1e-9));
    CHECK(r4.fidelity == doctest::Approx(0.9993826672884926).epsilon(1e-9));
    CHECK(r5.fidelity == doctest::Approx(0.999938667076521).epsilon(1e-9));
    CHECK(r4.fidelity >= 0.99);
    // Infidelity falls monotonically with the launch energy: the gate becomes
    // exact in the adiabatic limit.
    CHECK(1.0 - r4.fidelity < 1.0 - r3.fidelity);
    CHECK(1.0 - r5.fidelity < 1.0 - r4.fidelity);

    CHECK(r3.dynamical_phase == doctest::Approx(3120.9959).epsilon(1e-6));
    CHECK(r4.dynamical_phase == doctest::Approx(9987.0223).epsilon(1e-6));
    CHECK(r5.dynamical_phase == doctest::Approx(31618.6751).epsilon(1e-6));

    REQUIRE(r4.alpha.has_value());
    CHECK(*r4.alpha == doctest::Approx(-5.461309394868575).epsilon(1e-9));
    CHECK(r4.leakage == 0.0);
    double norm4 = 0.0;
    for (const cplx& c : r4.final_state.C) norm4 += std::norm(c);
    CHECK(std::abs(std::sqrt(norm4) - 1.0) <= 2e-4);

    // Transported frame: the doublet mixing collapses from the lab-frame
    // rotation to the nonadiabatic residue.
    const std::vector<CMat> cums = cumulative_holonomies(field2, 0.5);
    const std::vector<std::vector<cplx>> tilde4 = gauge_transform(cums, r4.C_samples);
    CHECK(std::abs(tilde4.back()[1]) <= 0.1 * std::abs(r4.C_samples.back()[1]));

    // Honest validity: WKB and quasi-degeneracy are green, but the level-3
    // couplings are not adiabatically small on this loop, so the overall
    // verdict is red.
    const ValidityReport rep = validity_report(path, field4, omegas4, 1.0e4, 1, 2);
    REQUIRE(rep.adiabatic_pairs.size() == 2);
    CHECK(rep.adiabatic_pairs[0] == std::pair<int, int>(3, 0));
    CHECK(rep.adiabatic_pairs[1] == std::pair<int, int>(3, 1));
    CHECK(rep.adiabatic_integrals[0] == doctest::Approx(0.3765).epsilon(2e-3));
    CHECK(rep.adiabatic_integrals[1] == doctest::Approx(0.2305).epsilon(2e-3));
    CHECK_FALSE(rep.adiabatic_ok);
    CHECK(rep.quasi_degeneracy_ratio == doctest::Approx(0.0394).epsilon(3e-2));
    CHECK(rep.quasi_degeneracy_ok);
    CHECK(rep.wkb_ratio <= 1e-6);
    CHECK(rep.wkb_ok);
    CHECK(rep.max_step_knorm == doctest::Approx(0.3216).epsilon(2e-3));
    CHECK_FALSE(rep.all_ok());
}
