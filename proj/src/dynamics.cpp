#include "geophase/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "geophase/errors.hpp"

namespace geophase {

OmegaSample assemble_omega(const SpectralSolution& sol) {
    if (sol.levels() < 2)
        throw numerical_error("assemble_omega: the mode-space operator needs at least 2 levels");
    OmegaSample o;
    o.eps = sol.eigenvalues;
    o.omega_bar = 0.5 * (sol.eigenvalues[0] + sol.eigenvalues[1]);
    o.gap = sol.eigenvalues[1] - sol.eigenvalues[0];
    return o;
}

std::vector<OmegaSample> assemble_omega(const std::vector<SpectralSolution>& chain) {
    std::vector<OmegaSample> out;
    out.reserve(chain.size());
    for (const auto& sol : chain) out.push_back(assemble_omega(sol));
    return out;
}

ConnectionField truncate_field(const ConnectionField& field, int levels) {
    if (levels < 2) throw numerical_error("truncate_field: need at least 2 levels");
    ConnectionField out;
    out.method = field.method;
    out.samples.reserve(field.samples.size());
    for (const ConnectionSample& s : field.samples) {
        if (s.components.front().rows < levels)
            throw numerical_error("truncate_field: field retains fewer levels than requested");
        ConnectionSample t;
        t.R = s.R;
        for (const Mat& m : s.components) {
            Mat b(levels, levels);
            for (int i = 0; i < levels; ++i)
                for (int j = 0; j < levels; ++j) b(i, j) = m(i, j);
            t.components.push_back(std::move(b));
        }
        out.samples.push_back(std::move(t));
    }
    return out;
}

std::vector<OmegaSample> truncate_omega(const std::vector<OmegaSample>& omegas, int levels) {
    std::vector<OmegaSample> out = omegas;
    for (OmegaSample& o : out) {
        if (static_cast<int>(o.eps.size()) < levels)
            throw numerical_error("truncate_omega: chain retains fewer levels than requested");
        o.eps.resize(static_cast<size_t>(levels));
    }
    return out;
}

namespace {

// Contraction K_y = sum_i K^i dR_i/dy at a field sample, given the segment
// slope.
Mat contract(const ConnectionSample& s, const std::vector<double>& slope) {
    const int n = s.components.front().rows;
    Mat k(n, n);
    for (size_t dir = 0; dir < s.components.size(); ++dir) {
        if (slope[dir] == 0.0) continue;
        k = k + slope[dir] * s.components[dir];
    }
    return k;
}

// Exact integral over one segment of |g0 + (g1 - g0) t| dt, t in [0, 1].
double abs_linear_integral(double g0, double g1) {
    if (g0 * g1 >= 0.0) return 0.5 * std::abs(g0 + g1);
    return 0.5 * (g0 * g0 + g1 * g1) / std::abs(g1 - g0);
}

void check_alignment(const ControlPath& path, const ConnectionField& field,
                     const std::vector<OmegaSample>& omegas) {
    if (field.samples.size() != path.samples.size() || omegas.size() != path.samples.size())
        throw numerical_error("field and spectrum chains must align with the path samples");
}

}  // namespace

PropagationResult integrate_coupled(const ControlPath& path, const ConnectionField& field,
                                    const std::vector<OmegaSample>& omegas, double epsilon,
                                    const std::vector<cplx>& C0, const IntegrateOptions& opts) {
    check_alignment(path, field, omegas);
    const int dim = static_cast<int>(C0.size());
    if (dim < 2) throw numerical_error("integrate_coupled: need at least the doublet amplitudes");
    if (field.samples.front().components.front().rows != dim)
        throw numerical_error("integrate_coupled: field level count must match C0");
    for (const OmegaSample& o : omegas) {
        if (static_cast<int>(o.eps.size()) < dim)
            throw numerical_error("integrate_coupled: omega chain retains fewer levels than C0");
        for (int l = 0; l < dim; ++l)
            if (!(epsilon > o.eps[static_cast<size_t>(l)]))
                throw numerical_error(
                    "integrate_coupled: epsilon must exceed every retained transverse level "
                    "(the launched mode would be evanescent)");
    }
    if (!(opts.step_factor > 0.0))
        throw numerical_error("integrate_coupled: step factor must be positive");
    if (opts.step_factor > 0.2)
        throw numerical_error(
            "integrate_coupled: sqrt(epsilon) dy above 0.2 cannot resolve the longitudinal "
            "oscillation; lower the step factor");

    const double sq_eps = std::sqrt(epsilon);
    const size_t M = path.samples.size();

    PropagationResult res;
    res.y_samples.reserve(M);
    res.C_samples.reserve(M);

    // State u = (C, v), v = C' + K C.
    std::vector<cplx> u(2 * static_cast<size_t>(dim), cplx(0.0, 0.0));
    for (int l = 0; l < dim; ++l) {
        u[static_cast<size_t>(l)] = C0[static_cast<size_t>(l)];
        u[static_cast<size_t>(dim + l)] =
            cplx(0.0, std::sqrt(epsilon - omegas.front().eps[static_cast<size_t>(l)])) *
            C0[static_cast<size_t>(l)];
    }
    auto record_sample = [&](double y) {
        res.y_samples.push_back(y);
        res.C_samples.emplace_back(u.begin(), u.begin() + dim);
    };
    record_sample(path.y_start());

    long long step_counter = 0;
    auto record_trace = [&](double y) {
        if (!opts.record_trace) return;
        res.trace_y.push_back(y);
        std::vector<double> pop(static_cast<size_t>(dim));
        for (int l = 0; l < dim; ++l) pop[static_cast<size_t>(l)] = std::norm(u[static_cast<size_t>(l)]);
        res.trace_pop.push_back(std::move(pop));
    };
    record_trace(path.y_start());

    for (size_t k = 0; k + 1 < M; ++k) {
        const double y0 = path.samples[k].y, y1 = path.samples[k + 1].y;
        const double dy = y1 - y0;
        const ControlVector& Ra = path.samples[k].R;
        const ControlVector& Rb = path.samples[k + 1].R;
        std::vector<double> slope(Ra.size());
        for (size_t d = 0; d < Ra.size(); ++d) slope[d] = (Rb[d] - Ra[d]) / dy;
        const Mat Ka = contract(field.samples[k], slope);
        const Mat Kb = contract(field.samples[k + 1], slope);
        const std::vector<double>& ea = omegas[k].eps;
        const std::vector<double>& eb = omegas[k + 1].eps;

        auto rhs = [&](double y, const std::vector<cplx>& s) {
            const double t = (y - y0) / dy;
            std::vector<cplx> ds(2 * static_cast<size_t>(dim));
            // K C and K v with K = (1 - t) Ka + t Kb.
            for (int i = 0; i < dim; ++i) {
                cplx kc(0.0, 0.0), kv(0.0, 0.0);
                for (int j = 0; j < dim; ++j) {
                    const double kij = (1.0 - t) * Ka(i, j) + t * Kb(i, j);
                    if (kij == 0.0) continue;
                    kc += kij * s[static_cast<size_t>(j)];
                    kv += kij * s[static_cast<size_t>(dim + j)];
                }
                const double eps_l =
                    (1.0 - t) * ea[static_cast<size_t>(i)] + t * eb[static_cast<size_t>(i)];
                ds[static_cast<size_t>(i)] = s[static_cast<size_t>(dim + i)] - kc;
                ds[static_cast<size_t>(dim + i)] =
                    -kv - (epsilon - eps_l) * s[static_cast<size_t>(i)];
            }
            return ds;
        };

        const long long m = std::max<long long>(
            1, static_cast<long long>(std::ceil(dy * sq_eps / opts.step_factor)));
        const double h = dy / static_cast<double>(m);
        for (long long step = 0; step < m; ++step) {
            u = rk4_step(rhs, y0 + step * h, u, h);
            ++step_counter;
            if (opts.record_trace && (step_counter % std::max(1, opts.trace_stride) == 0))
                record_trace(y0 + (step + 1) * h);
        }
        for (const cplx& z : u)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw numerical_error("integrate_coupled: state diverged (non-finite amplitude)");
        record_sample(y1);
    }
    record_trace(path.y_end());

    // Final ModeState: dC = v - K C at the endpoint (slope of the last
    // segment).
    {
        const size_t k = M - 2;
        const double dy = path.samples[k + 1].y - path.samples[k].y;
        std::vector<double> slope(path.samples[k].R.size());
        for (size_t d = 0; d < slope.size(); ++d)
            slope[d] = (path.samples[k + 1].R[d] - path.samples[k].R[d]) / dy;
        const Mat Kend = contract(field.samples[M - 1], slope);
        res.final_state.y = path.y_end();
        res.final_state.epsilon = epsilon;
        res.final_state.C.assign(u.begin(), u.begin() + dim);
        res.final_state.dC.resize(static_cast<size_t>(dim));
        for (int i = 0; i < dim; ++i) {
            cplx kc(0.0, 0.0);
            for (int j = 0; j < dim; ++j) kc += Kend(i, j) * u[static_cast<size_t>(j)];
            res.final_state.dC[static_cast<size_t>(i)] = u[static_cast<size_t>(dim + i)] - kc;
        }
    }

    const WkbPropagator wkb = wkb_propagator(path, omegas, epsilon);
    res.dynamical_phase = wkb.phase_refined;
    const Holonomy pred = ordered_exponential(field, path.closed, opts.holonomy_step_bound);
    res.alpha = pred.alpha;
    res.C_pred = predict_output(C0, pred, wkb.phase_refined);

    double np = 0.0, nf = 0.0;
    cplx ip(0.0, 0.0);
    for (int l = 0; l < dim; ++l) {
        np += std::norm(res.C_pred[static_cast<size_t>(l)]);
        nf += std::norm(res.final_state.C[static_cast<size_t>(l)]);
        ip += std::conj(res.C_pred[static_cast<size_t>(l)]) * res.final_state.C[static_cast<size_t>(l)];
    }
    res.fidelity = (np > 0.0 && nf > 0.0) ? std::abs(ip) / std::sqrt(np * nf) : 0.0;
    double high = 0.0;
    for (int l = 2; l < dim; ++l) high += std::norm(res.final_state.C[static_cast<size_t>(l)]);
    res.leakage = (nf > 0.0) ? high / nf : 0.0;
    return res;
}

std::vector<std::vector<cplx>> gauge_transform(const std::vector<CMat>& cumulative,
                                               const std::vector<std::vector<cplx>>& C,
                                               bool inverse) {
    if (cumulative.size() != C.size())
        throw numerical_error("gauge_transform: transport and amplitude chains differ in length");
    std::vector<std::vector<cplx>> out(C.size());
    for (size_t k = 0; k < C.size(); ++k) {
        const CMat u = inverse ? cumulative[k] : adjoint(cumulative[k]);
        const int n = u.rows;
        if (static_cast<size_t>(n) != C[k].size())
            throw numerical_error("gauge_transform: level count mismatch");
        std::vector<cplx> v(static_cast<size_t>(n), cplx(0.0, 0.0));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) v[static_cast<size_t>(i)] += u(i, j) * C[k][static_cast<size_t>(j)];
        out[k] = std::move(v);
    }
    return out;
}

WkbPropagator wkb_propagator(const ControlPath& path, const std::vector<OmegaSample>& omegas,
                             double epsilon) {
    if (omegas.size() != path.samples.size())
        throw numerical_error("wkb_propagator: omega chain must align with the path samples");
    WkbPropagator out;
    for (size_t k = 0; k < omegas.size(); ++k)
        if (!(epsilon > omegas[k].omega_bar))
            throw numerical_error(
                "wkb_propagator: epsilon does not exceed omega_bar along the path; the "
                "longitudinal factor would be evanescent");
    for (size_t k = 0; k + 1 < omegas.size(); ++k) {
        const double dy = path.samples[k + 1].y - path.samples[k].y;
        const double q0 = epsilon - omegas[k].omega_bar;
        const double q1 = epsilon - omegas[k + 1].omega_bar;
        // Exact integral of sqrt(linear) over the segment.
        if (std::abs(q1 - q0) < 1e-12 * q0)
            out.phase_refined += dy * std::sqrt(0.5 * (q0 + q1));
        else
            out.phase_refined +=
                dy * (2.0 / 3.0) * (std::pow(q1, 1.5) - std::pow(q0, 1.5)) / (q1 - q0);
    }
    out.phase_crude = std::sqrt(epsilon) * (path.y_end() - path.y_start());
    return out;
}

std::vector<cplx> predict_output(const std::vector<cplx>& C0, const Holonomy& holonomy,
                                 double phase) {
    const int n = holonomy.U.rows;
    if (static_cast<size_t>(n) != C0.size())
        throw numerical_error("predict_output: holonomy and input dimensions differ");
    const cplx ph = std::exp(cplx(0.0, phase));
    std::vector<cplx> out(static_cast<size_t>(n), cplx(0.0, 0.0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(i)] += holonomy.U(i, j) * C0[static_cast<size_t>(j)];
        out[static_cast<size_t>(i)] *= ph;
    }
    return out;
}

ValidityReport validity_report(const ControlPath& path, const ConnectionField& field,
                               const std::vector<OmegaSample>& omegas, double epsilon, int l0,
                               int l_off, const ValidityThresholds& thr) {
    check_alignment(path, field, omegas);
    const int levels = field.samples.front().components.front().rows;
    if (!(0 <= l0 && l0 <= l_off))
        throw numerical_error("validity_report: need 0 <= l0 <= l_off");
    if (levels < l_off + 2)
        throw numerical_error(
            "validity_report: the field must retain at least l_off + 2 levels to probe the "
            "first discarded coupling");
    for (const OmegaSample& o : omegas)
        if (static_cast<int>(o.eps.size()) < l_off + 2)
            throw numerical_error("validity_report: omega chain must retain l_off + 2 levels");
    if (!(epsilon > 0.0)) throw numerical_error("validity_report: epsilon must be positive");

    ValidityReport rep;
    rep.thr_adiabatic = thr.adiabatic;
    rep.thr_quasi_degeneracy = thr.quasi_degeneracy;
    rep.thr_wkb = thr.wkb;

    // Neglected couplings: every (discarded l, retained l' <= l0) pair.
    for (int l = l_off + 1; l < levels; ++l)
        for (int lp = 0; lp <= l0; ++lp) rep.adiabatic_pairs.emplace_back(l, lp);
    rep.adiabatic_integrals.assign(rep.adiabatic_pairs.size(), 0.0);

    const double e32 = 2.0 * std::pow(epsilon, 1.5);
    for (size_t k = 0; k + 1 < path.samples.size(); ++k) {
        const double dy = path.samples[k + 1].y - path.samples[k].y;
        std::vector<double> slope(path.samples[k].R.size());
        for (size_t d = 0; d < slope.size(); ++d)
            slope[d] = (path.samples[k + 1].R[d] - path.samples[k].R[d]) / dy;
        const Mat Ka = contract(field.samples[k], slope);
        const Mat Kb = contract(field.samples[k + 1], slope);
        for (size_t p = 0; p < rep.adiabatic_pairs.size(); ++p) {
            const auto [l, lp] = rep.adiabatic_pairs[p];
            rep.adiabatic_integrals[p] += dy * abs_linear_integral(Ka(l, lp), Kb(l, lp));
        }
        rep.max_step_knorm =
            std::max(rep.max_step_knorm, frobenius_norm(0.5 * (Ka + Kb)) * dy);
        for (int l = 0; l <= l_off; ++l) {
            const double de = std::abs(omegas[k + 1].eps[static_cast<size_t>(l)] -
                                       omegas[k].eps[static_cast<size_t>(l)]) /
                              dy;
            rep.wkb_ratio = std::max(rep.wkb_ratio, de / e32);
        }
    }
    for (const OmegaSample& o : omegas) {
        const double num = o.eps[static_cast<size_t>(l0)] - o.eps[0];
        const double den = o.eps[static_cast<size_t>(l_off + 1)] - o.eps[static_cast<size_t>(l0)];
        if (!(den > 0.0))
            throw numerical_error("validity_report: spectrum is not ordered above the multiplet");
        rep.quasi_degeneracy_ratio = std::max(rep.quasi_degeneracy_ratio, num / den);
    }

    for (double v : rep.adiabatic_integrals)
        if (v > rep.thr_adiabatic) rep.adiabatic_ok = false;
    rep.quasi_degeneracy_ok = rep.quasi_degeneracy_ratio <= rep.thr_quasi_degeneracy;
    rep.wkb_ok = rep.wkb_ratio <= rep.thr_wkb;
    return rep;
}

}  // namespace geophase
