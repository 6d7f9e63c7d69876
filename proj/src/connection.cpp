#include "geophase/connection.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "geophase/errors.hpp"

namespace geophase {

const char* method_name(ConnectionMethod m) {
    switch (m) {
        case ConnectionMethod::hellmann_feynman: return "hellmann-feynman";
        case ConnectionMethod::finite_difference: return "finite-difference";
        case ConnectionMethod::analytic_structured_well: return "analytic-structured-well";
    }
    return "unknown";
}

ConnectionSample make_connection_sample(ControlVector R, std::vector<Mat> raw) {
    ConnectionSample s;
    s.R = std::move(R);
    s.components.reserve(raw.size());
    for (Mat& m : raw) {
        Mat k(m.rows, m.cols);
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j)
                k(i, j) = (i == j) ? 0.0 : 0.5 * (m(i, j) - m(j, i));
        s.components.push_back(std::move(k));
    }
    return s;
}

namespace {

// int_lo^hi phi_l phi_l' dx on the solution grid: trapezoid over interior
// nodes plus linearly interpolated partial cells at both ends.
double segment_overlap(const SpectralSolution& s, int l, int lp, double lo, double hi) {
    if (hi <= lo) return 0.0;
    auto f = [&](double x) {
        return eval_state(s, l, x) * eval_state(s, lp, x);
    };
    const auto& va = s.states[static_cast<size_t>(l)];
    const auto& vb = s.states[static_cast<size_t>(lp)];
    auto node_f = [&](int i) {  // product at node i (1-based), walls implicit
        if (i < 1 || i > s.N) return 0.0;
        return va[static_cast<size_t>(i - 1)] * vb[static_cast<size_t>(i - 1)];
    };
    const int i_first = static_cast<int>(std::ceil(lo / s.h + 1e-12));
    const int i_last = static_cast<int>(std::floor(hi / s.h - 1e-12));
    if (i_first > i_last) {
        // Both ends inside one cell.
        return 0.5 * (f(lo) + f(hi)) * (hi - lo);
    }
    double acc = 0.0;
    acc += 0.5 * (f(lo) + node_f(i_first)) * (i_first * s.h - lo);
    for (int i = i_first; i < i_last; ++i) acc += 0.5 * (node_f(i) + node_f(i + 1)) * s.h;
    acc += 0.5 * (node_f(i_last) + f(hi)) * (hi - i_last * s.h);
    return acc;
}

Mat divide_by_gaps(const Mat& numer, const std::vector<double>& eps) {
    const int n = numer.rows;
    Mat k(n, n);
    for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m) {
            if (l == m) continue;
            k(l, m) = numer(l, m) / (eps[static_cast<size_t>(m)] - eps[static_cast<size_t>(l)]);
        }
    return k;
}

bool control_point_valid(const PotentialModel& model, const ControlVector& R) {
    try {
        (void)domain_width(model, R);
        return true;
    } catch (const numerical_error&) {
        return false;
    }
}

// Raw derivative-overlap matrix <phi_l(R) | d_i phi_l'(R)> for one direction
// by differencing overlaps at step distance delta. Central when both sides
// are valid control points, one-sided second order otherwise.
Mat fd_direction(const PotentialModel& model, const SpectralSolution& center, size_t dir,
                 double delta) {
    const int n = center.levels();
    const int lmax = n - 1;
    auto solve_at = [&](double offset) {
        ControlVector R = center.R;
        R[dir] += offset;
        SpectralSolution s = eigensolve(model, R, lmax, center.N);
        try {
            return fix_gauge(std::move(s), &center);
        } catch (const numerical_error& e) {
            throw numerical_error(std::string(e.what()) +
                                  " (while chaining a finite-difference neighbour; try a "
                                  "smaller delta)");
        }
    };
    ControlVector r_minus = center.R;
    r_minus[dir] -= delta;
    Mat raw(n, n);
    if (control_point_valid(model, r_minus)) {
        const SpectralSolution plus = solve_at(delta);
        const SpectralSolution minus = solve_at(-delta);
        for (int l = 0; l < n; ++l)
            for (int m = 0; m < n; ++m)
                raw(l, m) = (overlap(center, l, plus, m) - overlap(center, l, minus, m)) /
                            (2.0 * delta);
    } else {
        // One-sided second-order stencil from the valid side:
        // f'(0) = (-3 f(0) + 4 f(delta) - f(2 delta)) / (2 delta).
        const SpectralSolution p1 = solve_at(delta);
        const SpectralSolution p2 = solve_at(2.0 * delta);
        for (int l = 0; l < n; ++l)
            for (int m = 0; m < n; ++m) {
                const double f0 = overlap(center, l, center, m);
                raw(l, m) = (-3.0 * f0 + 4.0 * overlap(center, l, p1, m) -
                             overlap(center, l, p2, m)) /
                            (2.0 * delta);
            }
    }
    return raw;
}

}  // namespace

ConnectionSample connection_hf(const PotentialModel& model, const SpectralSolution& sol) {
    const int n = sol.levels();
    const size_t dims = sol.R.size();
    std::vector<Mat> raw(dims, Mat(n, n));

    if (model.family == PotentialModel::Family::structured_well) {
        // d/dL moves the barrier's trailing edge at c = a/2 + L (potential
        // jump -V0 there) and the hard wall at D; d/dw moves only the wall.
        // A moving edge with jump J contributes -J (dx_e/dR) phi_l(x_e)
        // phi_m(x_e); the moving Dirichlet wall contributes
        // -(dD/dR) phi_l'(D) phi_m'(D).
        const double c = 0.5 * model.sw.a + sol.R[0];
        std::vector<double> pc_(static_cast<size_t>(n)), dw(static_cast<size_t>(n));
        for (int l = 0; l < n; ++l) {
            pc_[static_cast<size_t>(l)] = eval_state(sol, l, c);
            dw[static_cast<size_t>(l)] = wall_derivative(sol, l);
        }
        for (int l = 0; l < n; ++l)
            for (int m = 0; m < n; ++m) {
                const double edge = model.sw.V0 * pc_[static_cast<size_t>(l)] * pc_[static_cast<size_t>(m)];
                const double wall = dw[static_cast<size_t>(l)] * dw[static_cast<size_t>(m)];
                raw[0](l, m) = edge - wall;  // direction L
                raw[1](l, m) = -wall;        // direction w
            }
    } else if (model.family == PotentialModel::Family::piecewise_constant) {
        const auto& pc = model.pc;
        const double D = sol.D;
        // Resolved edges and values at this control point.
        std::vector<double> edge_x(pc.edges.size());
        std::vector<double> val(pc.values.size());
        for (size_t e = 0; e < pc.edges.size(); ++e)
            edge_x[e] = pc.edges[e].base +
                        (pc.edges[e].control >= 0 ? sol.R[static_cast<size_t>(pc.edges[e].control)] : 0.0);
        for (size_t s = 0; s < pc.values.size(); ++s)
            val[s] = pc.values[s].base +
                     (pc.values[s].control >= 0 ? sol.R[static_cast<size_t>(pc.values[s].control)] : 0.0);
        for (size_t dir = 0; dir < dims; ++dir) {
            Mat& m = raw[dir];
            for (size_t s = 0; s < pc.values.size(); ++s) {
                if (pc.values[s].control != static_cast<int>(dir)) continue;
                const double lo = (s == 0) ? 0.0 : edge_x[s - 1];
                const double hi = (s < edge_x.size()) ? edge_x[s] : D;
                for (int l = 0; l < sol.levels(); ++l)
                    for (int mm = 0; mm < sol.levels(); ++mm)
                        m(l, mm) += segment_overlap(sol, l, mm, lo, hi);
            }
            for (size_t e = 0; e < pc.edges.size(); ++e) {
                if (pc.edges[e].control != static_cast<int>(dir)) continue;
                const double jump = val[e + 1] - val[e];
                for (int l = 0; l < sol.levels(); ++l)
                    for (int mm = 0; mm < sol.levels(); ++mm)
                        m(l, mm) -= jump * eval_state(sol, l, edge_x[e]) *
                                    eval_state(sol, mm, edge_x[e]);
            }
            if (pc.domain.control == static_cast<int>(dir)) {
                for (int l = 0; l < sol.levels(); ++l)
                    for (int mm = 0; mm < sol.levels(); ++mm)
                        m(l, mm) -= wall_derivative(sol, l) * wall_derivative(sol, mm);
            }
        }
    } else {
        // Tabulated potentials carry no control dependence; the connection
        // vanishes identically.
    }

    for (size_t dir = 0; dir < dims; ++dir) raw[dir] = divide_by_gaps(raw[dir], sol.eigenvalues);
    return make_connection_sample(sol.R, std::move(raw));
}

ConnectionSample connection_analytic(const PotentialModel& model, const SpectralSolution& sol) {
    if (model.family != PotentialModel::Family::structured_well)
        throw numerical_error(
            "connection_analytic: the closed-form field exists only for the structured well");
    const int n = sol.levels();
    const double c = 0.5 * model.sw.a + sol.R[0];
    Mat numer(n, n);
    for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m)
            numer(l, m) = -model.sw.V0 * eval_state(sol, l, c) * eval_state(sol, m, c);
    std::vector<Mat> raw;
    raw.push_back(divide_by_gaps(numer, sol.eigenvalues));
    raw.push_back(Mat(n, n));  // w-component vanishes identically in this field
    return make_connection_sample(sol.R, std::move(raw));
}

ConnectionSample connection_fd(const PotentialModel& model, const SpectralSolution& center,
                               const FdParams& params) {
    if (!(params.delta > 0.0)) throw numerical_error("connection_fd: delta must be positive");
    const size_t dims = center.R.size();
    std::vector<Mat> raw(dims);
    for (size_t dir = 0; dir < dims; ++dir) {
        Mat full = fd_direction(model, center, dir, params.delta);
        if (params.richardson) {
            // (4 f(delta/2) - f(delta)) / 3 cancels the leading O(delta^2)
            // error of either stencil.
            Mat half = fd_direction(model, center, dir, 0.5 * params.delta);
            raw[dir] = (1.0 / 3.0) * (4.0 * half - full);
        } else {
            raw[dir] = full;
        }
    }
    return make_connection_sample(center.R, std::move(raw));
}

ConnectionField build_connection_field(const PotentialModel& model, const ControlPath& path,
                                       const std::vector<SpectralSolution>& chain,
                                       ConnectionMethod method, const FdParams& params) {
    if (chain.size() != path.samples.size())
        throw numerical_error("build_connection_field: spectra chain does not match the path");
    ConnectionField field;
    field.method = method;
    field.samples.reserve(chain.size());
    for (const SpectralSolution& sol : chain) {
        switch (method) {
            case ConnectionMethod::hellmann_feynman:
                field.samples.push_back(connection_hf(model, sol));
                break;
            case ConnectionMethod::finite_difference:
                field.samples.push_back(connection_fd(model, sol, params));
                break;
            case ConnectionMethod::analytic_structured_well:
                field.samples.push_back(connection_analytic(model, sol));
                break;
        }
    }
    return field;
}

LambdaField two_level_lambda(const ConnectionField& field, double warn_threshold) {
    LambdaField out;
    out.samples.reserve(field.samples.size());
    for (size_t k = 0; k < field.samples.size(); ++k) {
        const ConnectionSample& s = field.samples[k];
        if (s.components.empty() || s.components.front().rows < 2)
            throw numerical_error("two_level_lambda: the field must retain levels {0, 1}");
        LambdaSample ls;
        ls.R = s.R;
        ls.lambda.resize(s.components.size());
        double k01 = 0.0, k02 = 0.0, k12 = 0.0;
        for (size_t dir = 0; dir < s.components.size(); ++dir) {
            const Mat& m = s.components[dir];
            ls.lambda[dir] = m(0, 1);
            k01 = std::max(k01, std::abs(m(0, 1)));
            if (m.rows >= 3) {
                k02 = std::max(k02, std::abs(m(0, 2)));
                k12 = std::max(k12, std::abs(m(1, 2)));
            }
        }
        if (k01 > 0.0)
            ls.dominance_ratio = std::max(k02, k12) / k01;
        else if (std::max(k02, k12) > 0.0)
            ls.dominance_ratio = std::numeric_limits<double>::infinity();
        if (ls.dominance_ratio > warn_threshold) {
            std::ostringstream msg;
            msg << "two_level_lambda: coupling to level 2 is " << ls.dominance_ratio
                << " of the doublet coupling at sample " << k << " (threshold "
                << warn_threshold << "); the two-level reduction is strained there";
            out.warnings.push_back(msg.str());
        }
        out.samples.push_back(std::move(ls));
    }
    return out;
}

}  // namespace geophase
