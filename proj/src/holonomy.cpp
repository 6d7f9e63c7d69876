#include "geophase/holonomy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "geophase/errors.hpp"

namespace geophase {

const char* method_name(HolonomyMethod m) {
    switch (m) {
        case HolonomyMethod::ordered_exponential: return "ordered-exponential";
        case HolonomyMethod::abelian_line_integral: return "abelian-line-integral";
        case HolonomyMethod::abelian_stokes: return "abelian-stokes";
    }
    return "unknown";
}

namespace {

CMat rotation01(double a, int dim) {
    CMat u = CMat::identity(dim);
    u(0, 0) = std::cos(a);
    u(0, 1) = -std::sin(a);
    u(1, 0) = std::sin(a);
    u(1, 1) = std::cos(a);
    return u;
}

bool matches_block_rotation(const CMat& u, double a, double tol) {
    if (u.rows < 2) return false;
    return max_abs(u - rotation01(a, u.rows)) <= tol;
}

// Midpoint generators G_k = K(midpoint of segment k) . dR_k from the mean of
// the bounding samples.
std::vector<Mat> segment_generators(const ConnectionField& field, double step_bound) {
    if (field.samples.size() < 2)
        throw numerical_error("holonomy: the field needs at least 2 aligned samples");
    const size_t dims = field.samples.front().components.size();
    const int n = field.samples.front().components.front().rows;
    std::vector<Mat> gens;
    gens.reserve(field.samples.size() - 1);
    for (size_t k = 0; k + 1 < field.samples.size(); ++k) {
        const ConnectionSample& s0 = field.samples[k];
        const ConnectionSample& s1 = field.samples[k + 1];
        Mat g(n, n);
        for (size_t dir = 0; dir < dims; ++dir) {
            const double dR = s1.R[dir] - s0.R[dir];
            if (dR == 0.0) continue;
            g = g + (0.5 * dR) * (s0.components[dir] + s1.components[dir]);
        }
        if (frobenius_norm(g) > step_bound) {
            std::ostringstream msg;
            msg << "holonomy: segment " << k << " has |K . dR| = " << frobenius_norm(g)
                << " above the step bound " << step_bound
                << "; subdivide the path (more samples per edge)";
            throw numerical_error(msg.str());
        }
        gens.push_back(std::move(g));
    }
    return gens;
}

void check_unitary(const CMat& u, const char* who) {
    if (unitarity_defect(u) > 1e-8)
        throw numerical_error(std::string(who) + ": produced transport lost unitarity");
}

// Derivative at x0 of the quadratic through three (x, f) points.
double quad_deriv_at(const double xs[3], const double fs[3], double x0) {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3, c = (a + 2) % 3;
        d += fs[a] * ((x0 - xs[b]) + (x0 - xs[c])) / ((xs[a] - xs[b]) * (xs[a] - xs[c]));
    }
    return d;
}

}  // namespace

Holonomy ordered_exponential(const ConnectionField& field, bool closed_path, double step_bound) {
    const std::vector<Mat> gens = segment_generators(field, step_bound);
    const int n = gens.front().rows;

    Mat u_real = Mat::identity(n);
    for (const Mat& g : gens) u_real = expm(-1.0 * g) * u_real;

    Holonomy h;
    h.U = CMat::from_real(u_real);
    h.method = HolonomyMethod::ordered_exponential;
    h.geometric = closed_path;
    check_unitary(h.U, "ordered_exponential");

    // alpha is meaningful when the transport is abelian and lives on the
    // doublet block: all segment generators commute and their sum has no
    // entries outside (0, 1).
    Mat total(n, n);
    double gmax = 0.0;
    for (const Mat& g : gens) {
        total = total + g;
        gmax = std::max(gmax, frobenius_norm(g));
    }
    bool commuting = true;
    for (size_t i = 0; i < gens.size() && commuting; ++i)
        for (size_t j = i + 1; j < gens.size(); ++j) {
            const Mat comm = gens[i] * gens[j] - gens[j] * gens[i];
            if (frobenius_norm(comm) > 1e-10 * (1.0 + gmax * gmax)) {
                commuting = false;
                break;
            }
        }
    if (commuting && n >= 2) {
        double outside = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if ((i == 0 && j == 1) || (i == 1 && j == 0)) continue;
                outside = std::max(outside, std::abs(total(i, j)));
            }
        if (outside <= 1e-10 * (1.0 + max_abs(total))) {
            const double a = total(0, 1);
            if (matches_block_rotation(h.U, a, 1e-8)) h.alpha = a;
        }
    }
    return h;
}

std::vector<CMat> cumulative_holonomies(const ConnectionField& field, double step_bound) {
    const std::vector<Mat> gens = segment_generators(field, step_bound);
    const int n = gens.front().rows;
    std::vector<CMat> out;
    out.reserve(gens.size() + 1);
    Mat u = Mat::identity(n);
    out.push_back(CMat::from_real(u));
    for (const Mat& g : gens) {
        u = expm(-1.0 * g) * u;
        out.push_back(CMat::from_real(u));
    }
    return out;
}

Holonomy abelian_phase_line(const LambdaField& lambda, bool closed_path) {
    if (lambda.samples.size() < 2)
        throw numerical_error("abelian_phase_line: need at least 2 lambda samples");
    double alpha = 0.0;
    for (size_t k = 0; k + 1 < lambda.samples.size(); ++k) {
        const LambdaSample& a = lambda.samples[k];
        const LambdaSample& b = lambda.samples[k + 1];
        for (size_t dir = 0; dir < a.lambda.size(); ++dir)
            alpha += 0.5 * (a.lambda[dir] + b.lambda[dir]) * (b.R[dir] - a.R[dir]);
    }
    Holonomy h;
    h.U = rotation01(alpha, 2);
    h.alpha = alpha;
    h.method = HolonomyMethod::abelian_line_integral;
    h.geometric = closed_path;
    return h;
}

LambdaGrid tabulate_lambda(const PotentialModel& model, std::vector<double> L_axis,
                           std::vector<double> w_axis, ConnectionMethod method, int lmax,
                           int N, int threads) {
    if (L_axis.size() < 2 || w_axis.size() < 2)
        throw numerical_error("tabulate_lambda: need at least a 2 x 2 grid");
    for (size_t i = 1; i < L_axis.size(); ++i)
        if (!(L_axis[i] > L_axis[i - 1]))
            throw numerical_error("tabulate_lambda: L axis must be strictly increasing");
    for (size_t j = 1; j < w_axis.size(); ++j)
        if (!(w_axis[j] > w_axis[j - 1]))
            throw numerical_error("tabulate_lambda: w axis must be strictly increasing");

    LambdaGrid grid;
    grid.L = std::move(L_axis);
    grid.w = std::move(w_axis);
    const size_t nl = grid.L.size(), nw = grid.w.size();
    grid.lambda.assign(nl, std::vector<ControlVector>(nw));

    const size_t total = nl * nw;
    std::atomic<size_t> next{0};
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const size_t idx = next.fetch_add(1);
            if (idx >= total) return;
            const size_t i = idx / nw, j = idx % nw;
            try {
                const ControlVector R = {grid.L[i], grid.w[j]};
                const SpectralSolution sol = eigensolve(model, R, lmax, N);
                ConnectionSample s;
                switch (method) {
                    case ConnectionMethod::hellmann_feynman: s = connection_hf(model, sol); break;
                    case ConnectionMethod::finite_difference: s = connection_fd(model, sol); break;
                    case ConnectionMethod::analytic_structured_well:
                        s = connection_analytic(model, sol);
                        break;
                }
                ControlVector lam(s.components.size());
                for (size_t d = 0; d < s.components.size(); ++d) lam[d] = s.components[d](0, 1);
                grid.lambda[i][j] = std::move(lam);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(total);
                return;
            }
        }
    };
    const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(total)));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return grid;
}

std::vector<CurvatureSample> curvature_samples(const LambdaGrid& grid) {
    const size_t nl = grid.L.size(), nw = grid.w.size();
    if (nl < 3 || nw < 3)
        throw numerical_error("curvature_samples: need at least a 3 x 3 lambda grid");
    std::vector<CurvatureSample> out;
    out.reserve(nl * nw);
    auto lam = [&](size_t i, size_t j, size_t dir) { return grid.lambda[i][j][dir]; };
    // Derivative of lambda component dir along one axis at node (i, j):
    // central three-point stencil inside, one-sided at the window edges.
    auto deriv_along = [&](size_t i, size_t j, int axis, size_t dir) {
        const size_t n = (axis == 0) ? nl : nw;
        const size_t c = (axis == 0) ? i : j;
        const size_t s = (c == 0) ? 0 : std::min(c - 1, n - 3);
        double xs[3], fs[3];
        for (int t = 0; t < 3; ++t) {
            const size_t idx = s + static_cast<size_t>(t);
            xs[t] = (axis == 0) ? grid.L[idx] : grid.w[idx];
            fs[t] = (axis == 0) ? lam(idx, j, dir) : lam(i, idx, dir);
        }
        return quad_deriv_at(xs, fs, (axis == 0) ? grid.L[c] : grid.w[c]);
    };
    for (size_t i = 0; i < nl; ++i)
        for (size_t j = 0; j < nw; ++j) {
            CurvatureSample cs;
            cs.R = {grid.L[i], grid.w[j]};
            cs.F = deriv_along(i, j, 0, 1) - deriv_along(i, j, 1, 0);
            out.push_back(std::move(cs));
        }
    return out;
}

Holonomy abelian_phase_stokes(const LambdaGrid& grid, const RectangleSpec& rect) {
    const size_t nl = grid.L.size(), nw = grid.w.size();
    const double L_lo = std::min(rect.L_in, rect.L_fin), L_hi = std::max(rect.L_in, rect.L_fin);
    const double w_lo = std::min(rect.w_in, rect.w_fin), w_hi = std::max(rect.w_in, rect.w_fin);
    const double tol_L = 1e-9 * (1.0 + grid.L.back() - grid.L.front());
    const double tol_w = 1e-9 * (1.0 + grid.w.back() - grid.w.front());
    if (L_lo < grid.L.front() - tol_L || L_hi > grid.L.back() + tol_L ||
        w_lo < grid.w.front() - tol_w || w_hi > grid.w.back() + tol_w)
        throw numerical_error(
            "abelian_phase_stokes: rectangle exits the sampled lambda window");

    const std::vector<CurvatureSample> curv = curvature_samples(grid);
    auto F = [&](size_t i, size_t j) { return curv[i * nw + j].F; };

    // Integrate the bilinear interpolant of F over the rectangle, cell by
    // cell (exact per cell: area times the mean of the clipped corner
    // values).
    double integral = 0.0;
    for (size_t i = 0; i + 1 < nl; ++i) {
        const double la = grid.L[i], lb = grid.L[i + 1];
        const double clo = std::max(L_lo, la), chi = std::min(L_hi, lb);
        if (chi <= clo) continue;
        for (size_t j = 0; j + 1 < nw; ++j) {
            const double wa = grid.w[j], wb = grid.w[j + 1];
            const double dlo = std::max(w_lo, wa), dhi = std::min(w_hi, wb);
            if (dhi <= dlo) continue;
            auto bil = [&](double x, double yw) {
                const double tx = (x - la) / (lb - la);
                const double ty = (yw - wa) / (wb - wa);
                return (1 - tx) * (1 - ty) * F(i, j) + tx * (1 - ty) * F(i + 1, j) +
                       (1 - tx) * ty * F(i, j + 1) + tx * ty * F(i + 1, j + 1);
            };
            const double mean =
                0.25 * (bil(clo, dlo) + bil(chi, dlo) + bil(clo, dhi) + bil(chi, dhi));
            integral += mean * (chi - clo) * (dhi - dlo);
        }
    }

    // The canonical traversal is clockwise in (L, w); by the right-hand rule
    // its enclosed surface is oriented along -z, so the circulation equals
    // minus the integral of F = d_L lambda_w - d_w lambda_L.
    const double alpha = -integral;
    Holonomy h;
    h.U = rotation01(alpha, 2);
    h.alpha = alpha;
    h.method = HolonomyMethod::abelian_stokes;
    return h;
}

Holonomy compose(const Holonomy& h1, const Holonomy& h2) {
    if (h1.U.rows != h2.U.rows)
        throw numerical_error("compose: holonomies act on different level counts");
    Holonomy h;
    h.U = h1.U * h2.U;
    h.method = (h1.method == h2.method) ? h1.method : HolonomyMethod::ordered_exponential;
    h.geometric = h1.geometric && h2.geometric;
    check_unitary(h.U, "compose");
    if (h1.alpha && h2.alpha) {
        const double a = *h1.alpha + *h2.alpha;
        // Keep alpha only when the factors actually commute into a doublet
        // rotation by the summed angle.
        if (matches_block_rotation(h.U, a, 1e-8)) h.alpha = a;
    }
    return h;
}

Holonomy embed_two_level(double alpha, int l, int lp, int dim) {
    if (!(0 <= l && l < lp && lp < dim))
        throw numerical_error("embed_two_level: need 0 <= l < lp < dim");
    // exp(i alpha sigma_2) = [[cos a, sin a], [-sin a, cos a]] in the (l, lp)
    // block.
    Holonomy h;
    h.U = CMat::identity(dim);
    h.U(l, l) = std::cos(alpha);
    h.U(l, lp) = std::sin(alpha);
    h.U(lp, l) = -std::sin(alpha);
    h.U(lp, lp) = std::cos(alpha);
    h.method = HolonomyMethod::ordered_exponential;
    // In the doublet convention U = exp(-i alpha sigma_2), so the embedded
    // angle on the (0, 1) block is -alpha.
    if (l == 0 && lp == 1 && dim >= 2) {
        if (matches_block_rotation(h.U, -alpha, 1e-12)) h.alpha = -alpha;
    }
    return h;
}

}  // namespace geophase
