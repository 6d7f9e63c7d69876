#include "geophase/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "geophase/errors.hpp"

namespace geophase {

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat operator+(const Mat& x, const Mat& y) {
    Mat r(x.rows, x.cols);
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = x.a[i] + y.a[i];
    return r;
}

Mat operator-(const Mat& x, const Mat& y) {
    Mat r(x.rows, x.cols);
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = x.a[i] - y.a[i];
    return r;
}

Mat operator*(const Mat& x, const Mat& y) {
    Mat r(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            const double xv = x(i, k);
            if (xv == 0.0) continue;
            for (int j = 0; j < y.cols; ++j) r(i, j) += xv * y(k, j);
        }
    return r;
}

Mat operator*(double s, const Mat& x) {
    Mat r = x;
    for (double& v : r.a) v *= s;
    return r;
}

Mat transpose(const Mat& x) {
    Mat r(x.cols, x.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) r(j, i) = x(i, j);
    return r;
}

double frobenius_norm(const Mat& x) {
    double s = 0.0;
    for (double v : x.a) s += v * v;
    return std::sqrt(s);
}

double max_abs(const Mat& x) {
    double s = 0.0;
    for (double v : x.a) s = std::max(s, std::abs(v));
    return s;
}

Mat expm(const Mat& x) {
    // Scaling and squaring: exp(x) = exp(x / 2^s)^(2^s) with the scaled norm
    // below 1/2, then a Taylor series to machine precision.
    const int n = x.rows;
    double norm = max_abs(x) * n;
    int s = 0;
    while (norm > 0.5 && s < 60) {
        norm *= 0.5;
        ++s;
    }
    Mat xs = std::ldexp(1.0, -s) * x;
    Mat result = Mat::identity(n);
    Mat term = Mat::identity(n);
    for (int k = 1; k <= 24; ++k) {
        term = (1.0 / k) * (term * xs);
        result = result + term;
        if (max_abs(term) < 1e-18) break;
    }
    for (int i = 0; i < s; ++i) result = result * result;
    return result;
}

CMat CMat::identity(int n) {
    CMat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = cplx(1.0, 0.0);
    return m;
}

CMat CMat::from_real(const Mat& x) {
    CMat m(x.rows, x.cols);
    for (size_t i = 0; i < x.a.size(); ++i) m.a[i] = cplx(x.a[i], 0.0);
    return m;
}

CMat operator+(const CMat& x, const CMat& y) {
    CMat r(x.rows, x.cols);
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = x.a[i] + y.a[i];
    return r;
}

CMat operator-(const CMat& x, const CMat& y) {
    CMat r(x.rows, x.cols);
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = x.a[i] - y.a[i];
    return r;
}

CMat operator*(const CMat& x, const CMat& y) {
    CMat r(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            const cplx xv = x(i, k);
            if (xv == cplx(0.0, 0.0)) continue;
            for (int j = 0; j < y.cols; ++j) r(i, j) += xv * y(k, j);
        }
    return r;
}

CMat operator*(cplx s, const CMat& x) {
    CMat r = x;
    for (cplx& v : r.a) v *= s;
    return r;
}

CMat adjoint(const CMat& x) {
    CMat r(x.cols, x.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) r(j, i) = std::conj(x(i, j));
    return r;
}

double frobenius_norm(const CMat& x) {
    double s = 0.0;
    for (const cplx& v : x.a) s += std::norm(v);
    return std::sqrt(s);
}

double max_abs(const CMat& x) {
    double s = 0.0;
    for (const cplx& v : x.a) s = std::max(s, std::abs(v));
    return s;
}

CMat expm(const CMat& x) {
    const int n = x.rows;
    double norm = max_abs(x) * n;
    int s = 0;
    while (norm > 0.5 && s < 60) {
        norm *= 0.5;
        ++s;
    }
    CMat xs = cplx(std::ldexp(1.0, -s), 0.0) * x;
    CMat result = CMat::identity(n);
    CMat term = CMat::identity(n);
    for (int k = 1; k <= 24; ++k) {
        term = cplx(1.0 / k, 0.0) * (term * xs);
        result = result + term;
        if (max_abs(term) < 1e-18) break;
    }
    for (int i = 0; i < s; ++i) result = result * result;
    return result;
}

double unitarity_defect(const CMat& x) {
    return frobenius_norm(adjoint(x) * x - CMat::identity(x.cols));
}

namespace {

// Number of eigenvalues of the tridiagonal matrix strictly below x, from the
// signs of the Sturm sequence.
int sturm_count(const std::vector<double>& d, const std::vector<double>& e, double x) {
    const size_t n = d.size();
    const double tiny = std::numeric_limits<double>::min() * 4.0;
    int count = 0;
    double q = d[0] - x;
    if (q < 0.0) ++count;
    for (size_t i = 1; i < n; ++i) {
        double denom = q;
        if (std::abs(denom) < tiny) denom = (denom < 0.0) ? -tiny : tiny;
        q = d[i] - x - e[i - 1] * e[i - 1] / denom;
        if (q < 0.0) ++count;
    }
    return count;
}

// Solve (T - shift) x = b in place by tridiagonal LU with partial pivoting.
// Near-singular pivots are nudged to keep inverse iteration well-posed.
void shifted_solve(const std::vector<double>& d, const std::vector<double>& e, double shift,
                   std::vector<double>& x) {
    const size_t n = d.size();
    std::vector<double> dl(n > 1 ? n - 1 : 0), dm(n), du(n > 1 ? n - 1 : 0), du2(n, 0.0);
    std::vector<char> swapped(n, 0);
    for (size_t i = 0; i < n; ++i) dm[i] = d[i] - shift;
    for (size_t i = 0; i + 1 < n; ++i) dl[i] = du[i] = e[i];

    const double tiny = 1e-300;
    for (size_t i = 0; i + 1 < n; ++i) {
        if (std::abs(dm[i]) >= std::abs(dl[i])) {
            if (std::abs(dm[i]) < tiny) dm[i] = (dm[i] < 0.0 ? -tiny : tiny);
            const double fact = dl[i] / dm[i];
            dl[i] = fact;
            dm[i + 1] -= fact * du[i];
        } else {
            const double fact = dm[i] / dl[i];
            dm[i] = dl[i];
            dl[i] = fact;
            const double temp = du[i];
            du[i] = dm[i + 1];
            dm[i + 1] = temp - fact * dm[i + 1];
            if (i + 2 < n) {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du[i + 1];
            }
            swapped[i] = 1;
        }
    }
    if (std::abs(dm[n - 1]) < tiny) dm[n - 1] = (dm[n - 1] < 0.0 ? -tiny : tiny);

    for (size_t i = 0; i + 1 < n; ++i) {
        if (!swapped[i]) {
            x[i + 1] -= dl[i] * x[i];
        } else {
            const double temp = x[i];
            x[i] = x[i + 1];
            x[i + 1] = temp - dl[i] * x[i];
        }
    }
    x[n - 1] /= dm[n - 1];
    if (n >= 2) x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / dm[n - 2];
    for (size_t ii = n; ii-- > 2;) {
        const size_t i = ii - 2;
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / dm[i];
    }
}

}  // namespace

TridiagEigen tridiag_lowest(const std::vector<double>& d, const std::vector<double>& e,
                            int k, double degeneracy_guard) {
    const size_t n = d.size();
    if (n == 0 || e.size() + 1 != n)
        throw numerical_error("tridiag_lowest: inconsistent matrix dimensions");
    if (k < 1 || static_cast<size_t>(k) > n)
        throw numerical_error("tridiag_lowest: eigenpair count out of range");

    double lo = d[0], hi = d[0], scale = std::abs(d[0]);
    for (size_t i = 0; i < n; ++i) {
        const double r = (i > 0 ? std::abs(e[i - 1]) : 0.0) + (i + 1 < n ? std::abs(e[i]) : 0.0);
        lo = std::min(lo, d[i] - r);
        hi = std::max(hi, d[i] + r);
        scale = std::max(scale, std::abs(d[i]) + r);
    }
    if (scale == 0.0) scale = 1.0;

    TridiagEigen out;
    out.values.resize(k);
    for (int j = 0; j < k; ++j) {
        double a = lo, b = hi;
        // Shrink [a, b] until it brackets exactly the (j+1)-th eigenvalue.
        for (int it = 0; it < 120 && b - a > 1e-15 * scale; ++it) {
            const double m = 0.5 * (a + b);
            if (sturm_count(d, e, m) >= j + 1)
                b = m;
            else
                a = m;
        }
        out.values[j] = 0.5 * (a + b);
    }

    for (int j = 0; j + 1 < k; ++j)
        if (out.values[j + 1] - out.values[j] < degeneracy_guard)
            throw numerical_error(
                "tridiag_lowest: eigenvalue spacing below degeneracy guard; the solver "
                "assumes a non-degenerate spectrum");

    // Inverse iteration. The shift is nudged off the eigenvalue so the solve
    // stays well-posed; the start vector is a fixed pseudo-random sequence so
    // results are reproducible run to run.
    out.vectors.assign(k, std::vector<double>(n, 0.0));
    out.residuals.assign(k, 0.0);
    for (int j = 0; j < k; ++j) {
        std::vector<double>& v = out.vectors[j];
        unsigned long long state = 0x9e3779b97f4a7c15ull + 0x1000ull * j;
        for (size_t i = 0; i < n; ++i) {
            state = state * 6364136223846793005ull + 1442695040888963407ull;
            v[i] = ((state >> 11) * 0x1.0p-53) - 0.5;
        }
        const double shift = out.values[j] + 1e-12 * scale;
        for (int it = 0; it < 4; ++it) {
            shifted_solve(d, e, shift, v);
            // Deflate against previously found vectors when the spectrum is
            // locally crowded, to keep the iterate from drifting.
            for (int p = 0; p < j; ++p) {
                if (out.values[j] - out.values[p] > 1e-3 * scale) continue;
                double dot = 0.0;
                for (size_t i = 0; i < n; ++i) dot += v[i] * out.vectors[p][i];
                for (size_t i = 0; i < n; ++i) v[i] -= dot * out.vectors[p][i];
            }
            double nrm = 0.0;
            for (double x : v) nrm += x * x;
            nrm = std::sqrt(nrm);
            if (!(nrm > 0.0) || !std::isfinite(nrm))
                throw numerical_error("tridiag_lowest: inverse iteration broke down");
            for (double& x : v) x /= nrm;
        }
        // Rayleigh quotient sharpens the bisection value to machine precision.
        double rq = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double tv = d[i] * v[i];
            if (i > 0) tv += e[i - 1] * v[i - 1];
            if (i + 1 < n) tv += e[i] * v[i + 1];
            rq += v[i] * tv;
        }
        out.values[j] = rq;
        double res = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double tv = d[i] * v[i];
            if (i > 0) tv += e[i - 1] * v[i - 1];
            if (i + 1 < n) tv += e[i] * v[i + 1];
            tv -= out.values[j] * v[i];
            res += tv * tv;
        }
        out.residuals[j] = std::sqrt(res) / scale;
        if (out.residuals[j] > 1e-10)
            throw numerical_error("tridiag_lowest: eigenpair residual above tolerance 1e-10");
    }
    return out;
}

std::vector<double> tridiag_all_values(std::vector<double> d, std::vector<double> e) {
    // Implicit QL with Wilkinson shifts, eigenvalues only.
    const size_t n = d.size();
    e.push_back(0.0);
    for (size_t l = 0; l < n; ++l) {
        int iter = 0;
        size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-16 * dd) break;
            }
            if (m != l) {
                if (iter++ == 60)
                    throw numerical_error("tridiag_all_values: QL iteration failed to converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                bool underflow = false;
                for (size_t i = m; i-- > l;) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    std::sort(d.begin(), d.end());
    return d;
}

std::vector<double> dense_symmetric_values(std::vector<double> m, int n) {
    // Cyclic Jacobi sweeps; adequate brute force for the modest n used in
    // oracle tests.
    auto at = [&](int i, int j) -> double& { return m[static_cast<size_t>(i) * n + j]; };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
        if (off < 1e-24) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t =
                    (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = at(i, p), aiq = at(i, q);
                    at(i, p) = c * aip - s * aiq;
                    at(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = at(p, i), aqi = at(q, i);
                    at(p, i) = c * api - s * aqi;
                    at(q, i) = s * api + c * aqi;
                }
            }
        }
    }
    std::vector<double> vals(n);
    for (int i = 0; i < n; ++i) vals[i] = at(i, i);
    std::sort(vals.begin(), vals.end());
    return vals;
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                   double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol) {
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace geophase
