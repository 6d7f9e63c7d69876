#pragma once

#include <complex>
#include <functional>
#include <vector>

namespace geophase {

using cplx = std::complex<double>;

// Small dense row-major matrices used for connection generators, holonomies,
// and mode-space operators. Dimensions stay in the single digits, so no
// external linear-algebra dependency is needed.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    static Mat identity(int n);

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
};

Mat operator+(const Mat& x, const Mat& y);
Mat operator-(const Mat& x, const Mat& y);
Mat operator*(const Mat& x, const Mat& y);
Mat operator*(double s, const Mat& x);
Mat transpose(const Mat& x);
double frobenius_norm(const Mat& x);
double max_abs(const Mat& x);
// Matrix exponential by scaling and squaring with a Taylor series.
Mat expm(const Mat& x);

struct CMat {
    int rows = 0, cols = 0;
    std::vector<cplx> a;

    CMat() = default;
    CMat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, cplx(0.0, 0.0)) {}
    static CMat identity(int n);
    static CMat from_real(const Mat& x);

    cplx& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    cplx operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
};

CMat operator+(const CMat& x, const CMat& y);
CMat operator-(const CMat& x, const CMat& y);
CMat operator*(const CMat& x, const CMat& y);
CMat operator*(cplx s, const CMat& x);
CMat adjoint(const CMat& x);
double frobenius_norm(const CMat& x);
double max_abs(const CMat& x);
CMat expm(const CMat& x);
// Frobenius deviation of x from unitarity, |x^dag x - 1|_F.
double unitarity_defect(const CMat& x);

// Lowest eigenpairs of a symmetric tridiagonal matrix (diagonal d, first
// off-diagonal e with e[i] coupling rows i and i+1), found by Sturm-sequence
// bisection plus inverse iteration. Vectors have unit Euclidean norm;
// residuals are |T v - lambda v|_2 relative to the matrix scale.
struct TridiagEigen {
    std::vector<double> values;
    std::vector<std::vector<double>> vectors;
    std::vector<double> residuals;
};
TridiagEigen tridiag_lowest(const std::vector<double>& d, const std::vector<double>& e,
                            int k, double degeneracy_guard);

// Full eigenvalue set of the same tridiagonal matrix by the implicit QL
// method, ascending. Used as an independent cross-check of the bisection
// solver; no eigenvectors.
std::vector<double> tridiag_all_values(std::vector<double> d, std::vector<double> e);

// Eigenvalues of a dense symmetric matrix (row-major, n x n) by cyclic
// Jacobi rotations, ascending. Brute-force oracle for small n.
std::vector<double> dense_symmetric_values(std::vector<double> m, int n);

// Adaptive Simpson quadrature with absolute tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol);

// One classical Runge-Kutta step for y' = f(t, y) on a complex state vector.
template <class F>
std::vector<cplx> rk4_step(F&& f, double t, const std::vector<cplx>& y, double h) {
    const size_t n = y.size();
    std::vector<cplx> k1 = f(t, y);
    std::vector<cplx> tmp(n);
    for (size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    std::vector<cplx> k2 = f(t + 0.5 * h, tmp);
    for (size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    std::vector<cplx> k3 = f(t + 0.5 * h, tmp);
    for (size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    std::vector<cplx> k4 = f(t + h, tmp);
    std::vector<cplx> out(n);
    for (size_t i = 0; i < n; ++i)
        out[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

}  // namespace geophase
