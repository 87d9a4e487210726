#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Minimal dense linear algebra for the small (d <= ~10) symmetric and
// triangular matrices this library works with. Everything is stored dense
// row-major; eigenvalues come from cyclic Jacobi sweeps.

namespace steinembed::matlite {

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NotPsd : std::domain_error {
    using std::domain_error::domain_error;
};
struct Singular : std::domain_error {
    using std::domain_error::domain_error;
};
struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Plain d x d matrix, row-major.
class Mat {
public:
    Mat() = default;
    explicit Mat(int d) : d_(d), a_(static_cast<std::size_t>(d) * d, 0.0) {
        if (d <= 0) throw DimensionMismatch("Mat: dimension must be positive");
    }
    static Mat identity(int d) {
        Mat m(d);
        for (int i = 0; i < d; ++i) m(i, i) = 1.0;
        return m;
    }

    int dim() const { return d_; }
    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * d_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * d_ + j]; }
    std::span<const double> data() const { return a_; }

    Mat operator*(const Mat& rhs) const;
    Mat operator-(const Mat& rhs) const;
    Mat operator+(const Mat& rhs) const;
    Mat transposed() const;
    Mat scaled(double s) const;

private:
    int d_ = 0;
    std::vector<double> a_;
};

double supnorm(const Mat& m);

// Symmetric matrix; (i,j) and (j,i) are the same stored double, so equality
// across the diagonal is exact by construction.
class SymMatrix {
public:
    explicit SymMatrix(int d) : m_(d) {}
    static SymMatrix from_full(const Mat& a, double asym_tol = 1e-9);
    static SymMatrix diagonal(std::span<const double> diag);
    static SymMatrix identity(int d) { return from_full(Mat::identity(d), 0.0); }

    int dim() const { return m_.dim(); }
    double operator()(int i, int j) const { return m_(i, j); }
    void set(int i, int j, double v) {
        m_(i, j) = v;
        m_(j, i) = v;
    }
    const Mat& mat() const { return m_; }

private:
    Mat m_;
};

// Lower-triangular matrix; writes above the diagonal are rejected.
class LowerMatrix {
public:
    explicit LowerMatrix(int d) : m_(d) {}
    static LowerMatrix from_full(const Mat& a);
    static LowerMatrix identity(int d) { return from_full(Mat::identity(d)); }

    int dim() const { return m_.dim(); }
    double operator()(int i, int j) const { return m_(i, j); }
    void set(int i, int j, double v) {
        if (j > i) throw DimensionMismatch("LowerMatrix: entry above the diagonal");
        m_(i, j) = v;
    }
    const Mat& mat() const { return m_; }
    bool invertible() const;

private:
    Mat m_;
};

inline double supnorm(const SymMatrix& m) { return supnorm(m.mat()); }
inline double supnorm(const LowerMatrix& m) { return supnorm(m.mat()); }

struct EigenDecomposition {
    std::vector<double> values;  // ascending
    Mat vectors;                 // column k pairs with values[k]
};

// Cyclic Jacobi sweeps; converged when the off-diagonal supnorm drops below
// 1e-13 times the initial supnorm. Throws NoConvergence after the sweep
// budget, which only happens on pathological input.
EigenDecomposition jacobi_eigen(const SymMatrix& s, int max_sweeps = 64);

// Sorted (ascending) eigenvalue list.
std::vector<double> psd_eigencheck(const SymMatrix& s, int max_sweeps = 64);

// Unique symmetric PSD square root. Eigenvalues in [-tol, 0) with
// tol = 1e-10 * supnorm are clamped to zero; anything lower throws NotPsd.
SymMatrix sym_sqrt(const SymMatrix& s);

// Inverse symmetric square root; requires strictly positive spectrum.
SymMatrix sym_invsqrt(const SymMatrix& s);

// Forward substitution, column by column. Throws Singular on a zero diagonal.
LowerMatrix lower_inverse(const LowerMatrix& l);

// Column sums of absolute values: component i is sum_m |entries[m][i]|.
std::vector<double> lambda_colsums(const Mat& m);
inline std::vector<double> lambda_colsums(const LowerMatrix& l) { return lambda_colsums(l.mat()); }

}  // namespace steinembed::matlite
