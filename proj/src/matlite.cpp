#include "steinembed/matlite.hpp"

#include <algorithm>
#include <cmath>

namespace steinembed::matlite {

Mat Mat::operator*(const Mat& rhs) const {
    if (d_ != rhs.d_) throw DimensionMismatch("Mat::operator*: dimension mismatch");
    Mat out(d_);
    for (int i = 0; i < d_; ++i)
        for (int k = 0; k < d_; ++k) {
            const double v = (*this)(i, k);
            if (v == 0.0) continue;
            for (int j = 0; j < d_; ++j) out(i, j) += v * rhs(k, j);
        }
    return out;
}

Mat Mat::operator-(const Mat& rhs) const {
    if (d_ != rhs.d_) throw DimensionMismatch("Mat::operator-: dimension mismatch");
    Mat out(d_);
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) out(i, j) = (*this)(i, j) - rhs(i, j);
    return out;
}

Mat Mat::operator+(const Mat& rhs) const {
    if (d_ != rhs.d_) throw DimensionMismatch("Mat::operator+: dimension mismatch");
    Mat out(d_);
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) out(i, j) = (*this)(i, j) + rhs(i, j);
    return out;
}

Mat Mat::transposed() const {
    Mat out(d_);
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) out(j, i) = (*this)(i, j);
    return out;
}

Mat Mat::scaled(double s) const {
    Mat out(d_);
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) out(i, j) = (*this)(i, j) * s;
    return out;
}

double supnorm(const Mat& m) {
    double v = 0.0;
    for (double x : m.data()) v = std::max(v, std::abs(x));
    return v;
}

SymMatrix SymMatrix::from_full(const Mat& a, double asym_tol) {
    const int d = a.dim();
    const double scale = supnorm(a);
    SymMatrix s(d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            if (std::abs(a(i, j) - a(j, i)) > asym_tol * std::max(1.0, scale))
                throw DimensionMismatch("SymMatrix::from_full: input is not symmetric");
            s.set(i, j, 0.5 * (a(i, j) + a(j, i)));
        }
    return s;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
    SymMatrix s(static_cast<int>(diag.size()));
    for (int i = 0; i < s.dim(); ++i) s.set(i, i, diag[i]);
    return s;
}

LowerMatrix LowerMatrix::from_full(const Mat& a) {
    const int d = a.dim();
    LowerMatrix l(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (j > i) {
                if (a(i, j) != 0.0)
                    throw DimensionMismatch("LowerMatrix::from_full: nonzero above the diagonal");
            } else {
                l.set(i, j, a(i, j));
            }
        }
    return l;
}

bool LowerMatrix::invertible() const {
    for (int i = 0; i < dim(); ++i)
        if ((*this)(i, i) == 0.0) return false;
    return true;
}

EigenDecomposition jacobi_eigen(const SymMatrix& s, int max_sweeps) {
    const int d = s.dim();
    Mat a = s.mat();
    Mat q = Mat::identity(d);

    auto offnorm = [&]() {
        double v = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) v = std::max(v, std::abs(a(i, j)));
        return v;
    };

    const double target = 1e-13 * supnorm(a);
    int sweep = 0;
    while (offnorm() > target) {
        if (++sweep > max_sweeps)
            throw NoConvergence("jacobi_eigen: sweep budget exhausted");
        for (int p = 0; p < d - 1; ++p) {
            for (int r = p + 1; r < d; ++r) {
                const double apr = a(p, r);
                if (apr == 0.0) continue;
                const double theta = (a(r, r) - a(p, p)) / (2.0 * apr);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (int k = 0; k < d; ++k) {
                    const double akp = a(k, p), akr = a(k, r);
                    a(k, p) = c * akp - sn * akr;
                    a(k, r) = sn * akp + c * akr;
                }
                for (int k = 0; k < d; ++k) {
                    const double apk = a(p, k), ark = a(r, k);
                    a(p, k) = c * apk - sn * ark;
                    a(r, k) = sn * apk + c * ark;
                }
                for (int k = 0; k < d; ++k) {
                    const double qkp = q(k, p), qkr = q(k, r);
                    q(k, p) = c * qkp - sn * qkr;
                    q(k, r) = sn * qkp + c * qkr;
                }
            }
        }
    }

    EigenDecomposition out;
    out.values.resize(d);
    std::vector<int> order(d);
    for (int i = 0; i < d; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) < a(y, y); });
    out.vectors = Mat(d);
    for (int k = 0; k < d; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (int i = 0; i < d; ++i) out.vectors(i, k) = q(i, order[k]);
    }
    return out;
}

std::vector<double> psd_eigencheck(const SymMatrix& s, int max_sweeps) {
    return jacobi_eigen(s, max_sweeps).values;
}

namespace {

SymMatrix from_eigen(const EigenDecomposition& e, const std::vector<double>& diag) {
    const int d = e.vectors.dim();
    Mat out(d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            double v = 0.0;
            for (int k = 0; k < d; ++k) v += e.vectors(i, k) * diag[k] * e.vectors(j, k);
            out(i, j) = v;
            out(j, i) = v;
        }
    return SymMatrix::from_full(out, 0.0);
}

}  // namespace

SymMatrix sym_sqrt(const SymMatrix& s) {
    auto e = jacobi_eigen(s);
    const double tol = 1e-10 * supnorm(s);
    std::vector<double> roots(e.values.size());
    for (std::size_t k = 0; k < e.values.size(); ++k) {
        double v = e.values[k];
        if (v < -tol)
            throw NotPsd("sym_sqrt: eigenvalue " + std::to_string(v) + " below -1e-10*supnorm");
        roots[k] = v > 0.0 ? std::sqrt(v) : 0.0;
    }
    return from_eigen(e, roots);
}

SymMatrix sym_invsqrt(const SymMatrix& s) {
    auto e = jacobi_eigen(s);
    const double tol = 1e-10 * supnorm(s);
    std::vector<double> roots(e.values.size());
    for (std::size_t k = 0; k < e.values.size(); ++k) {
        if (e.values[k] <= tol)
            throw Singular("sym_invsqrt: matrix is not positive definite");
        roots[k] = 1.0 / std::sqrt(e.values[k]);
    }
    return from_eigen(e, roots);
}

LowerMatrix lower_inverse(const LowerMatrix& l) {
    const int d = l.dim();
    for (int i = 0; i < d; ++i)
        if (l(i, i) == 0.0) throw Singular("lower_inverse: zero diagonal entry");

    LowerMatrix inv(d);
    for (int col = 0; col < d; ++col) {
        // solve L x = e_col by forward substitution
        for (int i = col; i < d; ++i) {
            double rhs = (i == col) ? 1.0 : 0.0;
            for (int j = col; j < i; ++j) rhs -= l(i, j) * inv(j, col);
            inv.set(i, col, rhs / l(i, i));
        }
    }
    return inv;
}

std::vector<double> lambda_colsums(const Mat& m) {
    const int d = m.dim();
    std::vector<double> out(d, 0.0);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out[j] += std::abs(m(i, j));
    return out;
}

}  // namespace steinembed::matlite
