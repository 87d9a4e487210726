#include "steinembed/stein.hpp"

#include <cmath>

#include "steinembed/mc.hpp"

namespace steinembed::stein {

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::exact: return "exact";
        case Provenance::mc: return "mc";
        case Provenance::formula: return "paper-formula";
    }
    return "?";
}

namespace {

double smooth_bound_at(double a, double b, double c, const DerivBounds& db, int d,
                       double sigma_supnorm) {
    double bound = db.h2 / 4.0 * a + db.h3 / 12.0 * b;
    if (c != 0.0)
        bound += (db.h1 + 0.5 * static_cast<double>(d) * std::sqrt(sigma_supnorm) * db.h2) * c;
    return bound;
}

}  // namespace

double smooth_bound(const AbcStats& stats, const DerivBounds& db, int d, double sigma_supnorm) {
    if (stats.a < 0.0 || stats.b < 0.0 || stats.c < 0.0 || db.h2 < 0.0 || db.h3 < 0.0)
        throw std::invalid_argument("smooth_bound: inputs must be nonnegative");
    return smooth_bound_at(stats.a, stats.b, stats.c, db, d, sigma_supnorm);
}

BoundInterval smooth_bound_interval(const AbcStats& stats, const DerivBounds& db, int d,
                                    double sigma_supnorm) {
    BoundInterval out;
    out.point = smooth_bound(stats, db, d, sigma_supnorm);
    const double alo = std::max(0.0, stats.a - 4.0 * stats.a_stderr);
    const double blo = std::max(0.0, stats.b - 4.0 * stats.b_stderr);
    const double clo = std::max(0.0, stats.c - 4.0 * stats.c_stderr);
    out.lo = smooth_bound_at(alo, blo, clo, db, d, sigma_supnorm);
    out.hi = smooth_bound_at(stats.a + 4.0 * stats.a_stderr, stats.b + 4.0 * stats.b_stderr,
                             stats.c + 4.0 * stats.c_stderr, db, d, sigma_supnorm);
    return out;
}

double nonsmooth_bound(const NonSmoothInputs& in) {
    if (in.a_prime < 0.0 || in.b_prime < 0.0 || in.c_prime < 0.0)
        throw std::invalid_argument("nonsmooth_bound: A', B', C' must be nonnegative");
    if (in.class_a < 1.0) throw std::invalid_argument("nonsmooth_bound: class constant a must be >= 1");
    if (in.gamma <= 0.0) throw std::invalid_argument("nonsmooth_bound: gamma must be positive");
    if (in.a_prime == 0.0 && in.b_prime == 0.0 && in.c_prime == 0.0)
        throw DegenerateInputs("nonsmooth_bound: A' = B' = C' = 0 gives T' = 0");

    const double dprime = in.a_prime / 2.0 + in.c_prime * static_cast<double>(in.d);
    const double root = std::sqrt(in.class_a * in.b_prime / 2.0 + dprime * dprime);
    const double tprime = (dprime + root) * (dprime + root) / (in.class_a * in.class_a);
    const double sq = std::sqrt(tprime);
    double val = -dprime * std::log(tprime) + in.c_prime + in.class_a * sq;
    if (in.b_prime != 0.0) val += in.b_prime / (2.0 * sq);
    return in.gamma * in.gamma * val;
}

double cov_perturbation_bound(const matlite::SymMatrix& sigma, const matlite::SymMatrix& sigma0,
                              double h2) {
    if (sigma.dim() != sigma0.dim())
        throw matlite::DimensionMismatch("cov_perturbation_bound: dimension mismatch");
    double s = 0.0;
    for (int i = 0; i < sigma.dim(); ++i)
        for (int j = 0; j < sigma.dim(); ++j) s += std::abs(sigma(i, j) - sigma0(i, j));
    return 0.5 * h2 * s;
}

double consistency_check(const matlite::LowerMatrix& lambda, const matlite::SymMatrix& sigma) {
    if (lambda.dim() != sigma.dim())
        throw matlite::DimensionMismatch("consistency_check: dimension mismatch");
    const matlite::Mat ls = lambda.mat() * sigma.mat();
    return matlite::supnorm(ls - ls.transposed());
}

std::vector<double> lambda_hat(const matlite::SymMatrix& sigma, const matlite::LowerMatrix& lambda) {
    if (lambda.dim() != sigma.dim())
        throw matlite::DimensionMismatch("lambda_hat: dimension mismatch");
    const matlite::SymMatrix inv_half = matlite::sym_invsqrt(sigma);
    const matlite::SymMatrix half = matlite::sym_sqrt(sigma);
    const matlite::LowerMatrix lam_inv = matlite::lower_inverse(lambda);
    return matlite::lambda_colsums(inv_half.mat() * lam_inv.mat() * half.mat());
}

double aprime_simplified(int d, double signorm_invhalf, std::span<const double> lambdahat,
                         double sup_condvar_sqrt) {
    if (signorm_invhalf < 0.0 || sup_condvar_sqrt < 0.0)
        throw std::invalid_argument("aprime_simplified: inputs must be nonnegative");
    double s = 0.0;
    for (double v : lambdahat) s += v;
    const double dd = static_cast<double>(d);
    return dd * dd * dd * signorm_invhalf * signorm_invhalf * s * sup_condvar_sqrt;
}

matlite::Mat pair_second_moment_z(const std::function<void(Rng&, std::span<double>)>& draw_dw,
                                  const matlite::LowerMatrix& lambda,
                                  const matlite::SymMatrix& sigma, long long nsamples,
                                  std::uint64_t seed, const matlite::Mat* sigma_stderr,
                                  int threads) {
    const int d = sigma.dim();
    if (lambda.dim() != d) throw matlite::DimensionMismatch("pair_second_moment_z: dimension mismatch");

    const std::size_t dd = static_cast<std::size_t>(d) * d;
    auto work = [&](Rng& rng, long long lo, long long hi) {
        mc::VecWelford acc(static_cast<int>(dd));
        auto draw = draw_dw;
        std::vector<double> dw(static_cast<std::size_t>(d)), prods(dd);
        for (long long s = lo; s < hi; ++s) {
            draw(rng, dw);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    prods[static_cast<std::size_t>(i) * d + j] =
                        dw[static_cast<std::size_t>(i)] * dw[static_cast<std::size_t>(j)];
            acc.add(prods);
        }
        return acc;
    };
    mc::VecWelford acc = mc::run_blocks<mc::VecWelford>(
        nsamples, seed, threads, work, [](mc::VecWelford& a, const mc::VecWelford& b) { a.merge(b); });

    // target 2 Sigma Lambda^t, with Sigma uncertainty propagated linearly
    const matlite::Mat target = (sigma.mat() * lambda.mat().transposed()).scaled(2.0);
    matlite::Mat z(d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const auto& w = acc[i * d + j];
            double var = w.stderr_() * w.stderr_();
            if (sigma_stderr != nullptr) {
                for (int k = 0; k < d; ++k) {
                    const double c = 2.0 * lambda(j, k) * (*sigma_stderr)(i, k);
                    var += c * c;
                }
            }
            const double se = std::sqrt(var);
            const double diff = w.mean() - target(i, j);
            z(i, j) = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        }
    }
    return z;
}

}  // namespace steinembed::stein
