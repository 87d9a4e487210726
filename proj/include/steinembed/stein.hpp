#pragma once

#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "steinembed/matlite.hpp"
#include "steinembed/rng.hpp"

// Evaluators for the abstract exchangeable-pair bounds: the smooth
// test-function bound, its non-smooth counterpart, the covariance
// perturbation bound, and the structural consistency identities used to
// validate (Lambda, Sigma) pairs coming out of the application modules.

namespace steinembed::stein {

struct DegenerateInputs : std::domain_error {
    using std::domain_error::domain_error;
};

// Suprema of the first three partial derivatives of a test function. h1 may
// be left at the +infinity sentinel when only the second/third-order terms
// are needed (it enters the smooth bound only through the remainder term).
struct DerivBounds {
    double h1 = std::numeric_limits<double>::infinity();
    double h2 = 0.0;
    double h3 = 0.0;
};

enum class Provenance { exact, mc, formula };

const char* provenance_name(Provenance p);

// The three aggregate coupling statistics of the smooth bound. stderr fields
// are zero for exact values and carry the Monte Carlo error otherwise.
struct AbcStats {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    Provenance provenance = Provenance::exact;
    double a_stderr = 0.0;
    double b_stderr = 0.0;
    double c_stderr = 0.0;
};

// bound = (|h|2/4) A + (|h|3/12) B + (|h|1 + d ||Sigma||^(1/2) |h|2 / 2) C.
// When C == 0 the remainder term is dropped before touching h1, so the
// infinity sentinel stays harmless.
double smooth_bound(const AbcStats& stats, const DerivBounds& db, int d, double sigma_supnorm);

// [bound at point -4*stderr, point, bound at point +4*stderr], clipped at 0.
struct BoundInterval {
    double lo = 0.0;
    double point = 0.0;
    double hi = 0.0;
};
BoundInterval smooth_bound_interval(const AbcStats& stats, const DerivBounds& db, int d,
                                    double sigma_supnorm);

// Inputs of the non-smooth bound. `class_a` is the constant a(H, delta) of
// the test-function class (2*sqrt(d) for indicators of convex sets); `gamma`
// is the dimension constant left unspecified by the theory, so every report
// quotes the result "up to gamma(d)^2".
struct NonSmoothInputs {
    double a_prime = 0.0;
    double b_prime = 0.0;
    double c_prime = 0.0;
    int d = 1;
    double class_a = 1.0;
    double gamma = 1.0;
};

// gamma^2 * ( -D' log T' + B'/(2 sqrt(T')) + C' + a sqrt(T') ) with
// D' = A'/2 + C' d and T' = (D' + sqrt(a B'/2 + D'^2))^2 / a^2.
// Throws DegenerateInputs when A' = B' = C' = 0 (T' = 0, log diverges).
double nonsmooth_bound(const NonSmoothInputs& in);

// (|h|2 / 2) * sum_ij |sigma_ij - sigma0_ij|
double cov_perturbation_bound(const matlite::SymMatrix& sigma, const matlite::SymMatrix& sigma0,
                              double h2);

// supnorm(Lambda Sigma - Sigma Lambda^t); zero (to roundoff) whenever the
// pair was computed correctly.
double consistency_check(const matlite::LowerMatrix& lambda, const matlite::SymMatrix& sigma);

// Column sums of |Sigma^(-1/2) Lambda^(-1) Sigma^(1/2)|, the weights of the
// non-smooth bound. Sigma must have full rank.
std::vector<double> lambda_hat(const matlite::SymMatrix& sigma, const matlite::LowerMatrix& lambda);

// d^3 ||Sigma^(-1/2)||^2 (sum_i lambdahat_i) sup_{k,l} sqrt(Var E^W dW_k dW_l)
double aprime_simplified(int d, double signorm_invhalf, std::span<const double> lambdahat,
                         double sup_condvar_sqrt);

// Monte Carlo check of E (W'-W)(W'-W)^t == 2 Sigma Lambda^t. Entries of the
// returned matrix are z-scores (estimate minus target over combined standard
// error). `sigma_stderr` may be null when Sigma is exact.
matlite::Mat pair_second_moment_z(const std::function<void(Rng&, std::span<double>)>& draw_dw,
                                  const matlite::LowerMatrix& lambda,
                                  const matlite::SymMatrix& sigma, long long nsamples,
                                  std::uint64_t seed, const matlite::Mat* sigma_stderr = nullptr,
                                  int threads = 0);

}  // namespace steinembed::stein
