#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "steinembed/matlite.hpp"
#include "steinembed/mc.hpp"
#include "steinembed/rng.hpp"

// Multilinear sums of graded order in d i.i.d. mean-zero coordinates:
// evaluate the order vector (J_1,...,J_d), run the replace-one-coordinate
// exchangeable pair, and verify the diagonal linearity identity
// E(J'_n - J_n | x) = -(n/d) J_n per sample.

namespace steinembed::chaos {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Sparse multilinear coefficients: for each order n, a list of strictly
// increasing index tuples (0-based internally) with their coefficients f_n.
// J_n(x) = sum over stored tuples of n! f_n(tuple) prod_{i in tuple} x_i.
class ChaosCoeffs {
public:
    explicit ChaosCoeffs(int dim);

    int dim() const { return dim_; }
    void add(std::span<const int> indices, double value);
    const std::vector<std::pair<std::vector<int>, double>>& order_terms(int n) const {
        return terms_[static_cast<std::size_t>(n - 1)];
    }

    // Text format, one term per line: "n i_1 ... i_n value" with 1-based
    // indices in {1..d}.
    static ChaosCoeffs load(const std::string& path, int dim);

private:
    int dim_;
    std::vector<std::vector<std::pair<std::vector<int>, double>>> terms_;
};

enum class BaseLawKind { rademacher, uniform, normal };

// i.i.d. mean-zero coordinate law. The uniform law lives on [-1, 1].
struct BaseLaw {
    BaseLawKind kind = BaseLawKind::rademacher;
    double sample(Rng& rng) const;
    double variance() const;
    const char* name() const;
    static BaseLaw by_name(const std::string& name);
};

// (J_1(f_1), ..., J_d(f_d)) at the point x.
std::vector<double> eval_j(std::span<const double> x, const ChaosCoeffs& c);

// Redraw one uniformly chosen coordinate; returns its index.
int pair_step(std::vector<double>& x, const BaseLaw& base, Rng& rng);

struct IdentityResidual {
    std::vector<double> residual;
    std::vector<double> scale;
};

// E(J'_n - J_n | x), computed literally as -(1/d) sum_i sum_{tuple containing i}
// n! f_n prod x (the redrawn coordinate contributes its analytic zero mean),
// minus the target -(n/d) J_n(x).
IdentityResidual cond_identity_residual(std::span<const double> x, const ChaosCoeffs& c);

// Diagonal Lambda with entries n/d, n = 1..d (unequal on purpose).
matlite::LowerMatrix lambda_chaos(int d);

// Exact per-sample conditional products: E[dJ_n dJ_m | x] =
// (1/d) sum_i (var + x_i^2) G_n(i,x) G_m(i,x) where G_n(i,x) is the
// derivative-like sum over tuples containing i with x_i struck out.
std::vector<double> cond_products(std::span<const double> x, const ChaosCoeffs& c,
                                  const BaseLaw& base);

mc::VectorSampler j_sampler(const ChaosCoeffs& c, const BaseLaw& base);
mc::PairCoupling pair_coupling(const ChaosCoeffs& c, const BaseLaw& base);

}  // namespace steinembed::chaos
