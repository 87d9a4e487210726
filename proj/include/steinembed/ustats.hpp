#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "steinembed/matlite.hpp"
#include "steinembed/mc.hpp"
#include "steinembed/rng.hpp"
#include "steinembed/stein.hpp"

// Complete U-statistics embedded through their conditional kernels: the
// U_k / W_k vector over all subset sizes, the replace-one-coordinate
// exchangeable pair with its exact bidiagonal Lambda, the per-sample
// linearity identity, and the closed-form approximation bound.

namespace steinembed::ustats {

struct BudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingConditionalKernel : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SupportTable {
    std::vector<double> values;
    std::vector<double> probs;
};

using KernelFn = std::function<double(std::span<const double>)>;

// A symmetric kernel of a fixed order together with its conditional kernels
// psi_k(x_1..x_k) = E[psi | first k arguments] (psi_d = psi), the base
// distribution of the sample points, and optionally a finite support table
// that makes everything exactly enumerable.
struct KernelModel {
    std::string name;
    int order = 0;  // d
    KernelFn psi;
    // cond[k-1] = psi_k for k = 1..order; empty when unavailable
    std::vector<KernelFn> cond;
    std::function<double(Rng&)> sample_base;
    std::optional<SupportTable> support;
    // closed-form U vector from the raw sample, when the kernel admits one
    std::function<void(std::span<const double>, std::span<double>)> fast_u;

    bool has_conditionals() const { return static_cast<int>(cond.size()) == order; }
    const KernelFn& kernel_level(int k) const;  // psi_k, 1 <= k <= order
};

// psi(x,y) = (x+y)/2 on symmetric +-1 points; psi_1(x) = x/2.
KernelModel make_pm1_kernel();
// psi(x,y) = (x-y)^2/2 - 1 on standard normal points; psi_1(x) = (x^2-1)/2.
KernelModel make_samplevar_kernel();
// Text table: "d m", m lines "value probability", m^d kernel values in
// row-major order. Probabilities must sum to 1 within 1e-12, the table must
// be symmetric and centered.
KernelModel load_kernel_table(const std::string& path);
KernelModel kernel_by_name(const std::string& name_or_path);

struct UVector {
    int n = 0;
    std::vector<double> u;  // U_1..U_d
    std::vector<double> w;  // W_k = sqrt(n) U_k / C(n,k)
};

// Exact sums over all k-subsets for each k = 1..d. Throws BudgetExceeded when
// C(n,d) passes 1e8 and MissingConditionalKernel when lower-order kernels are
// needed but absent. `force_generic` bypasses any fast_u closed form.
UVector compute_u(std::span<const double> sample, const KernelModel& km, bool force_generic = false);

// Lambda = (1/n) bidiag(k ; -k) and friends.
matlite::LowerMatrix lambda_ustat(int n, int d);
// (Lambda^{-1})_{k,l} = n/l for l <= k, zero otherwise.
matlite::LowerMatrix lambda_ustat_inverse(int n, int d);
// column sums of |Lambda^{-1}|: (d-l+1) n / l
std::vector<double> lambda_ustat_colsums(int n, int d);

// Redraw one uniformly chosen coordinate; U and W updated incrementally over
// the subsets containing it. Returns the replaced index.
int pair_step(std::vector<double>& sample, UVector& uv, const KernelModel& km, Rng& rng);

struct IdentityResidual {
    std::vector<double> residual;  // per k = 1..d
    std::vector<double> scale;     // magnitude the roundoff is measured against
};

// Residual of E[U'_k - U_k | X] (computed literally as the double sum over
// indices and subsets) against -(k/n) U_k + ((n-k+1)/n) U_{k-1}, with U_0 = 0.
IdentityResidual cond_identity_residual(std::span<const double> sample, const KernelModel& km);

// n^{-1/2} (4 rho^{1/2} d^6 |h|_2 + rho^{3/4} d^7 |h|_3)
double thm_bound(int n, int d, double rho, const stein::DerivBounds& db);

struct SigmaEstimate {
    matlite::SymMatrix sigma;
    matlite::Mat stderr_;  // zero when exact
    bool exact = false;
    long long count = 0;
    SigmaEstimate(int d) : sigma(d), stderr_(d) {}
};

SigmaEstimate estimate_sigma(const KernelModel& km, int n, long long nsamples, std::uint64_t seed,
                             int threads = 0);
// Exact Sigma by enumerating support^n (finite-support kernels, small n).
SigmaEstimate exact_sigma_enumerated(const KernelModel& km, int n, long long budget = 1 << 21);

mc::Estimate estimate_rho(const KernelModel& km, long long nsamples, std::uint64_t seed,
                          int threads = 0);
// E psi^4 by enumerating support^d.
double exact_rho_enumerated(const KernelModel& km);
// E psi over support^d; used to validate centering.
double exact_mean_enumerated(const KernelModel& km);

mc::VectorSampler w_sampler(const KernelModel& km, int n);
mc::PairCoupling pair_coupling(const KernelModel& km, int n);

// binomial coefficient with the compute_u budget guard
long long subset_count(int n, int k, long long budget = 100000000);

// All k-subsets of {0..n-1} in colexicographic order.
void for_each_subset(int n, int k, const std::function<void(std::span<const int>)>& fn);

}  // namespace steinembed::ustats
