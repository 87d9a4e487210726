#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "steinembed/matlite.hpp"
#include "steinembed/rng.hpp"
#include "steinembed/stein.hpp"

// Seeded, reproducible Monte Carlo engine. Work is split into a fixed number
// of blocks that depends only on the sample count; every block owns an
// Rng stream derived from (seed, block index) and partial moments are merged
// in block order, so estimates are bit-identical for any worker count.

namespace steinembed::mc {

struct Estimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    long long count = 0;
    std::uint64_t seed = 0;
};

// Streaming mean / second central moment (Welford), mergeable.
class Welford {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    void merge(const Welford& o);
    long long count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double stderr_() const;

private:
    long long n_ = 0;
    double mean_ = 0.0, m2_ = 0.0;
};

// Streaming central moments up to order four; used where a standard error of
// a sample variance is needed.
class Welford4 {
public:
    void add(double x);
    void merge(const Welford4& o);
    long long count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double stderr_() const;
    // standard error of variance(): sqrt((m4 - (n-3)/(n-1) s^4) / n)
    double variance_stderr() const;

private:
    long long n_ = 0;
    double mean_ = 0.0, m2_ = 0.0, m3_ = 0.0, m4_ = 0.0;
};

class VecWelford {
public:
    VecWelford() = default;
    explicit VecWelford(int dim) : acc_(static_cast<std::size_t>(dim)) {}
    void add(std::span<const double> x);
    void merge(const VecWelford& o);
    int dim() const { return static_cast<int>(acc_.size()); }
    const Welford& operator[](int i) const { return acc_[i]; }

private:
    std::vector<Welford> acc_;
};

int hardware_threads();

// Fixed block partition: a pure function of nsamples (never of threads).
std::vector<std::pair<long long, long long>> block_partition(long long nsamples);

// Generic deterministic block-parallel reduction. `work` is copied once per
// block and must not share mutable state; partials are merged in block order.
template <typename Partial, typename Work, typename Merge>
Partial run_blocks(long long nsamples, std::uint64_t seed, int threads, Work work, Merge merge);

// Estimate E f(sample) where `draw` produces one iid scalar per call.
Estimate estimate(const std::function<double(Rng&)>& draw, long long nsamples, std::uint64_t seed,
                  int threads = 0);

// Componentwise estimates for a vector-valued draw.
std::vector<Estimate> estimate_vec(const std::function<void(Rng&, std::span<double>)>& draw,
                                   int dim, long long nsamples, std::uint64_t seed,
                                   int threads = 0);

// A smooth test function together with certified (analytic, not numeric)
// suprema of its first three partial derivatives.
struct TestFunction {
    std::string name;
    int dim = 0;
    std::function<double(std::span<const double>)> h;
    stein::DerivBounds bounds;
};

TestFunction make_linear(std::vector<double> coeffs);
TestFunction make_cos(std::vector<double> coeffs);
TestFunction make_sigmoid_product(int dim);
// Names: "cos111" (per-coordinate digit coefficients), "linear11", "sigmoid".
TestFunction test_function_by_name(const std::string& name, int dim);
std::vector<TestFunction> certified_test_functions(int dim);

struct VectorSampler {
    int dim = 0;
    std::function<void(Rng&, std::span<double>)> draw;
};

// Estimate E h(W) - E h(Sigma^{1/2} Z) with a fresh Z per sample; the
// standard error covers both arms.
Estimate discrepancy(const TestFunction& h, const VectorSampler& w, const matlite::SymMatrix& sigma_half,
                     long long nsamples, std::uint64_t seed, int threads = 0);

// One exchangeable-pair coupling, as much of it as the application can offer:
// dW draws for the third-moment statistics, exact per-sample conditional
// products when closed forms exist, and a state/resample split for nested
// estimation otherwise.
struct PairCoupling {
    int dim = 0;
    std::function<void(Rng&, std::span<double>)> draw_dw;
    // exact E[dW_i dW_j | state] for a fresh state, row-major dim x dim
    std::function<void(Rng&, std::span<double>)> draw_cond_products;
    // nested mode: sample a state, then resample pairs from it
    std::function<std::shared_ptr<const void>(Rng&)> draw_state;
    std::function<void(const void*, Rng&, std::span<double>)> dw_given_state;
    // residual R of the linearity condition; null when R == 0 is certified
    std::function<void(Rng&, std::span<double>)> draw_residual;
    bool r_zero = true;
};

struct AbcOptions {
    long long nsamples = 100000;
    long long inner_nsamples = 64;  // nested mode only
    std::uint64_t seed = 42;
    int threads = 0;
};

// A = sum_ij lambda_i sqrt(Var E^W dW_i dW_j), B = sum_ijk lambda_i E|dW_i dW_j dW_k|,
// C = sum_i lambda_i sqrt(E R_i^2) (zero when r_zero). Uses the exact
// conditional-product route when available; otherwise nested two-level
// estimation with the inner sampling variance subtracted out.
stein::AbcStats abc_from_pairs(const PairCoupling& coupling, std::span<const double> lambda_cols,
                               const AbcOptions& opt);

}  // namespace steinembed::mc

// --- template implementation -------------------------------------------

#include <atomic>
#include <thread>

namespace steinembed::mc {

template <typename Partial, typename Work, typename Merge>
Partial run_blocks(long long nsamples, std::uint64_t seed, int threads, Work work, Merge merge) {
    const auto blocks = block_partition(nsamples);
    const int nblocks = static_cast<int>(blocks.size());
    std::vector<Partial> partials(nblocks);

    int nthreads = threads > 0 ? threads : hardware_threads();
    nthreads = std::min<int>(nthreads, nblocks);

    if (nthreads <= 1) {
        for (int b = 0; b < nblocks; ++b) {
            Work w = work;
            Rng rng(seed, static_cast<std::uint64_t>(b));
            partials[b] = w(rng, blocks[b].first, blocks[b].second);
        }
    } else {
        std::atomic<int> next{0};
        auto body = [&]() {
            for (;;) {
                const int b = next.fetch_add(1);
                if (b >= nblocks) break;
                Work w = work;
                Rng rng(seed, static_cast<std::uint64_t>(b));
                partials[b] = w(rng, blocks[b].first, blocks[b].second);
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }

    Partial total = partials[0];
    for (int b = 1; b < nblocks; ++b) merge(total, partials[b]);
    return total;
}

}  // namespace steinembed::mc
