#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "steinembed/graphs.hpp"
#include "steinembed/matlite.hpp"
#include "steinembed/mc.hpp"

using namespace steinembed;

TEST_CASE("estimate of a constant has zero error") {
    const auto est = mc::estimate([](Rng&) { return 3.25; }, 1000, 1);
    CHECK(est.mean == 3.25);
    CHECK(est.stderr_ == 0.0);
    CHECK(est.count == 1000);
}

TEST_CASE("estimate of a standard normal mean") {
    const auto est = mc::estimate([](Rng& rng) { return rng.normal(); }, 1000000, 42);
    CHECK(std::abs(est.mean) <= 4.0 / std::sqrt(1e6));
    CHECK(est.stderr_ == doctest::Approx(1e-3).epsilon(0.02));
}

TEST_CASE("estimate of E T for G(10, 1/2) hits C(10,2)/2") {
    const graphs::GraphModel model(10, 0.5);
    const auto est = mc::estimate(
        [model](Rng& rng) { return static_cast<double>(graphs::count(graphs::sample(model, rng)).t); },
        100000, 7);
    CHECK(std::abs(est.mean - 22.5) <= 4.0 * est.stderr_);
}

TEST_CASE("block partition covers the sample range") {
    for (long long n : {1LL, 5LL, 1023LL, 1024LL, 100000LL, 1048576LL}) {
        const auto blocks = mc::block_partition(n);
        long long covered = 0;
        long long prev_hi = 0;
        for (const auto& [lo, hi] : blocks) {
            CHECK(lo == prev_hi);
            CHECK(hi > lo);
            covered += hi - lo;
            prev_hi = hi;
        }
        CHECK(covered == n);
    }
}

TEST_CASE("estimates are bit-identical across worker counts") {
    auto draw = [](Rng& rng) { return rng.normal() + rng.uniform(); };
    const auto a = mc::estimate(draw, 200000, 12345, 1);
    const auto b = mc::estimate(draw, 200000, 12345, 2);
    const auto c = mc::estimate(draw, 200000, 12345, 7);
    CHECK(std::memcmp(&a.mean, &b.mean, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.mean, &c.mean, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.stderr_, &b.stderr_, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.stderr_, &c.stderr_, sizeof(double)) == 0);

    auto vdraw = [](Rng& rng, std::span<double> out) {
        out[0] = rng.normal();
        out[1] = rng.uniform();
    };
    const auto va = mc::estimate_vec(vdraw, 2, 100000, 99, 1);
    const auto vb = mc::estimate_vec(vdraw, 2, 100000, 99, 3);
    for (int i = 0; i < 2; ++i) {
        CHECK(va[static_cast<std::size_t>(i)].mean == vb[static_cast<std::size_t>(i)].mean);
        CHECK(va[static_cast<std::size_t>(i)].stderr_ == vb[static_cast<std::size_t>(i)].stderr_);
    }
}

TEST_CASE("different seeds decorrelate") {
    auto draw = [](Rng& rng) { return rng.normal(); };
    const auto a = mc::estimate(draw, 10000, 1);
    const auto b = mc::estimate(draw, 10000, 2);
    CHECK(a.mean != b.mean);
}

TEST_CASE("Welford4 matches two-pass moments") {
    Rng rng(8);
    std::vector<double> xs(5000);
    for (auto& x : xs) x = rng.normal() * 2.0 + 1.0;

    mc::Welford4 acc;
    for (double x : xs) acc.add(x);

    mc::Welford4 left, right;
    for (std::size_t i = 0; i < xs.size(); ++i) (i < 2500 ? left : right).add(xs[i]);
    left.merge(right);
    CHECK(left.count() == acc.count());
    CHECK(left.mean() == doctest::Approx(acc.mean()).epsilon(1e-12));
    CHECK(left.variance() == doctest::Approx(acc.variance()).epsilon(1e-10));
    CHECK(left.variance_stderr() == doctest::Approx(acc.variance_stderr()).epsilon(1e-8));

    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    CHECK(acc.mean() == doctest::Approx(mean).epsilon(1e-12));
    CHECK(acc.variance() == doctest::Approx(m2 / (xs.size() - 1)).epsilon(1e-10));
    const double n = static_cast<double>(xs.size());
    const double s2 = m2 / (n - 1.0);
    const double expected_se = std::sqrt((m4 / n - (n - 3.0) / (n - 1.0) * s2 * s2) / n);
    CHECK(acc.variance_stderr() == doctest::Approx(expected_se).epsilon(1e-8));
}

namespace {

// nested central differences, one operator per requested index
double finite_diff(const mc::TestFunction& tf, std::vector<double> x, std::span<const int> idx,
                   double h) {
    if (idx.empty()) return tf.h(x);
    const int i = idx[0];
    std::vector<double> xp = x, xm = x;
    xp[static_cast<std::size_t>(i)] += h;
    xm[static_cast<std::size_t>(i)] -= h;
    return (finite_diff(tf, xp, idx.subspan(1), h) - finite_diff(tf, xm, idx.subspan(1), h)) /
           (2.0 * h);
}

void check_certificates(const mc::TestFunction& tf, int npoints) {
    Rng rng(2718);
    const int d = tf.dim;
    const double h = 1e-3;
    for (int trial = 0; trial < npoints; ++trial) {
        std::vector<double> x(static_cast<std::size_t>(d));
        for (auto& v : x) v = 4.0 * rng.uniform() - 2.0;
        for (int i = 0; i < d; ++i) {
            const int idx1[] = {i};
            if (std::isfinite(tf.bounds.h1))
                CHECK(std::abs(finite_diff(tf, x, idx1, h)) <= tf.bounds.h1 + 1e-6);
            for (int j = 0; j < d; ++j) {
                const int idx2[] = {i, j};
                CHECK(std::abs(finite_diff(tf, x, idx2, h)) <= tf.bounds.h2 + 1e-6);
                for (int k = 0; k < d; ++k) {
                    const int idx3[] = {i, j, k};
                    CHECK(std::abs(finite_diff(tf, x, idx3, h)) <= tf.bounds.h3 + 1e-6);
                }
            }
        }
    }
}

}  // namespace

TEST_CASE("certified derivative bounds hold numerically") {
    for (const auto& tf : mc::certified_test_functions(3)) check_certificates(tf, 40);
    check_certificates(mc::test_function_by_name("cos12", 2), 40);
}

TEST_CASE("test function registry") {
    const auto c = mc::test_function_by_name("cos111", 3);
    CHECK(c.bounds.h1 == 1.0);
    CHECK(c.bounds.h2 == 1.0);
    CHECK(c.bounds.h3 == 1.0);
    const double x[] = {0.5, 0.25, 0.25};
    CHECK(c.h(x) == doctest::Approx(std::cos(1.0)));

    const auto lin = mc::test_function_by_name("linear", 2);
    CHECK(lin.bounds.h2 == 0.0);
    CHECK(lin.bounds.h3 == 0.0);

    CHECK_THROWS_AS(mc::test_function_by_name("cos11", 3), std::invalid_argument);
    CHECK_THROWS_AS(mc::test_function_by_name("nope", 3), std::invalid_argument);
}

TEST_CASE("discrepancy vanishes when both arms share the law") {
    matlite::SymMatrix sigma(2);
    sigma.set(0, 0, 2.0);
    sigma.set(0, 1, 0.5);
    sigma.set(1, 1, 1.0);
    const auto half = matlite::sym_sqrt(sigma);

    mc::VectorSampler w;
    w.dim = 2;
    w.draw = [half](Rng& rng, std::span<double> out) {
        const double z[2] = {rng.normal(), rng.normal()};
        for (int i = 0; i < 2; ++i)
            out[static_cast<std::size_t>(i)] = half(i, 0) * z[0] + half(i, 1) * z[1];
    };

    const auto cosf = mc::test_function_by_name("cos", 2);
    const auto est = mc::discrepancy(cosf, w, half, 200000, 11);
    CHECK(std::abs(est.mean) <= 4.0 * est.stderr_);

    const auto lin = mc::test_function_by_name("linear", 2);
    const auto est2 = mc::discrepancy(lin, w, half, 100000, 12);
    CHECK(std::abs(est2.mean) <= 4.0 * est2.stderr_);
}

TEST_CASE("abc_from_pairs on a deterministic pair is zero") {
    mc::PairCoupling pc;
    pc.dim = 2;
    pc.r_zero = true;
    pc.draw_dw = [](Rng&, std::span<double> dw) { dw[0] = dw[1] = 0.0; };
    pc.draw_cond_products = [](Rng&, std::span<double> p) {
        for (auto& v : p) v = 0.0;
    };
    const std::vector<double> lambda{1.0, 1.0};
    const auto abc = mc::abc_from_pairs(pc, lambda, {.nsamples = 5000, .seed = 3});
    CHECK(abc.a == 0.0);
    CHECK(abc.b == 0.0);
    CHECK(abc.c == 0.0);
    CHECK(abc.provenance == stein::Provenance::mc);
}

TEST_CASE("abc_from_pairs estimates the residual term when R != 0") {
    mc::PairCoupling pc;
    pc.dim = 2;
    pc.r_zero = false;
    pc.draw_dw = [](Rng&, std::span<double> dw) { dw[0] = dw[1] = 0.0; };
    pc.draw_cond_products = [](Rng&, std::span<double> p) {
        for (auto& v : p) v = 0.0;
    };
    pc.draw_residual = [](Rng& rng, std::span<double> r) {
        r[0] = 0.3 + 0.01 * rng.normal();
        r[1] = -0.4;
    };
    const std::vector<double> lambda{2.0, 1.0};
    const auto abc = mc::abc_from_pairs(pc, lambda, {.nsamples = 20000, .seed = 5});
    // C = 2 sqrt(E r1^2) + sqrt(E r2^2) with E r1^2 = 0.09 + 1e-4
    CHECK(abc.c == doctest::Approx(2.0 * std::sqrt(0.0901) + 0.4).epsilon(1e-3));
}

TEST_CASE("nested two-level estimation debiases toward the exact route") {
    const graphs::GraphModel model(5, 0.3);
    const auto coupling = graphs::pair_coupling(model);
    const auto lambda = matlite::lambda_colsums(matlite::lower_inverse(graphs::lambda_graph(model)));

    const auto exact = mc::abc_from_pairs(coupling, lambda, {.nsamples = 20000, .seed = 21});

    mc::PairCoupling nested = coupling;
    nested.draw_cond_products = nullptr;  // force the two-level path
    const auto est =
        mc::abc_from_pairs(nested, lambda, {.nsamples = 4000, .inner_nsamples = 256, .seed = 22});

    CHECK(est.a == doctest::Approx(exact.a).epsilon(0.25));
    CHECK(est.b == doctest::Approx(exact.b).epsilon(0.1));
    CHECK(est.c == 0.0);
}
