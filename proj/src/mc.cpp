#include "steinembed/mc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace steinembed::mc {

void Welford::merge(const Welford& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
    const double n = na + nb;
    const double delta = o.mean_ - mean_;
    mean_ += delta * nb / n;
    m2_ += o.m2_ + delta * delta * na * nb / n;
    n_ += o.n_;
}

double Welford::stderr_() const {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

void Welford4::add(double x) {
    const double n1 = static_cast<double>(n_);
    ++n_;
    const double n = static_cast<double>(n_);
    const double delta = x - mean_;
    const double dn = delta / n;
    const double dn2 = dn * dn;
    const double term1 = delta * dn * n1;
    mean_ += dn;
    m4_ += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * m2_ - 4.0 * dn * m3_;
    m3_ += term1 * dn * (n - 2.0) - 3.0 * dn * m2_;
    m2_ += term1;
}

void Welford4::merge(const Welford4& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
    const double n = na + nb;
    const double d = o.mean_ - mean_;
    const double d2 = d * d;
    const double m4 = m4_ + o.m4_ + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                      6.0 * d2 * (na * na * o.m2_ + nb * nb * m2_) / (n * n) +
                      4.0 * d * (na * o.m3_ - nb * m3_) / n;
    const double m3 = m3_ + o.m3_ + d * d2 * na * nb * (na - nb) / (n * n) +
                      3.0 * d * (na * o.m2_ - nb * m2_) / n;
    const double m2 = m2_ + o.m2_ + d2 * na * nb / n;
    mean_ += d * nb / n;
    m2_ = m2;
    m3_ = m3;
    m4_ = m4;
    n_ += o.n_;
}

double Welford4::stderr_() const {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

double Welford4::variance_stderr() const {
    if (n_ < 4) return 0.0;
    const double n = static_cast<double>(n_);
    const double mu4 = m4_ / n;
    const double s2 = variance();
    const double v = (mu4 - (n - 3.0) / (n - 1.0) * s2 * s2) / n;
    return v > 0.0 ? std::sqrt(v) : 0.0;
}

void VecWelford::add(std::span<const double> x) {
    for (std::size_t i = 0; i < acc_.size(); ++i) acc_[i].add(x[i]);
}

void VecWelford::merge(const VecWelford& o) {
    if (acc_.empty()) {
        acc_ = o.acc_;
        return;
    }
    for (std::size_t i = 0; i < acc_.size(); ++i) acc_[i].merge(o.acc_[i]);
}

int hardware_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

std::vector<std::pair<long long, long long>> block_partition(long long nsamples) {
    if (nsamples <= 0) throw std::invalid_argument("block_partition: nsamples must be positive");
    const long long nblocks = std::clamp<long long>(nsamples / 1024, 1, 256);
    std::vector<std::pair<long long, long long>> blocks;
    blocks.reserve(static_cast<std::size_t>(nblocks));
    for (long long b = 0; b < nblocks; ++b) {
        const long long lo = nsamples * b / nblocks;
        const long long hi = nsamples * (b + 1) / nblocks;
        blocks.emplace_back(lo, hi);
    }
    return blocks;
}

Estimate estimate(const std::function<double(Rng&)>& draw, long long nsamples, std::uint64_t seed,
                  int threads) {
    if (nsamples < 2) throw std::invalid_argument("estimate: need at least 2 samples");
    auto work = [&draw](Rng& rng, long long lo, long long hi) {
        Welford w;
        auto f = draw;
        for (long long i = lo; i < hi; ++i) w.add(f(rng));
        return w;
    };
    Welford total =
        run_blocks<Welford>(nsamples, seed, threads, work, [](Welford& a, const Welford& b) { a.merge(b); });
    return Estimate{total.mean(), total.stderr_(), total.count(), seed};
}

std::vector<Estimate> estimate_vec(const std::function<void(Rng&, std::span<double>)>& draw,
                                   int dim, long long nsamples, std::uint64_t seed, int threads) {
    if (nsamples < 2) throw std::invalid_argument("estimate_vec: need at least 2 samples");
    auto work = [&draw, dim](Rng& rng, long long lo, long long hi) {
        VecWelford w(dim);
        auto f = draw;
        std::vector<double> buf(static_cast<std::size_t>(dim));
        for (long long i = lo; i < hi; ++i) {
            f(rng, buf);
            w.add(buf);
        }
        return w;
    };
    VecWelford total = run_blocks<VecWelford>(nsamples, seed, threads, work,
                                              [](VecWelford& a, const VecWelford& b) { a.merge(b); });
    std::vector<Estimate> out(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i)
        out[static_cast<std::size_t>(i)] = Estimate{total[i].mean(), total[i].stderr_(), total[i].count(), seed};
    return out;
}

TestFunction make_linear(std::vector<double> coeffs) {
    double amax = 0.0;
    for (double a : coeffs) amax = std::max(amax, std::abs(a));
    TestFunction tf;
    tf.name = "linear";
    tf.dim = static_cast<int>(coeffs.size());
    tf.bounds = stein::DerivBounds{amax, 0.0, 0.0};
    tf.h = [c = std::move(coeffs)](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * x[i];
        return s;
    };
    return tf;
}

TestFunction make_cos(std::vector<double> coeffs) {
    double amax = 0.0;
    for (double a : coeffs) amax = std::max(amax, std::abs(a));
    TestFunction tf;
    tf.name = "cos";
    tf.dim = static_cast<int>(coeffs.size());
    tf.bounds = stein::DerivBounds{amax, amax * amax, amax * amax * amax};
    tf.h = [c = std::move(coeffs)](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * x[i];
        return std::cos(s);
    };
    return tf;
}

TestFunction make_sigmoid_product(int dim) {
    TestFunction tf;
    tf.name = "sigmoid";
    tf.dim = dim;
    // analytic suprema of the logistic derivatives: 1/4, 1/(6 sqrt 3), 1/8;
    // the remaining factors of the product lie in (0,1) and mixed partials
    // are dominated by these constants for every d.
    tf.bounds = stein::DerivBounds{0.25, 1.0 / (6.0 * std::sqrt(3.0)), 0.125};
    tf.h = [](std::span<const double> x) {
        double prod = 1.0;
        for (double v : x) prod *= 1.0 / (1.0 + std::exp(-v));
        return prod;
    };
    return tf;
}

TestFunction test_function_by_name(const std::string& name, int dim) {
    auto digits_or_ones = [dim](const std::string& s, std::size_t prefix) {
        std::vector<double> c;
        for (std::size_t i = prefix; i < s.size(); ++i) {
            if (s[i] < '0' || s[i] > '9')
                throw std::invalid_argument("test function name: expected digits, got '" + s + "'");
            c.push_back(static_cast<double>(s[i] - '0'));
        }
        if (c.empty()) c.assign(static_cast<std::size_t>(dim), 1.0);
        if (static_cast<int>(c.size()) != dim)
            throw std::invalid_argument("test function '" + s + "' has " +
                                        std::to_string(c.size()) + " coefficients, need " +
                                        std::to_string(dim));
        return c;
    };
    if (name.rfind("cos", 0) == 0) return make_cos(digits_or_ones(name, 3));
    if (name.rfind("linear", 0) == 0) return make_linear(digits_or_ones(name, 6));
    if (name == "sigmoid") return make_sigmoid_product(dim);
    throw std::invalid_argument("unknown test function '" + name + "'");
}

std::vector<TestFunction> certified_test_functions(int dim) {
    std::vector<TestFunction> out;
    out.push_back(make_linear(std::vector<double>(static_cast<std::size_t>(dim), 1.0)));
    out.push_back(make_cos(std::vector<double>(static_cast<std::size_t>(dim), 1.0)));
    out.push_back(make_sigmoid_product(dim));
    return out;
}

Estimate discrepancy(const TestFunction& h, const VectorSampler& w,
                     const matlite::SymMatrix& sigma_half, long long nsamples, std::uint64_t seed,
                     int threads) {
    if (h.dim != w.dim || sigma_half.dim() != w.dim)
        throw matlite::DimensionMismatch("discrepancy: dimension mismatch");
    if (nsamples < 2) throw std::invalid_argument("discrepancy: need at least 2 samples");
    const int d = w.dim;
    auto work = [&](Rng& rng, long long lo, long long hi) {
        Welford acc;
        auto draw = w.draw;
        auto fn = h.h;
        std::vector<double> wv(static_cast<std::size_t>(d)), z(static_cast<std::size_t>(d)),
            gz(static_cast<std::size_t>(d));
        for (long long s = lo; s < hi; ++s) {
            draw(rng, wv);
            for (int i = 0; i < d; ++i) z[static_cast<std::size_t>(i)] = rng.normal();
            for (int i = 0; i < d; ++i) {
                double v = 0.0;
                for (int j = 0; j < d; ++j) v += sigma_half(i, j) * z[static_cast<std::size_t>(j)];
                gz[static_cast<std::size_t>(i)] = v;
            }
            acc.add(fn(wv) - fn(gz));
        }
        return acc;
    };
    Welford total =
        run_blocks<Welford>(nsamples, seed, threads, work, [](Welford& a, const Welford& b) { a.merge(b); });
    return Estimate{total.mean(), total.stderr_(), total.count(), seed};
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ull + (salt << 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct CondPartial {
    std::vector<Welford4> outer;      // per matrix entry: conditional products
    std::vector<Welford> inner_noise; // per entry: inner sampling variance / inner_n
};

}  // namespace

stein::AbcStats abc_from_pairs(const PairCoupling& coupling, std::span<const double> lambda_cols,
                               const AbcOptions& opt) {
    const int d = coupling.dim;
    if (static_cast<int>(lambda_cols.size()) != d)
        throw matlite::DimensionMismatch("abc_from_pairs: lambda column sums have wrong length");
    if (!coupling.draw_cond_products && !(coupling.draw_state && coupling.dw_given_state))
        throw std::invalid_argument(
            "abc_from_pairs: need exact conditional products or a nested state sampler");
    if (opt.nsamples < 2) throw std::invalid_argument("abc_from_pairs: need at least 2 samples");
    if (!coupling.draw_cond_products && opt.inner_nsamples < 2)
        throw std::invalid_argument("abc_from_pairs: nested mode needs inner_nsamples >= 2");

    const std::size_t dd = static_cast<std::size_t>(d) * d;
    const bool exact_cond = static_cast<bool>(coupling.draw_cond_products);

    // conditional second-moment variances (the A statistic)
    auto cond_work = [&](Rng& rng, long long lo, long long hi) {
        CondPartial part;
        part.outer.resize(dd);
        part.inner_noise.resize(dd);
        std::vector<double> prods(dd);
        if (exact_cond) {
            auto draw = coupling.draw_cond_products;
            for (long long s = lo; s < hi; ++s) {
                draw(rng, prods);
                for (std::size_t e = 0; e < dd; ++e) part.outer[e].add(prods[e]);
            }
        } else {
            auto draw_state = coupling.draw_state;
            auto draw_dw = coupling.dw_given_state;
            std::vector<double> dw(static_cast<std::size_t>(d));
            std::vector<Welford> inner(dd);
            for (long long s = lo; s < hi; ++s) {
                auto state = draw_state(rng);
                for (auto& w : inner) w = Welford{};
                for (long long m = 0; m < opt.inner_nsamples; ++m) {
                    draw_dw(state.get(), rng, dw);
                    for (int i = 0; i < d; ++i)
                        for (int j = 0; j < d; ++j)
                            inner[static_cast<std::size_t>(i) * d + j].add(dw[static_cast<std::size_t>(i)] *
                                                                           dw[static_cast<std::size_t>(j)]);
                }
                for (std::size_t e = 0; e < dd; ++e) {
                    part.outer[e].add(inner[e].mean());
                    part.inner_noise[e].add(inner[e].variance() /
                                            static_cast<double>(opt.inner_nsamples));
                }
            }
        }
        return part;
    };
    CondPartial cond = run_blocks<CondPartial>(
        opt.nsamples, opt.seed, opt.threads, cond_work, [dd](CondPartial& a, const CondPartial& b) {
            for (std::size_t e = 0; e < dd; ++e) {
                a.outer[e].merge(b.outer[e]);
                a.inner_noise[e].merge(b.inner_noise[e]);
            }
        });

    double a_stat = 0.0, a_se = 0.0;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const auto& w = cond.outer[static_cast<std::size_t>(i) * d + j];
            double var = w.variance();
            if (!exact_cond) {
                // two-level debiasing: the outer variance of inner means
                // overshoots Var E^W by the mean inner sampling variance
                var = std::max(0.0, var - cond.inner_noise[static_cast<std::size_t>(i) * d + j].mean());
            }
            const double sd = std::sqrt(std::max(0.0, var));
            a_stat += lambda_cols[static_cast<std::size_t>(i)] * sd;
            if (sd > 0.0)
                a_se += lambda_cols[static_cast<std::size_t>(i)] * w.variance_stderr() / (2.0 * sd);
        }
    }

    // plain third absolute cross-moments (the B statistic)
    const std::size_t ddd = dd * static_cast<std::size_t>(d);
    auto b_work = [&](Rng& rng, long long lo, long long hi) {
        std::vector<Welford> acc(ddd);
        std::function<void(Rng&, std::span<double>)> draw = coupling.draw_dw;
        std::vector<double> dw(static_cast<std::size_t>(d));
        for (long long s = lo; s < hi; ++s) {
            draw(rng, dw);
            std::size_t e = 0;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    for (int k = 0; k < d; ++k, ++e)
                        acc[e].add(std::abs(dw[static_cast<std::size_t>(i)] *
                                            dw[static_cast<std::size_t>(j)] *
                                            dw[static_cast<std::size_t>(k)]));
        }
        return acc;
    };
    auto b_acc = run_blocks<std::vector<Welford>>(
        opt.nsamples, derive_seed(opt.seed, 0xb), opt.threads, b_work,
        [](std::vector<Welford>& a, const std::vector<Welford>& b) {
            for (std::size_t e = 0; e < a.size(); ++e) a[e].merge(b[e]);
        });

    double b_stat = 0.0, b_se = 0.0;
    {
        std::size_t e = 0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k, ++e) {
                    b_stat += lambda_cols[static_cast<std::size_t>(i)] * b_acc[e].mean();
                    b_se += lambda_cols[static_cast<std::size_t>(i)] * b_acc[e].stderr_();
                }
    }

    double c_stat = 0.0, c_se = 0.0;
    if (!coupling.r_zero) {
        if (!coupling.draw_residual)
            throw std::invalid_argument("abc_from_pairs: coupling without R=0 needs draw_residual");
        auto r_work = [&](Rng& rng, long long lo, long long hi) {
            std::vector<Welford> acc(static_cast<std::size_t>(d));
            auto draw = coupling.draw_residual;
            std::vector<double> r(static_cast<std::size_t>(d));
            for (long long s = lo; s < hi; ++s) {
                draw(rng, r);
                for (int i = 0; i < d; ++i)
                    acc[static_cast<std::size_t>(i)].add(r[static_cast<std::size_t>(i)] *
                                                         r[static_cast<std::size_t>(i)]);
            }
            return acc;
        };
        auto r_acc = run_blocks<std::vector<Welford>>(
            opt.nsamples, derive_seed(opt.seed, 0xc), opt.threads, r_work,
            [](std::vector<Welford>& a, const std::vector<Welford>& b) {
                for (std::size_t e = 0; e < a.size(); ++e) a[e].merge(b[e]);
            });
        for (int i = 0; i < d; ++i) {
            const double m = std::max(0.0, r_acc[static_cast<std::size_t>(i)].mean());
            const double rms = std::sqrt(m);
            c_stat += lambda_cols[static_cast<std::size_t>(i)] * rms;
            if (rms > 0.0)
                c_se += lambda_cols[static_cast<std::size_t>(i)] *
                        r_acc[static_cast<std::size_t>(i)].stderr_() / (2.0 * rms);
        }
    }

    stein::AbcStats out;
    out.a = a_stat;
    out.b = b_stat;
    out.c = c_stat;
    out.a_stderr = a_se;
    out.b_stderr = b_se;
    out.c_stderr = c_se;
    out.provenance = stein::Provenance::mc;
    return out;
}

}  // namespace steinembed::mc
