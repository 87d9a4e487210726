#include "steinembed/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace steinembed::chaos {

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace

ChaosCoeffs::ChaosCoeffs(int dim) : dim_(dim), terms_(static_cast<std::size_t>(dim)) {
    if (dim < 1) throw std::invalid_argument("ChaosCoeffs: dimension must be positive");
}

void ChaosCoeffs::add(std::span<const int> indices, double value) {
    const int n = static_cast<int>(indices.size());
    if (n < 1 || n > dim_) throw std::invalid_argument("ChaosCoeffs::add: order out of range");
    for (int i = 0; i < n; ++i) {
        if (indices[static_cast<std::size_t>(i)] < 0 || indices[static_cast<std::size_t>(i)] >= dim_)
            throw std::invalid_argument("ChaosCoeffs::add: index out of range");
        if (i > 0 && indices[static_cast<std::size_t>(i)] <= indices[static_cast<std::size_t>(i - 1)])
            throw std::invalid_argument("ChaosCoeffs::add: indices must be strictly increasing");
    }
    auto& bucket = terms_[static_cast<std::size_t>(n - 1)];
    std::vector<int> key(indices.begin(), indices.end());
    for (auto& [idx, v] : bucket)
        if (idx == key) {
            v = value;
            return;
        }
    bucket.emplace_back(std::move(key), value);
}

ChaosCoeffs ChaosCoeffs::load(const std::string& path, int dim) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open coefficient file '" + path + "'");
    ChaosCoeffs c(dim);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        std::istringstream ss(line);
        int n = 0;
        if (!(ss >> n)) continue;  // blank line
        if (n < 1 || n > dim)
            throw ParseError("coefficients line " + std::to_string(lineno) + ": order " +
                             std::to_string(n) + " outside 1.." + std::to_string(dim));
        std::vector<int> idx(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            if (!(ss >> idx[static_cast<std::size_t>(i)]))
                throw ParseError("coefficients line " + std::to_string(lineno) + ": expected " +
                                 std::to_string(n) + " indices");
            idx[static_cast<std::size_t>(i)] -= 1;  // file is 1-based
        }
        double value = 0.0;
        if (!(ss >> value))
            throw ParseError("coefficients line " + std::to_string(lineno) + ": missing value");
        try {
            c.add(idx, value);
        } catch (const std::invalid_argument& e) {
            throw ParseError("coefficients line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return c;
}

double BaseLaw::sample(Rng& rng) const {
    switch (kind) {
        case BaseLawKind::rademacher: return rng.bernoulli(0.5) ? 1.0 : -1.0;
        case BaseLawKind::uniform: return 2.0 * rng.uniform() - 1.0;
        case BaseLawKind::normal: return rng.normal();
    }
    return 0.0;
}

double BaseLaw::variance() const {
    switch (kind) {
        case BaseLawKind::rademacher: return 1.0;
        case BaseLawKind::uniform: return 1.0 / 3.0;
        case BaseLawKind::normal: return 1.0;
    }
    return 0.0;
}

const char* BaseLaw::name() const {
    switch (kind) {
        case BaseLawKind::rademacher: return "pm1";
        case BaseLawKind::uniform: return "uniform";
        case BaseLawKind::normal: return "normal";
    }
    return "?";
}

BaseLaw BaseLaw::by_name(const std::string& name) {
    if (name == "pm1" || name == "rademacher") return BaseLaw{BaseLawKind::rademacher};
    if (name == "uniform") return BaseLaw{BaseLawKind::uniform};
    if (name == "normal") return BaseLaw{BaseLawKind::normal};
    throw std::invalid_argument("unknown base law '" + name + "'");
}

std::vector<double> eval_j(std::span<const double> x, const ChaosCoeffs& c) {
    if (static_cast<int>(x.size()) != c.dim())
        throw std::invalid_argument("eval_j: point has wrong dimension");
    std::vector<double> j(static_cast<std::size_t>(c.dim()), 0.0);
    for (int n = 1; n <= c.dim(); ++n) {
        const double nf = factorial(n);
        double acc = 0.0;
        for (const auto& [idx, value] : c.order_terms(n)) {
            double prod = value;
            for (int i : idx) prod *= x[static_cast<std::size_t>(i)];
            acc += prod;
        }
        j[static_cast<std::size_t>(n - 1)] = nf * acc;
    }
    return j;
}

int pair_step(std::vector<double>& x, const BaseLaw& base, Rng& rng) {
    const int i = static_cast<int>(rng.below(x.size()));
    x[static_cast<std::size_t>(i)] = base.sample(rng);
    return i;
}

IdentityResidual cond_identity_residual(std::span<const double> x, const ChaosCoeffs& c) {
    const int d = c.dim();
    const std::vector<double> j = eval_j(x, c);
    IdentityResidual out;
    out.residual.assign(static_cast<std::size_t>(d), 0.0);
    out.scale.assign(static_cast<std::size_t>(d), 1.0);
    for (int n = 1; n <= d; ++n) {
        const double nf = factorial(n);
        double lhs = 0.0, mag = 0.0;
        for (int i = 0; i < d; ++i) {
            for (const auto& [idx, value] : c.order_terms(n)) {
                if (std::find(idx.begin(), idx.end(), i) == idx.end()) continue;
                double prod = nf * value;
                for (int k : idx) prod *= x[static_cast<std::size_t>(k)];
                lhs -= prod;
                mag += std::abs(prod);
            }
        }
        lhs /= d;
        mag /= d;
        const double rhs = -static_cast<double>(n) / d * j[static_cast<std::size_t>(n - 1)];
        out.residual[static_cast<std::size_t>(n - 1)] = lhs - rhs;
        out.scale[static_cast<std::size_t>(n - 1)] = std::max(1.0, mag + std::abs(rhs));
    }
    return out;
}

matlite::LowerMatrix lambda_chaos(int d) {
    if (d < 1) throw std::invalid_argument("lambda_chaos: d must be positive");
    matlite::LowerMatrix l(d);
    for (int n = 1; n <= d; ++n) l.set(n - 1, n - 1, static_cast<double>(n) / d);
    return l;
}

namespace {

// G_n(i, x): sum over order-n tuples containing i of n! f_n prod_{k != i} x_k
void gradient_sums(std::span<const double> x, const ChaosCoeffs& c, std::vector<double>& g) {
    const int d = c.dim();
    g.assign(static_cast<std::size_t>(d) * static_cast<std::size_t>(d), 0.0);  // g[n-1, i]
    for (int n = 1; n <= d; ++n) {
        const double nf = factorial(n);
        for (const auto& [idx, value] : c.order_terms(n)) {
            for (std::size_t drop = 0; drop < idx.size(); ++drop) {
                double prod = nf * value;
                for (std::size_t k = 0; k < idx.size(); ++k)
                    if (k != drop) prod *= x[static_cast<std::size_t>(idx[k])];
                g[static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(d) +
                  static_cast<std::size_t>(idx[drop])] += prod;
            }
        }
    }
}

}  // namespace

std::vector<double> cond_products(std::span<const double> x, const ChaosCoeffs& c,
                                  const BaseLaw& base) {
    const int d = c.dim();
    std::vector<double> g;
    gradient_sums(x, c, g);
    const double var = base.variance();
    std::vector<double> out(static_cast<std::size_t>(d) * static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
        // E (x'_i - x_i)^2 = var + x_i^2 for a mean-zero redraw
        const double second = var + x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        for (int n = 0; n < d; ++n)
            for (int m = 0; m < d; ++m)
                out[static_cast<std::size_t>(n) * static_cast<std::size_t>(d) + static_cast<std::size_t>(m)] +=
                    second * g[static_cast<std::size_t>(n) * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] *
                    g[static_cast<std::size_t>(m) * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] / d;
    }
    return out;
}

mc::VectorSampler j_sampler(const ChaosCoeffs& c, const BaseLaw& base) {
    mc::VectorSampler vs;
    vs.dim = c.dim();
    vs.draw = [c, base](Rng& rng, std::span<double> out) {
        std::vector<double> x(static_cast<std::size_t>(c.dim()));
        for (auto& v : x) v = base.sample(rng);
        const auto j = eval_j(x, c);
        std::copy(j.begin(), j.end(), out.begin());
    };
    return vs;
}

mc::PairCoupling pair_coupling(const ChaosCoeffs& c, const BaseLaw& base) {
    const int d = c.dim();
    mc::PairCoupling pc;
    pc.dim = d;
    pc.r_zero = true;
    pc.draw_dw = [c, base, d](Rng& rng, std::span<double> dw) {
        std::vector<double> x(static_cast<std::size_t>(d));
        for (auto& v : x) v = base.sample(rng);
        const auto j0 = eval_j(x, c);
        std::vector<double> x2 = x;
        pair_step(x2, base, rng);
        const auto j1 = eval_j(x2, c);
        for (int n = 0; n < d; ++n)
            dw[static_cast<std::size_t>(n)] = j1[static_cast<std::size_t>(n)] - j0[static_cast<std::size_t>(n)];
    };
    pc.draw_cond_products = [c, base, d](Rng& rng, std::span<double> prods) {
        std::vector<double> x(static_cast<std::size_t>(d));
        for (auto& v : x) v = base.sample(rng);
        const auto cp = cond_products(x, c, base);
        std::copy(cp.begin(), cp.end(), prods.begin());
    };
    pc.draw_state = [c, base, d](Rng& rng) -> std::shared_ptr<const void> {
        auto x = std::make_shared<std::vector<double>>(static_cast<std::size_t>(d));
        for (auto& v : *x) v = base.sample(rng);
        return x;
    };
    pc.dw_given_state = [c, base, d](const void* state, Rng& rng, std::span<double> dw) {
        const auto& x = *static_cast<const std::vector<double>*>(state);
        const auto j0 = eval_j(x, c);
        std::vector<double> x2 = x;
        pair_step(x2, base, rng);
        const auto j1 = eval_j(x2, c);
        for (int n = 0; n < d; ++n)
            dw[static_cast<std::size_t>(n)] = j1[static_cast<std::size_t>(n)] - j0[static_cast<std::size_t>(n)];
    };
    return pc;
}

}  // namespace steinembed::chaos
