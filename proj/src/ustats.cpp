#include "steinembed/ustats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace steinembed::ustats {

const KernelFn& KernelModel::kernel_level(int k) const {
    if (k == order && cond.empty()) return psi;
    if (k < 1 || k > order || !has_conditionals())
        throw MissingConditionalKernel("kernel '" + name + "' has no conditional kernel of order " +
                                       std::to_string(k));
    return cond[static_cast<std::size_t>(k - 1)];
}

long long subset_count(int n, int k, long long budget) {
    if (k < 0 || k > n) return 0;
    long long c = 1;
    for (int i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;
        if (c > budget)
            throw BudgetExceeded("C(" + std::to_string(n) + "," + std::to_string(k) +
                                 ") exceeds the subset budget");
    }
    return c;
}

void for_each_subset(int n, int k, const std::function<void(std::span<const int>)>& fn) {
    if (k == 0 || k > n) return;
    std::vector<int> c(static_cast<std::size_t>(k));
    std::iota(c.begin(), c.end(), 0);
    for (;;) {
        fn(c);
        // colex successor: bump the lowest index that can move
        int i = 0;
        while (i < k) {
            const int limit = (i + 1 < k) ? c[static_cast<std::size_t>(i + 1)] : n;
            if (c[static_cast<std::size_t>(i)] + 1 < limit) break;
            ++i;
        }
        if (i == k) return;
        ++c[static_cast<std::size_t>(i)];
        for (int j = 0; j < i; ++j) c[static_cast<std::size_t>(j)] = j;
    }
}

KernelModel make_pm1_kernel() {
    KernelModel km;
    km.name = "pm1";
    km.order = 2;
    km.psi = [](std::span<const double> x) { return 0.5 * (x[0] + x[1]); };
    km.cond = {[](std::span<const double> x) { return 0.5 * x[0]; }, km.psi};
    km.sample_base = [](Rng& rng) { return rng.bernoulli(0.5) ? 1.0 : -1.0; };
    km.support = SupportTable{{-1.0, 1.0}, {0.5, 0.5}};
    km.fast_u = [](std::span<const double> sample, std::span<double> u) {
        double s = 0.0;
        for (double x : sample) s += x;
        u[0] = 0.5 * s;
        u[1] = 0.5 * (static_cast<double>(sample.size()) - 1.0) * s;
    };
    return km;
}

KernelModel make_samplevar_kernel() {
    KernelModel km;
    km.name = "samplevar";
    km.order = 2;
    km.psi = [](std::span<const double> x) {
        const double d = x[0] - x[1];
        return 0.5 * d * d - 1.0;
    };
    km.cond = {[](std::span<const double> x) { return 0.5 * (x[0] * x[0] - 1.0); }, km.psi};
    km.sample_base = [](Rng& rng) { return rng.normal(); };
    km.fast_u = [](std::span<const double> sample, std::span<double> u) {
        const double n = static_cast<double>(sample.size());
        double s = 0.0, q = 0.0;
        for (double x : sample) {
            s += x;
            q += x * x;
        }
        u[0] = 0.5 * (q - n);
        u[1] = 0.5 * (n * q - s * s) - 0.5 * n * (n - 1.0);
    };
    return km;
}

namespace {

struct TableKernel {
    int order;
    std::vector<double> values;
    std::vector<double> probs;
    std::vector<double> table;  // size m^order, row-major

    int index_of(double x) const {
        for (std::size_t i = 0; i < values.size(); ++i)
            if (values[i] == x) return static_cast<int>(i);
        throw ParseError("kernel table: argument is not a support point");
    }

    double lookup(std::span<const int> idx) const {
        std::size_t flat = 0;
        for (int i : idx) flat = flat * values.size() + static_cast<std::size_t>(i);
        return table[flat];
    }

    // psi_k by exact marginalization over the trailing order-k coordinates
    double cond_value(std::span<const double> x, int k) const {
        const int m = static_cast<int>(values.size());
        std::vector<int> idx(static_cast<std::size_t>(order));
        for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = index_of(x[static_cast<std::size_t>(i)]);
        const int rest = order - k;
        double acc = 0.0;
        std::vector<int> ctr(static_cast<std::size_t>(rest), 0);
        for (;;) {
            double w = 1.0;
            for (int i = 0; i < rest; ++i) {
                idx[static_cast<std::size_t>(k + i)] = ctr[static_cast<std::size_t>(i)];
                w *= probs[static_cast<std::size_t>(ctr[static_cast<std::size_t>(i)])];
            }
            acc += w * lookup(idx);
            int pos = rest - 1;
            while (pos >= 0 && ++ctr[static_cast<std::size_t>(pos)] == m) {
                ctr[static_cast<std::size_t>(pos)] = 0;
                --pos;
            }
            if (pos < 0) break;
        }
        return acc;
    }
};

void validate_table(const TableKernel& tk) {
    const int m = static_cast<int>(tk.values.size());
    const int d = tk.order;
    double psum = 0.0;
    for (double p : tk.probs) {
        if (p < 0.0) throw ParseError("kernel table: negative probability");
        psum += p;
    }
    if (std::abs(psum - 1.0) > 1e-12) throw ParseError("kernel table: probabilities must sum to 1");

    double scale = 0.0;
    for (double v : tk.table) scale = std::max(scale, std::abs(v));

    // symmetry in the arguments
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (;;) {
        std::vector<int> sorted = idx;
        std::sort(sorted.begin(), sorted.end());
        if (std::abs(tk.lookup(idx) - tk.lookup(sorted)) > 1e-12 * std::max(1.0, scale))
            throw ParseError("kernel table: kernel is not symmetric");
        int pos = d - 1;
        while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == m) {
            idx[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }

    // centering: E psi over the product law
    std::vector<double> none;
    double mean = tk.cond_value(none, 0);
    if (std::abs(mean) > 1e-9 * std::max(1.0, scale))
        throw ParseError("kernel table: kernel must be centered (E psi = 0)");

    // non-degeneracy: psi_1 must not vanish on the whole support
    bool nondeg = false;
    for (int i = 0; i < m && !nondeg; ++i) {
        const double x = tk.values[static_cast<std::size_t>(i)];
        std::vector<double> arg{x};
        if (std::abs(tk.cond_value(arg, 1)) > 1e-12 * std::max(1.0, scale)) nondeg = true;
    }
    if (!nondeg) throw ParseError("kernel table: degenerate kernel (psi_1 vanishes on the support)");
}

}  // namespace

KernelModel load_kernel_table(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open kernel table '" + path + "'");
    auto tk = std::make_shared<TableKernel>();
    int m = 0;
    if (!(f >> tk->order >> m)) throw ParseError("kernel table: missing 'd m' header");
    if (tk->order < 1 || m < 2) throw ParseError("kernel table: need order >= 1 and support size >= 2");
    tk->values.resize(static_cast<std::size_t>(m));
    tk->probs.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
        if (!(f >> tk->values[static_cast<std::size_t>(i)] >> tk->probs[static_cast<std::size_t>(i)]))
            throw ParseError("kernel table: expected " + std::to_string(m) + " support lines");
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            if (tk->values[static_cast<std::size_t>(i)] == tk->values[static_cast<std::size_t>(j)])
                throw ParseError("kernel table: duplicate support value");
    std::size_t cells = 1;
    for (int i = 0; i < tk->order; ++i) {
        cells *= static_cast<std::size_t>(m);
        if (cells > 10000000) throw ParseError("kernel table: m^d is too large");
    }
    tk->table.resize(cells);
    for (std::size_t i = 0; i < cells; ++i)
        if (!(f >> tk->table[i])) throw ParseError("kernel table: expected " + std::to_string(cells) + " kernel values");
    validate_table(*tk);

    KernelModel km;
    km.name = path;
    km.order = tk->order;
    km.psi = [tk](std::span<const double> x) { return tk->cond_value(x, tk->order); };
    for (int k = 1; k <= tk->order; ++k)
        km.cond.push_back([tk, k](std::span<const double> x) { return tk->cond_value(x, k); });
    km.sample_base = [tk](Rng& rng) {
        double u = rng.uniform();
        for (std::size_t i = 0; i < tk->probs.size(); ++i) {
            if (u < tk->probs[i]) return tk->values[i];
            u -= tk->probs[i];
        }
        return tk->values.back();
    };
    km.support = SupportTable{tk->values, tk->probs};
    return km;
}

KernelModel kernel_by_name(const std::string& name_or_path) {
    if (name_or_path == "pm1") return make_pm1_kernel();
    if (name_or_path == "samplevar") return make_samplevar_kernel();
    return load_kernel_table(name_or_path);
}

UVector compute_u(std::span<const double> sample, const KernelModel& km, bool force_generic) {
    const int n = static_cast<int>(sample.size());
    const int d = km.order;
    if (n < d) throw std::invalid_argument("compute_u: sample smaller than the kernel order");

    UVector uv;
    uv.n = n;
    uv.u.assign(static_cast<std::size_t>(d), 0.0);
    uv.w.assign(static_cast<std::size_t>(d), 0.0);

    if (km.fast_u && !force_generic) {
        km.fast_u(sample, uv.u);
    } else {
        std::vector<double> args(static_cast<std::size_t>(d));
        for (int k = 1; k <= d; ++k) {
            subset_count(n, k);  // budget guard
            const auto& kern = km.kernel_level(k);
            double acc = 0.0;
            for_each_subset(n, k, [&](std::span<const int> idx) {
                for (int i = 0; i < k; ++i)
                    args[static_cast<std::size_t>(i)] = sample[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
                acc += kern(std::span<const double>(args.data(), static_cast<std::size_t>(k)));
            });
            uv.u[static_cast<std::size_t>(k - 1)] = acc;
        }
    }

    const double rootn = std::sqrt(static_cast<double>(n));
    for (int k = 1; k <= d; ++k)
        uv.w[static_cast<std::size_t>(k - 1)] =
            rootn * uv.u[static_cast<std::size_t>(k - 1)] / static_cast<double>(subset_count(n, k));
    return uv;
}

matlite::LowerMatrix lambda_ustat(int n, int d) {
    if (d < 1 || n < d) throw std::invalid_argument("lambda_ustat: need n >= d >= 1");
    matlite::LowerMatrix l(d);
    for (int k = 1; k <= d; ++k) {
        l.set(k - 1, k - 1, static_cast<double>(k) / n);
        if (k >= 2) l.set(k - 1, k - 2, -static_cast<double>(k) / n);
    }
    return l;
}

matlite::LowerMatrix lambda_ustat_inverse(int n, int d) {
    matlite::LowerMatrix inv(d);
    for (int k = 1; k <= d; ++k)
        for (int l = 1; l <= k; ++l) inv.set(k - 1, l - 1, static_cast<double>(n) / l);
    return inv;
}

std::vector<double> lambda_ustat_colsums(int n, int d) {
    std::vector<double> out(static_cast<std::size_t>(d));
    for (int l = 1; l <= d; ++l)
        out[static_cast<std::size_t>(l - 1)] = static_cast<double>(d - l + 1) * n / l;
    return out;
}

namespace {

// Sum over subsets containing `j` of psi_k(with x_new at j) - psi_k(with x_old at j).
double delta_u_level(std::span<const double> sample, const KernelModel& km, int k, int j,
                     double x_old, double x_new) {
    const int n = static_cast<int>(sample.size());
    const auto& kern = km.kernel_level(k);
    std::vector<double> args(static_cast<std::size_t>(k));
    double acc = 0.0;
    if (k == 1) {
        args[0] = x_new;
        acc += kern(std::span<const double>(args.data(), 1));
        args[0] = x_old;
        acc -= kern(std::span<const double>(args.data(), 1));
        return acc;
    }
    for_each_subset(n - 1, k - 1, [&](std::span<const int> idx) {
        for (int i = 0; i < k - 1; ++i) {
            const int v = idx[static_cast<std::size_t>(i)];
            args[static_cast<std::size_t>(i)] = sample[static_cast<std::size_t>(v < j ? v : v + 1)];
        }
        args[static_cast<std::size_t>(k - 1)] = x_new;
        acc += kern(args);
        args[static_cast<std::size_t>(k - 1)] = x_old;
        acc -= kern(args);
    });
    return acc;
}

}  // namespace

int pair_step(std::vector<double>& sample, UVector& uv, const KernelModel& km, Rng& rng) {
    const int n = static_cast<int>(sample.size());
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const double x_old = sample[static_cast<std::size_t>(j)];
    const double x_new = km.sample_base(rng);
    if (x_new != x_old) {
        for (int k = 1; k <= km.order; ++k)
            uv.u[static_cast<std::size_t>(k - 1)] += delta_u_level(sample, km, k, j, x_old, x_new);
        sample[static_cast<std::size_t>(j)] = x_new;
        const double rootn = std::sqrt(static_cast<double>(n));
        for (int k = 1; k <= km.order; ++k)
            uv.w[static_cast<std::size_t>(k - 1)] =
                rootn * uv.u[static_cast<std::size_t>(k - 1)] / static_cast<double>(subset_count(n, k));
    }
    return j;
}

IdentityResidual cond_identity_residual(std::span<const double> sample, const KernelModel& km) {
    const int n = static_cast<int>(sample.size());
    const int d = km.order;
    if (!km.has_conditionals())
        throw MissingConditionalKernel("cond_identity_residual: kernel '" + km.name +
                                       "' lacks conditional kernels");
    const UVector uv = compute_u(sample, km, true);

    IdentityResidual out;
    out.residual.assign(static_cast<std::size_t>(d), 0.0);
    out.scale.assign(static_cast<std::size_t>(d), 1.0);

    std::vector<double> args(static_cast<std::size_t>(d));
    for (int k = 1; k <= d; ++k) {
        const auto& kern_k = km.kernel_level(k);
        double lhs = 0.0, mag = 0.0;
        for_each_subset(n, k, [&](std::span<const int> idx) {
            for (int i = 0; i < k; ++i)
                args[static_cast<std::size_t>(i)] =
                    sample[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
            const double vk = kern_k(std::span<const double>(args.data(), static_cast<std::size_t>(k)));
            for (int drop = 0; drop < k; ++drop) {
                double vk1 = 0.0;
                if (k > 1) {
                    std::vector<double> sub;
                    sub.reserve(static_cast<std::size_t>(k - 1));
                    for (int i = 0; i < k; ++i)
                        if (i != drop)
                            sub.push_back(sample[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
                    vk1 = km.kernel_level(k - 1)(sub);
                }
                lhs += vk1 - vk;
                mag += std::abs(vk1) + std::abs(vk);
            }
        });
        lhs /= n;
        mag /= n;
        const double uk = uv.u[static_cast<std::size_t>(k - 1)];
        const double uk1 = k >= 2 ? uv.u[static_cast<std::size_t>(k - 2)] : 0.0;  // U_0 = 0
        const double rhs = -static_cast<double>(k) / n * uk + static_cast<double>(n - k + 1) / n * uk1;
        out.residual[static_cast<std::size_t>(k - 1)] = lhs - rhs;
        out.scale[static_cast<std::size_t>(k - 1)] = std::max(1.0, mag + std::abs(rhs));
    }
    return out;
}

double thm_bound(int n, int d, double rho, const stein::DerivBounds& db) {
    if (rho < 0.0) throw std::invalid_argument("thm_bound: rho must be nonnegative");
    const double dd = static_cast<double>(d);
    const double d6 = std::pow(dd, 6), d7 = std::pow(dd, 7);
    return (4.0 * std::sqrt(rho) * d6 * db.h2 + std::pow(rho, 0.75) * d7 * db.h3) /
           std::sqrt(static_cast<double>(n));
}

SigmaEstimate estimate_sigma(const KernelModel& km, int n, long long nsamples, std::uint64_t seed,
                             int threads) {
    const int d = km.order;
    const std::size_t dd = static_cast<std::size_t>(d) * d;
    auto draw = [km, n, d](Rng& rng, std::span<double> out) {
        std::vector<double> sample(static_cast<std::size_t>(n));
        for (auto& x : sample) x = km.sample_base(rng);
        const UVector uv = compute_u(sample, km);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                out[static_cast<std::size_t>(i) * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] =
                    uv.w[static_cast<std::size_t>(i)] * uv.w[static_cast<std::size_t>(j)];
    };
    const auto est = mc::estimate_vec(draw, static_cast<int>(dd), nsamples, seed, threads);

    SigmaEstimate out(d);
    matlite::Mat mean(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            mean(i, j) = est[static_cast<std::size_t>(i) * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)].mean;
            out.stderr_(i, j) =
                est[static_cast<std::size_t>(i) * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)].stderr_;
        }
    out.sigma = matlite::SymMatrix::from_full(mean, 1e-9);
    out.exact = false;
    out.count = nsamples;
    return out;
}

namespace {

template <typename Fn>
void for_each_support_tuple(const SupportTable& st, int len, Fn&& fn) {
    const int m = static_cast<int>(st.values.size());
    std::vector<int> ctr(static_cast<std::size_t>(len), 0);
    std::vector<double> vals(static_cast<std::size_t>(len));
    for (;;) {
        double w = 1.0;
        for (int i = 0; i < len; ++i) {
            vals[static_cast<std::size_t>(i)] = st.values[static_cast<std::size_t>(ctr[static_cast<std::size_t>(i)])];
            w *= st.probs[static_cast<std::size_t>(ctr[static_cast<std::size_t>(i)])];
        }
        fn(std::span<const double>(vals), w);
        int pos = len - 1;
        while (pos >= 0 && ++ctr[static_cast<std::size_t>(pos)] == m) {
            ctr[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
}

}  // namespace

SigmaEstimate exact_sigma_enumerated(const KernelModel& km, int n, long long budget) {
    if (!km.support) throw MissingConditionalKernel("exact_sigma_enumerated: kernel has no support table");
    const int m = static_cast<int>(km.support->values.size());
    double outcomes = 1.0;
    for (int i = 0; i < n; ++i) {
        outcomes *= m;
        if (outcomes > static_cast<double>(budget))
            throw BudgetExceeded("exact_sigma_enumerated: support^n exceeds the budget");
    }
    const int d = km.order;
    SigmaEstimate out(d);
    matlite::Mat acc(d);
    for_each_support_tuple(*km.support, n, [&](std::span<const double> sample, double w) {
        const UVector uv = compute_u(sample, km);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                acc(i, j) += w * uv.w[static_cast<std::size_t>(i)] * uv.w[static_cast<std::size_t>(j)];
    });
    out.sigma = matlite::SymMatrix::from_full(acc, 1e-12);
    out.exact = true;
    out.count = static_cast<long long>(outcomes);
    return out;
}

mc::Estimate estimate_rho(const KernelModel& km, long long nsamples, std::uint64_t seed, int threads) {
    const int d = km.order;
    auto draw = [km, d](Rng& rng) {
        std::vector<double> x(static_cast<std::size_t>(d));
        for (auto& v : x) v = km.sample_base(rng);
        const double psi = km.psi(x);
        const double p2 = psi * psi;
        return p2 * p2;
    };
    return mc::estimate(draw, nsamples, seed, threads);
}

double exact_rho_enumerated(const KernelModel& km) {
    if (!km.support) throw MissingConditionalKernel("exact_rho_enumerated: kernel has no support table");
    double acc = 0.0;
    for_each_support_tuple(*km.support, km.order, [&](std::span<const double> x, double w) {
        const double psi = km.psi(x);
        acc += w * psi * psi * psi * psi;
    });
    return acc;
}

double exact_mean_enumerated(const KernelModel& km) {
    if (!km.support) throw MissingConditionalKernel("exact_mean_enumerated: kernel has no support table");
    double acc = 0.0;
    for_each_support_tuple(*km.support, km.order,
                           [&](std::span<const double> x, double w) { acc += w * km.psi(x); });
    return acc;
}

mc::VectorSampler w_sampler(const KernelModel& km, int n) {
    mc::VectorSampler vs;
    vs.dim = km.order;
    vs.draw = [km, n](Rng& rng, std::span<double> out) {
        std::vector<double> sample(static_cast<std::size_t>(n));
        for (auto& x : sample) x = km.sample_base(rng);
        const UVector uv = compute_u(sample, km);
        std::copy(uv.w.begin(), uv.w.end(), out.begin());
    };
    return vs;
}

mc::PairCoupling pair_coupling(const KernelModel& km, int n) {
    const int d = km.order;
    const double rootn = std::sqrt(static_cast<double>(n));
    std::vector<double> wscale(static_cast<std::size_t>(d));
    for (int k = 1; k <= d; ++k)
        wscale[static_cast<std::size_t>(k - 1)] = rootn / static_cast<double>(subset_count(n, k));

    auto probe_dw = [km, n, d = d, wscale](const std::vector<double>& sample, Rng& rng,
                                           std::span<double> dw) {
        const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        const double x_old = sample[static_cast<std::size_t>(j)];
        const double x_new = km.sample_base(rng);
        for (int k = 1; k <= d; ++k) {
            const double du =
                (x_new == x_old) ? 0.0 : delta_u_level(sample, km, k, j, x_old, x_new);
            dw[static_cast<std::size_t>(k - 1)] = du * wscale[static_cast<std::size_t>(k - 1)];
        }
    };

    mc::PairCoupling pc;
    pc.dim = d;
    pc.r_zero = true;
    pc.draw_dw = [km, n, probe_dw](Rng& rng, std::span<double> dw) {
        std::vector<double> sample(static_cast<std::size_t>(n));
        for (auto& x : sample) x = km.sample_base(rng);
        probe_dw(sample, rng, dw);
    };
    pc.draw_state = [km, n](Rng& rng) -> std::shared_ptr<const void> {
        auto sample = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
        for (auto& x : *sample) x = km.sample_base(rng);
        return sample;
    };
    pc.dw_given_state = [probe_dw](const void* state, Rng& rng, std::span<double> dw) {
        probe_dw(*static_cast<const std::vector<double>*>(state), rng, dw);
    };
    if (km.support && km.has_conditionals()) {
        // exact E[dW_k dW_l | X]: average the one-coordinate redraw over the
        // uniform index and the finite support of the replacement
        pc.draw_cond_products = [km, n, d, wscale](Rng& rng, std::span<double> prods) {
            std::vector<double> sample(static_cast<std::size_t>(n));
            for (auto& x : sample) x = km.sample_base(rng);
            std::vector<double> du(static_cast<std::size_t>(d));
            std::vector<double> acc(static_cast<std::size_t>(d) * static_cast<std::size_t>(d), 0.0);
            for (int j = 0; j < n; ++j) {
                const double x_old = sample[static_cast<std::size_t>(j)];
                for (std::size_t v = 0; v < km.support->values.size(); ++v) {
                    const double x_new = km.support->values[v];
                    const double w = km.support->probs[v];
                    if (x_new == x_old) {
                        continue;  // zero increment contributes nothing
                    }
                    for (int k = 1; k <= d; ++k)
                        du[static_cast<std::size_t>(k - 1)] =
                            delta_u_level(sample, km, k, j, x_old, x_new);
                    for (int a = 0; a < d; ++a)
                        for (int b = 0; b < d; ++b)
                            acc[static_cast<std::size_t>(a) * static_cast<std::size_t>(d) + static_cast<std::size_t>(b)] +=
                                w * du[static_cast<std::size_t>(a)] * du[static_cast<std::size_t>(b)];
                }
            }
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    prods[static_cast<std::size_t>(a) * static_cast<std::size_t>(d) + static_cast<std::size_t>(b)] =
                        acc[static_cast<std::size_t>(a) * static_cast<std::size_t>(d) + static_cast<std::size_t>(b)] /
                        n * wscale[static_cast<std::size_t>(a)] * wscale[static_cast<std::size_t>(b)];
        };
    }
    return pc;
}

}  // namespace steinembed::ustats
