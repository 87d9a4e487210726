#include "steinembed/graphs.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace steinembed::graphs {

Graph::Graph(int n) : n_(n), words_(static_cast<std::size_t>(n + 63) / 64) {
    if (n < 3) throw std::invalid_argument("Graph: need at least 3 vertices");
    rows_.assign(static_cast<std::size_t>(n) * words_, 0);
}

void Graph::set_edge(int i, int j, bool present) {
    if (i == j) throw std::invalid_argument("Graph::set_edge: no self loops");
    auto apply = [&](int a, int b) {
        auto& w = rows_[static_cast<std::size_t>(a) * words_ + static_cast<std::size_t>(b) / 64];
        const std::uint64_t bit = 1ull << (static_cast<unsigned>(b) % 64);
        if (present)
            w |= bit;
        else
            w &= ~bit;
    };
    apply(i, j);
    apply(j, i);
}

int Graph::degree(int i) const {
    int d = 0;
    for (std::size_t w = 0; w < words_; ++w)
        d += std::popcount(rows_[static_cast<std::size_t>(i) * words_ + w]);
    return d;
}

int Graph::common_neighbours(int i, int j) const {
    const std::uint64_t* a = rows_.data() + static_cast<std::size_t>(i) * words_;
    const std::uint64_t* b = rows_.data() + static_cast<std::size_t>(j) * words_;
    int c = 0;
    for (std::size_t w = 0; w < words_; ++w) c += std::popcount(a[w] & b[w]);
    return c;
}

Graph sample(const GraphModel& model, Rng& rng) {
    Graph g(model.n);
    for (int i = 0; i < model.n; ++i)
        for (int j = i + 1; j < model.n; ++j)
            if (rng.bernoulli(model.p)) g.set_edge(i, j, true);
    return g;
}

CountVector count(const Graph& g) {
    const int n = g.order();
    CountVector c;
    long long degsum = 0;
    for (int i = 0; i < n; ++i) {
        const long long d = g.degree(i);
        degsum += d;
        c.v += d * (d - 1) / 2;
    }
    c.t = degsum / 2;
    long long triple = 0;  // sum over edges of common neighbours = 3U
    for (int i = 0; i < n; ++i) {
        auto row = g.row(i);
        for (std::size_t w = 0; w < row.size(); ++w) {
            std::uint64_t bits = row[w];
            while (bits != 0) {
                const int j = static_cast<int>(w) * 64 + std::countr_zero(bits);
                bits &= bits - 1;
                if (j <= i) continue;
                triple += g.common_neighbours(i, j);
            }
        }
    }
    c.u = triple / 3;

    const long long pairs = static_cast<long long>(n) * (n - 1) / 2;
    const long long triples = static_cast<long long>(n) * (n - 1) * (n - 2) / 6;
    if (c.t > pairs || c.u > triples || c.v > static_cast<long long>(n - 2) * c.t || 3 * c.u > c.v)
        throw std::logic_error("count: counting invariant violated");
    return c;
}

std::array<double, 3> scale_factors(int n) {
    const double n2 = static_cast<double>(n) * n;
    return {static_cast<double>(n - 2) / n2, 1.0 / n2, 1.0 / n2};
}

ScaledCounts rescale(const CountVector& c, const GraphModel& model) {
    const auto m = exact_moments(model);
    const auto s = scale_factors(model.n);
    return ScaledCounts{(static_cast<double>(c.t) - m.mean_t) * s[0],
                        (static_cast<double>(c.v) - m.mean_v) * s[1],
                        (static_cast<double>(c.u) - m.mean_u) * s[2]};
}

namespace {

double binom2(int n) { return 0.5 * n * (n - 1); }
double binom3(int n) { return n * (n - 1.0) * (n - 2.0) / 6.0; }

}  // namespace

matlite::SymMatrix sigma0_matrix(double p) {
    const double c = 0.5 * p * (1.0 - p);
    const double v[3] = {1.0, 2.0 * p, p * p};
    matlite::SymMatrix s0(3);
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) s0.set(i, j, c * v[i] * v[j]);
    return s0;
}

Moments exact_moments(const GraphModel& model) {
    const int n = model.n;
    const double p = model.p, q = 1.0 - p;
    Moments m;
    m.mean_t = binom2(n) * p;
    m.mean_v = 3.0 * binom3(n) * p * p;
    m.mean_u = binom3(n) * p * p * p;

    const double var_t = binom2(n) * p * q;
    const double var_v = 3.0 * binom3(n) * p * p * q * (q + 4.0 * (n - 2) * p);
    const double var_u = binom3(n) * p * p * p * q * (q * q + 3.0 * p * q + 3.0 * (n - 2) * p * p);
    const double cov_tv = 6.0 * binom3(n) * p * p * q;
    const double cov_tu = 3.0 * binom3(n) * p * p * p * q;
    const double cov_vu = 3.0 * binom3(n) * p * p * p * q * (q + 2.0 * (n - 2) * p);
    m.cov_raw.set(0, 0, var_t);
    m.cov_raw.set(1, 1, var_v);
    m.cov_raw.set(2, 2, var_u);
    m.cov_raw.set(0, 1, cov_tv);
    m.cov_raw.set(0, 2, cov_tu);
    m.cov_raw.set(1, 2, cov_vu);

    const double n4 = std::pow(static_cast<double>(n), 4);
    const double pre = 3.0 * (n - 2) * binom3(n) / n4 * p * q;
    const double a = p * q / (n - 2);
    m.sigma1.set(0, 0, pre);
    m.sigma1.set(0, 1, pre * 2.0 * p);
    m.sigma1.set(0, 2, pre * p * p);
    m.sigma1.set(1, 1, pre * (4.0 * p * p + a));
    m.sigma1.set(1, 2, pre * (2.0 * p * p * p + p * a));
    m.sigma1.set(2, 2, pre * (std::pow(p, 4) + p * p * (1.0 + p - 2.0 * p * p) / (3.0 * (n - 2))));

    m.sigma0 = sigma0_matrix(p);
    return m;
}

EnumeratedMoments enumerate_exact(const GraphModel& model) {
    const int n = model.n;
    if (n > 6) throw TooLarge("enumerate_exact: n must be <= 6");
    const int edges = static_cast<int>(model.pair_count());
    const double p = model.p;

    // potential edge list in the fixed (i<j) order used by the bitmask
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(edges));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

    EnumeratedMoments out;
    double mean[3] = {0, 0, 0};
    double second[3][3] = {{0}};
    double third[3] = {0, 0, 0};
    double psm[3][3] = {{0}};

    int adj[6][6];
    int deg[6];
    for (std::uint32_t mask = 0; mask < (1u << edges); ++mask) {
        for (int i = 0; i < n; ++i) {
            deg[i] = 0;
            for (int j = 0; j < n; ++j) adj[i][j] = 0;
        }
        int t = 0;
        for (int e = 0; e < edges; ++e)
            if (mask >> e & 1) {
                const auto [i, j] = pairs[static_cast<std::size_t>(e)];
                adj[i][j] = adj[j][i] = 1;
                ++deg[i];
                ++deg[j];
                ++t;
            }
        long long v = 0, u = 0;
        for (int i = 0; i < n; ++i) v += static_cast<long long>(deg[i]) * (deg[i] - 1) / 2;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                for (int k = j + 1; k < n; ++k) u += adj[i][j] * adj[j][k] * adj[i][k];

        const double w = std::pow(p, t) * std::pow(1.0 - p, edges - t);
        const double c[3] = {static_cast<double>(t), static_cast<double>(v), static_cast<double>(u)};
        for (int a = 0; a < 3; ++a) {
            mean[a] += w * c[a];
            for (int b = 0; b < 3; ++b) second[a][b] += w * c[a] * c[b];
        }

        // exact average over the C(n,2) resampling choices
        double acc3[3] = {0, 0, 0};
        double cp[3][3] = {{0}};
        for (const auto& [i, j] : pairs) {
            const int present = adj[i][j];
            const double w3 = p + (1.0 - 2.0 * p) * present;
            int m_ij = 0;
            for (int k = 0; k < n; ++k)
                if (k != i && k != j) m_ij += adj[i][k] * adj[k][j];
            const double dvec[3] = {1.0, static_cast<double>(deg[i] + deg[j] - 2 * present),
                                    static_cast<double>(m_ij)};
            for (int a = 0; a < 3; ++a) {
                acc3[a] += w3 * std::abs(dvec[a] * dvec[a] * dvec[a]);
                for (int b = 0; b < 3; ++b) cp[a][b] += w3 * dvec[a] * dvec[b];
            }
        }
        for (int a = 0; a < 3; ++a) {
            third[a] += w * acc3[a] / edges;
            for (int b = 0; b < 3; ++b) psm[a][b] += w * cp[a][b] / edges;
        }
    }

    out.mean_t = mean[0];
    out.mean_v = mean[1];
    out.mean_u = mean[2];
    const auto s = scale_factors(n);
    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) {
            const double cov = second[a][b] - mean[a] * mean[b];
            out.cov_raw.set(a, b, cov);
            out.sigma1.set(a, b, cov * s[static_cast<std::size_t>(a)] * s[static_cast<std::size_t>(b)]);
        }
    out.third_abs = {third[0], third[1], third[2]};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            out.pair_second_moment(a, b) =
                psm[a][b] * s[static_cast<std::size_t>(a)] * s[static_cast<std::size_t>(b)];
    return out;
}

matlite::LowerMatrix lambda_graph(const GraphModel& model) {
    const double inv = 1.0 / static_cast<double>(model.pair_count());
    matlite::LowerMatrix l(3);
    l.set(0, 0, inv);
    l.set(1, 0, -2.0 * model.p * inv);
    l.set(1, 1, 2.0 * inv);
    l.set(2, 1, -model.p * inv);
    l.set(2, 2, 3.0 * inv);
    return l;
}

namespace {

std::pair<int, int> unrank_pair(int n, long long index) {
    for (int i = 0; i < n - 1; ++i) {
        const long long row = n - 1 - i;
        if (index < row) return {i, i + 1 + static_cast<int>(index)};
        index -= row;
    }
    throw std::logic_error("unrank_pair: index out of range");
}

// increments of one hypothetical edge redraw, no mutation
PairStep probe_step(const Graph& g, const GraphModel& model, Rng& rng) {
    PairStep st;
    const auto [i, j] = unrank_pair(model.n, static_cast<long long>(
                                                 rng.below(static_cast<std::uint64_t>(model.pair_count()))));
    st.i = i;
    st.j = j;
    st.before = g.edge(i, j);
    st.after = rng.bernoulli(model.p);
    const int delta = static_cast<int>(st.after) - static_cast<int>(st.before);
    if (delta != 0) {
        st.dt = delta;
        st.dv = delta * (g.degree(i) + g.degree(j) - 2 * static_cast<int>(st.before));
        st.du = delta * g.common_neighbours(i, j);
    }
    return st;
}

}  // namespace

PairStep pair_step(Graph& g, CountVector& c, const GraphModel& model, Rng& rng) {
    PairStep st = probe_step(g, model, rng);
    if (st.before != st.after) {
        g.set_edge(st.i, st.j, st.after);
        c.t += st.dt;
        c.v += st.dv;
        c.u += st.du;
    }
    return st;
}

std::array<double, 3> cond_mean(const Graph& g, const GraphModel& model) {
    const CountVector c = count(g);
    const double pc = static_cast<double>(model.pair_count());
    return {model.p - static_cast<double>(c.t) / pc,
            (2.0 * model.p * (model.n - 2) * static_cast<double>(c.t) - 2.0 * static_cast<double>(c.v)) / pc,
            (model.p * static_cast<double>(c.v) - 3.0 * static_cast<double>(c.u)) / pc};
}

IdentityResidual cond_mean_identity(const Graph& g, const GraphModel& model) {
    const auto cm = cond_mean(g, model);
    const auto s = scale_factors(model.n);
    const auto w1 = rescale(count(g), model).to_array();
    const auto lam = lambda_graph(model);

    IdentityResidual out{};
    double scale = 1.0;
    for (int i = 0; i < 3; ++i) {
        double lw = 0.0, labs = 0.0;
        for (int j = 0; j <= i; ++j) {
            lw += lam(i, j) * w1[static_cast<std::size_t>(j)];
            labs += std::abs(lam(i, j) * w1[static_cast<std::size_t>(j)]);
        }
        const double lhs = cm[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i)];
        out.residual[static_cast<std::size_t>(i)] = lhs + lw;
        scale = std::max(scale, std::abs(lhs) + labs);
    }
    out.scale = scale;
    return out;
}

matlite::SymMatrix cond_products(const Graph& g, const GraphModel& model) {
    const int n = model.n;
    const double p = model.p;
    double acc[3][3] = {{0}};
    std::vector<int> deg(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) deg[static_cast<std::size_t>(i)] = g.degree(i);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const int present = g.edge(i, j);
            const double w3 = p + (1.0 - 2.0 * p) * present;
            const double dvec[3] = {
                1.0,
                static_cast<double>(deg[static_cast<std::size_t>(i)] + deg[static_cast<std::size_t>(j)] -
                                    2 * present),
                static_cast<double>(g.common_neighbours(i, j))};
            for (int a = 0; a < 3; ++a)
                for (int b = a; b < 3; ++b) acc[a][b] += w3 * dvec[a] * dvec[b];
        }
    }
    const double pc = static_cast<double>(model.pair_count());
    matlite::SymMatrix out(3);
    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) out.set(a, b, acc[a][b] / pc);
    return out;
}

namespace {

// E S^3 for S ~ Binomial(m, q), via the factorial-moment expansion
double binomial_third_moment(long long m, double q) {
    const double md = static_cast<double>(m);
    return md * q + 3.0 * md * (md - 1.0) * q * q + md * (md - 1.0) * (md - 2.0) * q * q * q;
}

// the same moment as an explicit sum over the binomial support; each log-pmf
// comes straight from lgamma so neither underflow nor recurrence error builds up
double binomial_third_moment_direct(long long m, double q) {
    const double md = static_cast<double>(m);
    const double lgm = std::lgamma(md + 1.0);
    const double logq = std::log(q), log1mq = std::log1p(-q);
    double acc = 0.0;
    for (long long s = 1; s <= m; ++s) {
        const double sd = static_cast<double>(s);
        const double logw = lgm - std::lgamma(sd + 1.0) - std::lgamma(md - sd + 1.0) +
                            sd * logq + (md - sd) * log1mq;
        acc += std::exp(logw + 3.0 * std::log(sd));
    }
    return acc;
}

}  // namespace

std::array<double, 3> third_moments_exact(const GraphModel& model) {
    const double p = model.p;
    const double flip = 2.0 * p * (1.0 - p);  // E|I' - I|
    // |V'-V| = |I'-I| S with S ~ Bin(2(n-2), p): the endpoint edges;
    // |U'-U| = |I'-I| M with M ~ Bin(n-2, p^2): the common neighbours.
    return {flip, flip * binomial_third_moment(2LL * (model.n - 2), p),
            flip * binomial_third_moment(model.n - 2, p * p)};
}

std::array<double, 3> third_moments_binomial(const GraphModel& model) {
    const double p = model.p;
    const double flip = 2.0 * p * (1.0 - p);
    return {flip, flip * binomial_third_moment_direct(2LL * (model.n - 2), p),
            flip * binomial_third_moment_direct(model.n - 2, p * p)};
}

double prop_bound(int n, const stein::DerivBounds& db) {
    if (n < 4) throw std::invalid_argument("prop_bound: n must be >= 4");
    const double nd = static_cast<double>(n);
    return db.h2 / nd * (35.0 / 4.0 + 9.0 / nd) +
           8.0 * db.h3 / (3.0 * nd) * (1.0 + 1.0 / nd + 1.0 / (nd * nd));
}

double corollary_bound(int n, const stein::DerivBounds& db) {
    if (n < 4) throw std::invalid_argument("corollary_bound: n must be >= 4");
    const double nd = static_cast<double>(n);
    return db.h2 / (2.0 * nd) * (44.0 + 21.0 / nd + 32.0 / (nd * nd) + 4.0 / (nd * nd * nd)) +
           8.0 * db.h3 / (3.0 * nd) * (1.0 + 1.0 / nd + 1.0 / (nd * nd));
}

mc::VectorSampler w1_sampler(const GraphModel& model) {
    const Moments m = exact_moments(model);
    const auto s = scale_factors(model.n);
    mc::VectorSampler vs;
    vs.dim = 3;
    vs.draw = [model, m, s](Rng& rng, std::span<double> out) {
        const Graph g = sample(model, rng);
        const CountVector c = count(g);
        out[0] = (static_cast<double>(c.t) - m.mean_t) * s[0];
        out[1] = (static_cast<double>(c.v) - m.mean_v) * s[1];
        out[2] = (static_cast<double>(c.u) - m.mean_u) * s[2];
    };
    return vs;
}

mc::PairCoupling pair_coupling(const GraphModel& model) {
    const auto s = scale_factors(model.n);
    mc::PairCoupling pc;
    pc.dim = 3;
    pc.r_zero = true;
    pc.draw_dw = [model, s](Rng& rng, std::span<double> dw) {
        const Graph g = sample(model, rng);
        const PairStep st = probe_step(g, model, rng);
        dw[0] = static_cast<double>(st.dt) * s[0];
        dw[1] = static_cast<double>(st.dv) * s[1];
        dw[2] = static_cast<double>(st.du) * s[2];
    };
    pc.draw_cond_products = [model, s](Rng& rng, std::span<double> prods) {
        const Graph g = sample(model, rng);
        const matlite::SymMatrix cp = cond_products(g, model);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                prods[static_cast<std::size_t>(a) * 3 + b] =
                    cp(a, b) * s[static_cast<std::size_t>(a)] * s[static_cast<std::size_t>(b)];
    };
    pc.draw_state = [model](Rng& rng) -> std::shared_ptr<const void> {
        return std::make_shared<Graph>(sample(model, rng));
    };
    pc.dw_given_state = [model, s](const void* state, Rng& rng, std::span<double> dw) {
        const auto& g = *static_cast<const Graph*>(state);
        const PairStep st = probe_step(g, model, rng);
        dw[0] = static_cast<double>(st.dt) * s[0];
        dw[1] = static_cast<double>(st.dv) * s[1];
        dw[2] = static_cast<double>(st.du) * s[2];
    };
    return pc;
}

Graph read_edge_list(std::istream& in) {
    int n = 0;
    long long m = 0;
    if (!(in >> n >> m)) throw ParseError("edge list: missing 'n m' header");
    if (n < 3) throw ParseError("edge list: need at least 3 vertices");
    Graph g(n);
    std::set<std::pair<int, int>> seen;
    for (long long e = 0; e < m; ++e) {
        int i = 0, j = 0;
        if (!(in >> i >> j)) throw ParseError("edge list: expected " + std::to_string(m) + " edges");
        if (i < 0 || j < 0 || i >= n || j >= n) throw ParseError("edge list: vertex out of range");
        if (i == j) throw ParseError("edge list: self loop");
        auto key = std::minmax(i, j);
        if (!seen.insert(key).second) throw ParseError("edge list: duplicate edge");
        g.set_edge(i, j, true);
    }
    return g;
}

void write_edge_list(const Graph& g, std::ostream& out) {
    const CountVector c = count(g);
    out << g.order() << ' ' << c.t << '\n';
    for (int i = 0; i < g.order(); ++i)
        for (int j = i + 1; j < g.order(); ++j)
            if (g.edge(i, j)) out << i << ' ' << j << '\n';
}

Graph load_edge_list(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open '" + path + "'");
    return read_edge_list(f);
}

void save_edge_list(const Graph& g, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open '" + path + "' for writing");
    write_edge_list(g, f);
}

}  // namespace steinembed::graphs
