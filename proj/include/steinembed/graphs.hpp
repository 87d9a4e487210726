#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "steinembed/matlite.hpp"
#include "steinembed/mc.hpp"
#include "steinembed/rng.hpp"
#include "steinembed/stein.hpp"

// Joint edge / 2-star / triangle counts in Bernoulli random graphs: sampling,
// exact moments, the edge-resampling exchangeable pair with its exact Lambda
// (remainder-free), per-sample conditional statistics, third moments of the
// pair increments, the closed-form approximation bounds, and an exhaustive
// enumeration oracle for tiny n.

namespace steinembed::graphs {

struct TooLarge : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GraphModel {
    int n;
    double p;
    GraphModel(int n_, double p_) : n(n_), p(p_) {
        if (n < 4) throw std::invalid_argument("GraphModel: n must be >= 4");
        if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("GraphModel: p must be in (0,1)");
    }
    long long pair_count() const { return static_cast<long long>(n) * (n - 1) / 2; }
};

// Undirected simple graph, adjacency kept as bit rows for word-parallel
// common-neighbour counts.
class Graph {
public:
    explicit Graph(int n);

    int order() const { return n_; }
    bool edge(int i, int j) const {
        return (rows_[static_cast<std::size_t>(i) * words_ + static_cast<std::size_t>(j) / 64] >>
                (static_cast<unsigned>(j) % 64)) & 1u;
    }
    void set_edge(int i, int j, bool present);
    int degree(int i) const;
    // |N(i) & N(j)|; i and j never count themselves (zero diagonal)
    int common_neighbours(int i, int j) const;
    std::span<const std::uint64_t> row(int i) const {
        return {rows_.data() + static_cast<std::size_t>(i) * words_, words_};
    }

private:
    int n_;
    std::size_t words_;
    std::vector<std::uint64_t> rows_;
};

struct CountVector {
    long long t = 0;  // edges
    long long v = 0;  // 2-stars
    long long u = 0;  // triangles
};

struct ScaledCounts {
    double t1 = 0.0, v1 = 0.0, u1 = 0.0;
    std::array<double, 3> to_array() const { return {t1, v1, u1}; }
};

Graph sample(const GraphModel& model, Rng& rng);
CountVector count(const Graph& g);

// per-coordinate rescale factors ((n-2)/n^2, 1/n^2, 1/n^2)
std::array<double, 3> scale_factors(int n);
// centered, rescaled counts (the W_1 vector)
ScaledCounts rescale(const CountVector& c, const GraphModel& model);

struct Moments {
    double mean_t = 0.0, mean_v = 0.0, mean_u = 0.0;
    matlite::SymMatrix cov_raw;     // covariance of (T, V, U)
    matlite::SymMatrix sigma1;      // covariance of the rescaled vector
    matlite::SymMatrix sigma0;      // rank-1 large-n limit
    Moments() : cov_raw(3), sigma1(3), sigma0(3) {}
};

// Closed-form moments: means, raw covariances, Sigma_1 and Sigma_0.
Moments exact_moments(const GraphModel& model);

matlite::SymMatrix sigma0_matrix(double p);

struct EnumeratedMoments {
    double mean_t = 0.0, mean_v = 0.0, mean_u = 0.0;
    matlite::SymMatrix cov_raw;
    matlite::SymMatrix sigma1;
    // E|T'-T|^3, E|V'-V|^3, E|U'-U|^3 by exact per-edge averaging
    std::array<double, 3> third_abs;
    // E (dW)(dW)^t of the rescaled pair increment (for the identity checks)
    matlite::Mat pair_second_moment;
    EnumeratedMoments() : cov_raw(3), sigma1(3), pair_second_moment(3) {}
};

// Exhaustive expectation over all 2^C(n,2) graphs; n <= 6 only.
EnumeratedMoments enumerate_exact(const GraphModel& model);

// Lambda of the edge-resampling pair: (1/C(n,2)) [[1,0,0],[-2p,2,0],[0,-p,3]].
matlite::LowerMatrix lambda_graph(const GraphModel& model);

struct PairStep {
    int i = 0, j = 0;      // resampled vertex pair
    bool before = false, after = false;
    // raw count increments (T, V, U)
    long long dt = 0, dv = 0, du = 0;
};

// Redraw one uniformly chosen potential edge; counts are updated in place in
// O(n/64) words.
PairStep pair_step(Graph& g, CountVector& c, const GraphModel& model, Rng& rng);

// Closed-form E[(T',V',U') - (T,V,U) | g] in raw coordinates:
// ( p - T/C , (2p(n-2)T - 2V)/C , (pV - 3U)/C ) with C = C(n,2).
std::array<double, 3> cond_mean(const Graph& g, const GraphModel& model);

// Residual of the linearity identity: rescaled cond_mean + Lambda W_1,
// together with the magnitude scale the roundoff should be measured against.
struct IdentityResidual {
    std::array<double, 3> residual;
    double scale = 1.0;
};
IdentityResidual cond_mean_identity(const Graph& g, const GraphModel& model);

// Per-sample conditional pair products E[dX dY | g] in raw coordinates,
// computed by exact summation over all C(n,2) potential edges with weight
// p + (1-2p) I_ij. The (T,T) entry equals p + (1-2p) T / C(n,2) exactly.
matlite::SymMatrix cond_products(const Graph& g, const GraphModel& model);

// Exact closed forms for E|T'-T|^3, E|V'-V|^3, E|U'-U|^3. The V and U values
// are the third moments of binomial sums (2(n-2) indicators at the endpoints,
// n-2 common-neighbour indicators) times E|I'-I| = 2p(1-p).
std::array<double, 3> third_moments_exact(const GraphModel& model);

// Same quantities via direct binomial moment sums, an independent route used
// to cross-check the polynomial closed forms.
std::array<double, 3> third_moments_binomial(const GraphModel& model);

// (|h|2/n)(35/4 + 9/n) + (8|h|3/(3n))(1 + 1/n + 1/n^2)
double prop_bound(int n, const stein::DerivBounds& db);
// (|h|2/(2n))(44 + 21/n + 32/n^2 + 4/n^3) + (8|h|3/(3n))(1 + 1/n + 1/n^2)
double corollary_bound(int n, const stein::DerivBounds& db);

// Samplers and the exchangeable-pair coupling in rescaled coordinates.
mc::VectorSampler w1_sampler(const GraphModel& model);
mc::PairCoupling pair_coupling(const GraphModel& model);

// Whitespace edge list: header "n m", then m lines "i j" (0-based).
Graph read_edge_list(std::istream& in);
void write_edge_list(const Graph& g, std::ostream& out);
Graph load_edge_list(const std::string& path);
void save_edge_list(const Graph& g, const std::string& path);

}  // namespace steinembed::graphs
