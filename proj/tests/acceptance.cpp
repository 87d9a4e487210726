// Acceptance suite: one line per criterion, exit 0 iff everything passes.
// Run via ctest or directly:  acceptance [--cli path/to/stein-embed]

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "helpers.hpp"
#include "json.hpp"
#include "steinembed/chaos.hpp"
#include "steinembed/graphs.hpp"
#include "steinembed/matlite.hpp"
#include "steinembed/mc.hpp"
#include "steinembed/report.hpp"
#include "steinembed/stein.hpp"
#include "steinembed/ustats.hpp"

using namespace steinembed;

namespace {

int failures = 0;

void line(int criterion, bool pass, const std::string& what) {
    std::printf("%s  criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, what.c_str());
    if (!pass) ++failures;
}

void line_extra(bool pass, const std::string& what) {
    std::printf("%s  extra       : %s\n", pass ? "PASS" : "FAIL", what.c_str());
    if (!pass) ++failures;
}

double rel_gap(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

// 1. enumeration oracle vs closed-form moments on the full desk-scale grid
void criterion1() {
    Timer timer;
    double worst = 0.0;
    for (int n : {4, 5, 6}) {
        for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const graphs::GraphModel model(n, p);
            const auto e = graphs::enumerate_exact(model);
            const auto f = graphs::exact_moments(model);
            worst = std::max({worst, rel_gap(e.mean_t, f.mean_t), rel_gap(e.mean_v, f.mean_v),
                              rel_gap(e.mean_u, f.mean_u)});
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    worst = std::max(worst, rel_gap(e.cov_raw(i, j), f.cov_raw(i, j)));
                    worst = std::max(worst, rel_gap(e.sigma1(i, j), f.sigma1(i, j)));
                }
        }
    }
    const double secs = timer.seconds();
    line(1, worst <= 1e-10 && secs < 10.0,
         "moment oracle: enumeration vs closed forms over {4,5,6}x{.1,.3,.5,.7,.9}, max rel gap " +
             fmt(worst) + ", " + fmt(secs) + " s");
}

// 2. remainder-free linearity per sample
void criterion2() {
    Timer timer;
    double worst = 0.0;
    Rng rng(1001);
    for (int n : {5, 10, 20}) {
        for (double p : {0.1, 0.5, 0.9}) {
            const graphs::GraphModel model(n, p);
            for (int rep = 0; rep < 1000; ++rep) {
                const auto res = graphs::cond_mean_identity(graphs::sample(model, rng), model);
                for (double v : res.residual) worst = std::max(worst, std::abs(v) / res.scale);
            }
        }
    }
    const double secs = timer.seconds();
    line(2, worst <= 1e-12 && secs < 5.0,
         "linearity E[W'-W|G] == -Lambda W1 over 9000 graphs, max scaled residual " + fmt(worst) +
             ", " + fmt(secs) + " s");
}

// 3. Lambda Sigma == Sigma Lambda^t and the pair second-moment identity
void criterion3() {
    const graphs::GraphModel model(10, 0.5);
    const auto m = graphs::exact_moments(model);
    const auto lambda = graphs::lambda_graph(model);
    const double cons =
        stein::consistency_check(lambda, m.sigma1) / std::max(1.0, matlite::supnorm(m.sigma1));
    const auto z = stein::pair_second_moment_z(graphs::pair_coupling(model).draw_dw, lambda,
                                               m.sigma1, 100000, 1003);
    const double zmax = matlite::supnorm(z);
    line(3, cons <= 1e-12 && zmax <= 4.0,
         "structural identities: scaled supnorm(L S - S L^t) = " + fmt(cons) +
             ", E(dW)(dW)^t vs 2 S L^t max |z| = " + fmt(zmax) + " on 1e5 pairs");
}

// 4. third absolute moments of the pair increments
void criterion4() {
    bool ok = true;
    std::string detail;

    // the closed forms are pinned against exhaustive per-edge averaging
    {
        const auto closed = graphs::third_moments_exact(graphs::GraphModel(4, 0.5));
        const auto enumerated = graphs::enumerate_exact(graphs::GraphModel(4, 0.5)).third_abs;
        const std::array<double, 3> frozen{0.5, 7.0, 0.4375};
        for (int i = 0; i < 3; ++i) {
            ok = ok && rel_gap(closed[static_cast<std::size_t>(i)],
                               enumerated[static_cast<std::size_t>(i)]) <= 1e-10;
            ok = ok && std::abs(closed[static_cast<std::size_t>(i)] -
                                frozen[static_cast<std::size_t>(i)]) <= 1e-12;
        }
    }
    for (const auto& [n, p] : std::vector<std::pair<int, double>>{{4, 0.5}, {10, 0.3}}) {
        const graphs::GraphModel model(n, p);
        const auto closed = graphs::third_moments_exact(model);
        const auto direct = graphs::third_moments_binomial(model);
        for (int i = 0; i < 3; ++i)
            ok = ok && rel_gap(closed[static_cast<std::size_t>(i)],
                               direct[static_cast<std::size_t>(i)]) <= 1e-11;

        auto draw = [model](Rng& rng, std::span<double> out) {
            graphs::Graph gr = graphs::sample(model, rng);
            graphs::CountVector c = graphs::count(gr);
            const auto st = graphs::pair_step(gr, c, model, rng);
            out[0] = std::abs(static_cast<double>(st.dt));
            out[1] = std::pow(std::abs(static_cast<double>(st.dv)), 3);
            out[2] = std::pow(std::abs(static_cast<double>(st.du)), 3);
        };
        const auto est = mc::estimate_vec(draw, 3, 400000, 1004 + n);
        double zmax = 0.0;
        for (int i = 0; i < 3; ++i) {
            const auto& e = est[static_cast<std::size_t>(i)];
            if (e.stderr_ > 0.0)
                zmax = std::max(zmax,
                                std::abs(e.mean - closed[static_cast<std::size_t>(i)]) / e.stderr_);
        }
        ok = ok && zmax <= 4.0;
        detail += " (" + std::to_string(n) + "," + fmt(p) + ") max|z|=" + fmt(zmax);
    }
    line(4, ok,
         "third moments E|T'-T|^3, E|V'-V|^3, E|U'-U|^3: MC vs closed forms" + detail +
             "; targets (0.5, 7, 0.4375) at (4,.5) fixed by exhaustive per-edge averaging "
             "and an independent binomial-moment route");
}

// 5. closed-form bound dominates the measured smooth-function discrepancy
void criterion5() {
    Timer timer;
    bool ok = true;
    std::string detail;
    const auto h = mc::test_function_by_name("cos111", 3);
    const double prop10 = graphs::prop_bound(10, h.bounds);
    ok = ok && std::abs(prop10 - 1.261) <= 2e-3;  // printed-formula substitution
    for (int n : {10, 20}) {
        const graphs::GraphModel model(n, 0.5);
        const auto m = graphs::exact_moments(model);
        const double bound = graphs::prop_bound(n, h.bounds);
        const auto disc = mc::discrepancy(h, graphs::w1_sampler(model),
                                          matlite::sym_sqrt(m.sigma1), 1000000, 1005 + n);
        ok = ok && std::abs(disc.mean) <= bound + 4.0 * disc.stderr_;
        detail += " n=" + std::to_string(n) + ": |" + fmt(disc.mean) + "| <= " + fmt(bound) +
                  "+4*" + fmt(disc.stderr_) + ";";
    }
    const double secs = timer.seconds();
    ok = ok && secs < 60.0;
    line(5, ok,
         "bound domination, h = cos(x1+x2+x3), 1e6 samples:" + detail + " prop(10) = " +
             fmt(prop10) + ", " + fmt(secs) + " s");
}

// 6. covariance perturbation series and the rank-1 spectrum
void criterion6() {
    bool ok = true;
    double worst_margin = 0.0;
    for (int n : {10, 100}) {
        for (double p : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
            const auto m = graphs::exact_moments(graphs::GraphModel(n, p));
            const double lhs = stein::cov_perturbation_bound(m.sigma1, m.sigma0, 1.0);
            const double nd = n;
            const double rhs = 0.5 * (26.0 / nd + 3.0 / (nd * nd) + 32.0 / (nd * nd * nd) +
                                      4.0 / (nd * nd * nd * nd));
            ok = ok && lhs <= rhs;
            worst_margin = std::max(worst_margin, lhs / rhs);

            const auto ev = matlite::psd_eigencheck(m.sigma0);
            const double c = 0.5 * p * (1.0 - p);
            const double top = c * (1.0 + 4.0 * p * p + std::pow(p, 4));
            ok = ok && std::abs(ev[0]) <= 1e-12 && std::abs(ev[1]) <= 1e-12 &&
                 std::abs(ev[2] - top) <= 1e-12;
        }
    }
    line(6, ok,
         "covariance perturbation: (1/2) sum|sigma1-sigma0| within the n^-1 series "
         "(worst ratio " +
             fmt(worst_margin) + "), sigma0 spectrum (c|v|^2, 0, 0) to 1e-12");
}

// 7. U-statistic conditional-expectation identity and Lambda closed forms
void criterion7() {
    namespace fs = std::filesystem;
    const std::string table = (fs::temp_directory_path() / "se_acceptance_kernel.txt").string();
    test_helpers::write_mix_table(table);

    bool ok = true;
    double worst = 0.0;
    Rng rng(1007);
    std::vector<ustats::KernelModel> kernels;
    kernels.push_back(ustats::make_pm1_kernel());
    kernels.push_back(ustats::make_samplevar_kernel());
    kernels.push_back(ustats::load_kernel_table(table));
    for (const auto& km : kernels) {
        for (int n : {4, 10, 50}) {
            for (int rep = 0; rep < 1000 / 3 + 1; ++rep) {
                std::vector<double> sample(static_cast<std::size_t>(n));
                for (auto& x : sample) x = km.sample_base(rng);
                const auto res = ustats::cond_identity_residual(sample, km);
                for (int k = 0; k < km.order; ++k)
                    worst = std::max(worst, std::abs(res.residual[static_cast<std::size_t>(k)]) /
                                                res.scale[static_cast<std::size_t>(k)]);
            }
        }
    }
    ok = ok && worst <= 1e-12;

    for (int n : {4, 10, 50}) {
        const int d = 2;
        const auto inv = matlite::lower_inverse(ustats::lambda_ustat(n, d));
        for (int k = 1; k <= d; ++k)
            for (int l = 1; l <= k; ++l)
                ok = ok && std::abs(inv(k - 1, l - 1) - static_cast<double>(n) / l) <= 1e-12 * n;
        const auto cols = matlite::lambda_colsums(inv);
        for (int l = 1; l <= d; ++l) {
            ok = ok && rel_gap(cols[static_cast<std::size_t>(l - 1)],
                               static_cast<double>(d - l + 1) * n / l) <= 1e-13;
            ok = ok && cols[static_cast<std::size_t>(l - 1)] <= static_cast<double>(d) * n + 1e-9;
        }
    }
    line(7, ok,
         "replace-one identity E[U'_k-U_k|X] == -(k/n)U_k + ((n-k+1)/n)U_{k-1} over built-in and "
         "table kernels, n in {4,10,50}, max scaled residual " +
             fmt(worst) + "; (Lambda^-1)_{k,l} == n/l and lambda^(l) <= d n");
}

// 8. fourth-moment theorem bound dominates at n = 100
void criterion8() {
    const auto km = ustats::make_pm1_kernel();
    const double rho = ustats::exact_rho_enumerated(km);
    const auto h = mc::test_function_by_name("cos11", 2);
    const double bound = ustats::thm_bound(100, 2, rho, h.bounds);
    const auto sig = ustats::exact_sigma_enumerated(km, 16);  // Sigma is n-independent here
    const auto disc = mc::discrepancy(h, ustats::w_sampler(km, 100), matlite::sym_sqrt(sig.sigma),
                                      1000000, 1008);
    const bool ok = rho == 0.5 && std::abs(bound - 25.713) <= 1e-3 &&
                    std::abs(disc.mean) <= bound + 4.0 * disc.stderr_;
    line(8, ok,
         "theorem bound domination: rho = " + fmt(rho) + " by enumeration, bound = " + fmt(bound) +
             ", |discrepancy| = " + fmt(std::abs(disc.mean)) + " on 1e6 samples (large slack expected)");
}

// 9. multilinear embedding identity and the diagonal Lambda
void criterion9() {
    bool ok = true;
    double worst = 0.0;
    Rng rng(1009);
    for (int d : {2, 4, 8}) {
        for (int rep = 0; rep < 334; ++rep) {
            const auto coeffs = test_helpers::random_coeffs(d, rng);
            const chaos::BaseLaw base{chaos::BaseLawKind::rademacher};
            std::vector<double> x(static_cast<std::size_t>(d));
            for (auto& v : x) v = base.sample(rng);
            const auto res = chaos::cond_identity_residual(x, coeffs);
            for (int k = 0; k < d; ++k)
                worst = std::max(worst, std::abs(res.residual[static_cast<std::size_t>(k)]) /
                                            res.scale[static_cast<std::size_t>(k)]);
        }
        const auto lam = chaos::lambda_chaos(d);
        for (int i = 0; i < d; ++i) {
            ok = ok && lam(i, i) == static_cast<double>(i + 1) / d;
            for (int j = 0; j < i; ++j) ok = ok && lam(i, j) == 0.0;
        }
        ok = ok && lam(0, 0) != lam(d - 1, d - 1);  // unequal diagonal
    }
    ok = ok && worst <= 1e-12;
    line(9, ok,
         "chaos identity E(J'_n - J_n | x) == -(n/d) J_n over 10^3 random (x, coefficients), "
         "d in {2,4,8}, max scaled residual " +
             fmt(worst) + "; Lambda = diag(n/d) with unequal entries");
}

// 10. rank-1 limiting covariance of the +-1 kernel at n = 2000
void criterion10() {
    const auto km = ustats::make_pm1_kernel();
    const auto est = ustats::estimate_sigma(km, 2000, 100000, 1010);
    // target k*l*Var psi_1 with Var psi_1 = 1/4
    const double target[2][2] = {{0.25, 0.5}, {0.5, 1.0}};
    double zmax = 0.0, z_uniform = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double se = est.stderr_(i, j);
            if (se > 0.0) {
                zmax = std::max(zmax, std::abs(est.sigma(i, j) - target[i][j]) / se);
                z_uniform = std::max(z_uniform, std::abs(est.sigma(i, j) - 0.25) / se);
            }
        }
    const bool ok = zmax <= 4.0 && z_uniform > 4.0;
    line(10, ok,
         "rank-1 limit Sigma at n = 2000: max |z| = " + fmt(zmax) +
             " against (k*l/4)_{k,l}; flagged: the uniform-entry form (all 1/4) is rejected by "
             "the same data (max |z| = " +
             fmt(z_uniform) + ")");
}

// 11. infrastructure: PSD square roots and bit-identical seeded reports
void criterion11(const std::string& cli) {
    bool ok = true;

    Rng rng(1011);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 1 + static_cast<int>(rng.below(6));
        matlite::Mat a(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) a(i, j) = 2.0 * rng.uniform() - 1.0;
        const auto s = matlite::SymMatrix::from_full(a.transposed() * a, 1e-9);
        const auto r = matlite::sym_sqrt(s);
        worst = std::max(worst, matlite::supnorm(r.mat() * r.mat() - s.mat()) /
                                    (1.0 + matlite::supnorm(s)));
    }
    for (double p : {0.1, 0.5, 0.9}) {
        const auto s0 = graphs::sigma0_matrix(p);
        const auto r = matlite::sym_sqrt(s0);
        worst = std::max(worst, matlite::supnorm(r.mat() * r.mat() - s0.mat()) /
                                    (1.0 + matlite::supnorm(s0)));
    }
    ok = ok && worst <= 1e-10;

    std::string repro = "skipped (no --cli path)";
    if (!cli.empty()) {
        auto run = [&cli](int threads) {
            const std::string cmd = cli +
                                    " graph-verify --n 8 --p 0.4 --samples 30000 --seed 99 "
                                    "--threads " +
                                    std::to_string(threads) + " --no-timestamp 2>/dev/null";
            std::string out;
            if (FILE* pipe = popen(cmd.c_str(), "r")) {
                char buf[4096];
                std::size_t got;
                while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
                pclose(pipe);
            }
            return out;
        };
        const std::string a = run(1), b = run(4);
        const bool same = !a.empty() && a == b;
        ok = ok && same;
        repro = same ? "CLI reports byte-identical for --threads 1 vs 4"
                     : "CLI reports DIFFER across worker counts";
    }
    line(11, ok,
         "infrastructure: sym_sqrt round-trip worst scaled error " + fmt(worst) +
             " over 10^3 random PSD + rank-deficient limits; " + repro);
}

// CLI conformance: seed precedence, formats, exit codes, verdict round trip
void cli_conformance(const std::string& cli) {
    if (cli.empty()) {
        std::printf("INFO  cli conformance skipped (no --cli path)\n");
        return;
    }
    struct Result {
        std::string out;
        int code = -1;
    };
    auto run = [](const std::string& cmd) {
        Result r;
        if (FILE* pipe = popen((cmd + " 2>/dev/null").c_str(), "r")) {
            char buf[4096];
            std::size_t got;
            while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
            const int status = pclose(pipe);
            r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        }
        return r;
    };
    bool ok = true;
    std::string why;

    const auto env_seed =
        run("STEIN_EMBED_SEED=123 " + cli +
            " stein-eval --abc 0 0 0 --h1 0 --h2 0 --h3 0 --d 1 --signorm 1 --no-timestamp");
    if (env_seed.out.find("\"seed\": 123") == std::string::npos) {
        ok = false;
        why += " env-seed;";
    }
    const auto flag_seed =
        run("STEIN_EMBED_SEED=123 " + cli +
            " stein-eval --abc 0 0 0 --h1 0 --h2 0 --h3 0 --d 1 --signorm 1 --seed 77 "
            "--no-timestamp");
    if (flag_seed.out.find("\"seed\": 77") == std::string::npos) {
        ok = false;
        why += " flag-beats-env;";
    }

    const auto csv = run(cli + " graph-moments --n 5 --p 0.3 --format csv --no-timestamp");
    if (csv.code != 0 ||
        csv.out.rfind("name,kind,value,target,stderr,tolerance,pass,provenance", 0) != 0) {
        ok = false;
        why += " csv;";
    }

    const auto usage = run(cli + " graph-verify --p 0.5");
    if (usage.code != 2) {
        ok = false;
        why += " usage-exit;";
    }
    const auto unknown = run(cli + " no-such-command");
    if (unknown.code != 2) {
        ok = false;
        why += " unknown-exit;";
    }

    // verdicts recorded in the JSON can be re-derived from the numbers
    const auto rep = run(cli + " graph-moments --n 4 --p 0.5 --enumerate --no-timestamp");
    bool roundtrip = rep.code == 0;
    try {
        const auto j = nlohmann::ordered_json::parse(rep.out);
        roundtrip = roundtrip && j.at("schema") == "stein-embed/1";
        bool all = true;
        for (const auto& cj : j.at("checks")) {
            const auto c = report::Check::from_json(cj);
            roundtrip = roundtrip && (c.pass == c.recompute_pass());
            all = all && c.pass;
        }
        roundtrip = roundtrip && (j.at("pass").get<bool>() == all);
    } catch (...) {
        roundtrip = false;
    }
    if (!roundtrip) {
        ok = false;
        why += " json-roundtrip;";
    }

    line_extra(ok, ok ? "cli conformance: seed precedence, csv projection, exit codes, "
                        "json verdict round-trip"
                      : "cli conformance failed:" + why);
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--cli") cli = argv[i + 1];

    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    criterion11(cli);
    cli_conformance(cli);

    if (failures == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criterion(s) FAILED\n", failures);
    return 1;
}
