#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "steinembed/chaos.hpp"
#include "steinembed/rng.hpp"
#include "steinembed/ustats.hpp"

namespace test_helpers {

// Order-2 kernel with projection and degenerate parts on {-1, 0, 1}:
// psi(x, y) = x y + (x + y)/2, psi_1(x) = x/2. Centered, symmetric,
// non-degenerate, and psi(0, 0) = 0.
inline steinembed::ustats::KernelModel mix_kernel() {
    steinembed::ustats::KernelModel km;
    km.name = "mix";
    km.order = 2;
    km.psi = [](std::span<const double> x) { return x[0] * x[1] + 0.5 * (x[0] + x[1]); };
    km.cond = {[](std::span<const double> x) { return 0.5 * x[0]; }, km.psi};
    km.support = steinembed::ustats::SupportTable{{-1.0, 0.0, 1.0}, {0.3, 0.4, 0.3}};
    km.sample_base = [](steinembed::Rng& rng) {
        const double u = rng.uniform();
        return u < 0.3 ? -1.0 : (u < 0.7 ? 0.0 : 1.0);
    };
    return km;
}

// The same kernel as a loadable text table.
inline void write_mix_table(const std::string& path) {
    std::ofstream f(path);
    f << "2 3\n-1 0.3\n0 0.4\n1 0.3\n";
    const double vals[3] = {-1.0, 0.0, 1.0};
    for (double x : vals)
        for (double y : vals) f << (x * y + 0.5 * (x + y)) << "\n";
}

inline steinembed::chaos::ChaosCoeffs random_coeffs(int d, steinembed::Rng& rng,
                                                    double keep_prob = 0.6) {
    steinembed::chaos::ChaosCoeffs c(d);
    std::vector<int> idx;
    // random sparse subset of all increasing tuples, guaranteeing at least
    // one term per order
    for (int n = 1; n <= d; ++n) {
        bool added = false;
        idx.assign(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        for (;;) {
            if (rng.uniform() < keep_prob) {
                c.add(idx, 2.0 * rng.uniform() - 1.0);
                added = true;
            }
            int i = n - 1;
            while (i >= 0 && idx[static_cast<std::size_t>(i)] == d - n + i) --i;
            if (i < 0) break;
            ++idx[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < n; ++j)
                idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
        if (!added) {
            idx.assign(static_cast<std::size_t>(n), 0);
            for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
            c.add(idx, 1.0);
        }
    }
    return c;
}

}  // namespace test_helpers
