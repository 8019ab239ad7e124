#pragma once

// Independent oracles for the test suites. Everything here recomputes
// expectations from first principles (closed forms, finite differences,
// brute-force statistics) without touching the library's own code paths
// for the quantity under test.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "anerf/mlp.hpp"

namespace oracles {

// Pointers to every scalar parameter, in visit order.
inline std::vector<double*> param_entries(anerf::MlpParamsT<double>& p) {
    std::vector<double*> out;
    p.visit([&](auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) out.push_back(t.data() + i);
    });
    return out;
}

// Central finite differences of the scalar loss() at the current params.
inline std::vector<double> finite_difference_grad(anerf::MlpParamsT<double>& p,
                                                  const std::function<double()>& loss,
                                                  double h) {
    auto entries = param_entries(p);
    std::vector<double> g(entries.size());
    for (size_t i = 0; i < entries.size(); ++i) {
        double saved = *entries[i];
        *entries[i] = saved + h;
        double fp = loss();
        *entries[i] = saved - h;
        double fm = loss();
        *entries[i] = saved;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline std::vector<double> flatten_grads(const anerf::MlpParamsT<double>& g) {
    std::vector<double> out;
    g.visit([&](const auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) out.push_back(t.data()[i]);
    });
    return out;
}

// Brute-force double-precision mean and population/sample std.
inline void mean_std(std::span<const float> x, bool population, double& mean, double& sd) {
    mean = 0.0;
    for (float v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (float v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(population ? x.size() : x.size() - 1);
    sd = std::sqrt(var);
}

// Regularized lower incomplete gamma P(a, x) (series + continued fraction).
inline double gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 200; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-14) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i < 200; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-14) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

// Upper-tail p-value of a chi-square statistic.
inline double chi_square_p_value(double stat, int dof) {
    return 1.0 - gamma_p(0.5 * dof, 0.5 * stat);
}

// Closed-form alpha of a constant-density slab seen through [t0, t1].
inline double slab_alpha(double sigma, double slab_lo, double slab_hi, double t0, double t1) {
    double lo = std::max(slab_lo, t0), hi = std::min(slab_hi, t1);
    double len = std::max(0.0, hi - lo);
    return 1.0 - std::exp(-sigma * len);
}

// One hand-evaluated Adam step at t = 1 (bias correction included).
inline double adam_first_update(double g, double lr, double beta1, double beta2, double eps) {
    double m = (1.0 - beta1) * g;
    double v = (1.0 - beta2) * g * g;
    double m_hat = m / (1.0 - beta1);
    double v_hat = v / (1.0 - beta2);
    return -lr * m_hat / (std::sqrt(v_hat) + eps);
}

}  // namespace oracles
