#pragma once

#include <abcglm/table.hpp>
#include <abcglm/types.hpp>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace test_util {

using abcglm::Matrix;
using abcglm::Vector;

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        g[static_cast<std::size_t>(i)] = a + (b - a) * i / static_cast<double>(n - 1);
    return g;
}

// Regularized lower incomplete gamma P(a, x): series for x < a+1, else via the
// continued fraction for Q (Lentz). Standard numerics, enough for chi-square
// p-values in goodness-of-fit checks.
inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    const double log_prefactor = a * std::log(x) - x - std::lgamma(a);
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        double ap = a;
        for (int i = 0; i < 10000; ++i) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        return sum * std::exp(log_prefactor);
    }
    // Q(a,x) continued fraction
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return 1.0 - std::exp(log_prefactor) * h;
}

// Upper-tail p-value of a chi-square statistic with k degrees of freedom.
inline double chi_square_p_value(double chi2, double dof) {
    return 1.0 - gamma_p(dof / 2.0, chi2 / 2.0);
}

// Wraps raw (params, stats) draws as a valid reference table: epsilon barely
// above the largest observed euclidean distance so validation holds.
inline abcglm::ReferenceTable synthetic_table(Matrix params, Matrix stats, Vector s_obs) {
    abcglm::ReferenceTable table;
    double max_dist = 0.0;
    for (long long i = 0; i < params.rows(); ++i)
        max_dist = std::max(max_dist, (stats.row(i).transpose() - s_obs).norm());
    table.params = std::move(params);
    table.stats = std::move(stats);
    table.s_obs = std::move(s_obs);
    table.epsilon = max_dist * (1.0 + 1e-9) + 1e-12;
    table.total_proposals = 2 * table.params.rows();
    table.seed = 0;
    table.validate();
    return table;
}

}  // namespace test_util
