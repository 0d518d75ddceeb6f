#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "abcglm/density_curve.hpp"
#include "abcglm/model.hpp"
#include "abcglm/numerics.hpp"
#include "abcglm/prior.hpp"
#include "abcglm/random.hpp"

namespace abcglm {

/// a_n = sum_{i=1}^{n_seq-1} 1/i; E[S] = theta * a_n.
inline double watterson_a(int n_seq) {
    double a = 0.0;
    for (int i = 1; i < n_seq; ++i) a += 1.0 / i;
    return a;
}

/// One draw of the number of segregating sites: coalescent times
/// T_k ~ Exp(k(k-1)/2) for k = n_seq..2 (units of 2N generations), total
/// branch length L = sum k T_k, then S ~ Poisson(theta L / 2).
inline long simulate_segregating_sites(double theta, int n_seq, RandomStream& stream) {
    if (!(theta > 0.0)) throw ValidationError("simulate_segregating_sites: theta must be > 0");
    if (n_seq < 2) throw ValidationError("simulate_segregating_sites: n_seq must be >= 2");
    double total_length = 0.0;
    for (int k = n_seq; k >= 2; --k) {
        const double rate = 0.5 * k * (k - 1);
        total_length += k * stream.exponential(rate);
    }
    return stream.poisson(0.5 * theta * total_length);
}

/// theta = 4 N mu inferred from S; m = n = 1.
class CoalescentToyModel : public SimulableModel {
public:
    explicit CoalescentToyModel(int n_seq = 10) : n_seq_(n_seq) {
        if (n_seq_ < 2) throw ValidationError("CoalescentToyModel: n_seq must be >= 2");
    }

    int n_seq() const { return n_seq_; }
    int param_dim() const override { return 1; }
    int stat_dim() const override { return 1; }
    ParameterDomain domain() const override {
        return ParameterDomain({Support::interval(0.005, 10.0)});
    }
    void simulate(const Vector& theta, RandomStream& stream, Vector& out) const override {
        out[0] = static_cast<double>(simulate_segregating_sites(theta[0], n_seq_, stream));
    }

private:
    int n_seq_;
};

/// Null alternative for model choice: S ~ Poisson(lambda), one free rate.
class PoissonRateModel : public SimulableModel {
public:
    int param_dim() const override { return 1; }
    int stat_dim() const override { return 1; }
    ParameterDomain domain() const override {
        return ParameterDomain({Support::interval(0.5, 30.0)});
    }
    void simulate(const Vector& theta, RandomStream& stream, Vector& out) const override {
        if (!(theta[0] > 0.0)) throw ValidationError("PoissonRateModel: rate must be > 0");
        out[0] = static_cast<double>(stream.poisson(theta[0]));
    }
};

struct WattersonEval {
    double value = 0.0;
    bool fallback = false;  // alternating sum cancelled; convolution used instead
};

namespace detail {

/// Density of the total branch length L: hypoexponential with rates j/2,
/// j = 1..n_seq-1 (evaluated in long double; used only by the fallback).
inline long double branch_length_density(long double ell, int n_seq) {
    const int terms = n_seq - 1;
    long double sum = 0.0L, comp = 0.0L;
    for (int j = 1; j <= terms; ++j) {
        long double c = 1.0L;
        for (int i = 1; i <= terms; ++i)
            if (i != j) c *= static_cast<long double>(i) / (i - j);
        const long double rate = 0.5L * j;
        const long double term = c * rate * std::exp(-rate * ell);
        const long double y = term - comp;
        const long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

/// P(S = s) by convolving the per-epoch mutation counts. While j lineages
/// remain, mutations arrive as a Poisson thinned over Exp(j(j-1)/2) time,
/// which marginalizes to a geometric with q_j = theta/(theta + j - 1); the
/// running pmf picks up each epoch through
///   b[k] <- q_j * b[k-1] + (1 - q_j) * b[k],
/// all terms nonnegative, so the recursion is stable for any n_seq.
inline double watterson_by_convolution(long s, double theta, int n_seq) {
    std::vector<double> pmf(static_cast<std::size_t>(s) + 1, 0.0);
    pmf[0] = 1.0;
    for (int j = 2; j <= n_seq; ++j) {
        const double q = theta / (theta + j - 1);
        pmf[0] *= 1.0 - q;
        for (std::size_t k = 1; k < pmf.size(); ++k)
            pmf[k] = q * pmf[k - 1] + (1.0 - q) * pmf[k];
    }
    return pmf[static_cast<std::size_t>(s)];
}

inline double watterson_by_integration(long s, double theta, int n_seq) {
    const double mean_length = 2.0 * watterson_a(n_seq);
    const double poisson_peak = 2.0 * static_cast<double>(s) / theta;
    const double hi = std::max(10.0 * mean_length, 5.0 * poisson_peak) + 400.0;
    const double log_fact = std::lgamma(static_cast<double>(s) + 1.0);
    return integrate_gl(
        [&](double ell) {
            const double rate = 0.5 * theta * ell;
            if (rate <= 0.0) return 0.0;
            const double log_pois =
                static_cast<double>(s) * std::log(rate) - rate - log_fact;
            return std::exp(log_pois) * static_cast<double>(branch_length_density(ell, n_seq));
        },
        0.0, hi, 256, 32);
}

}  // namespace detail

/// Exact P(S = s | theta, n_seq): the classical alternating sum
///   sum_{j=1}^{n_seq-1} (-1)^{j-1} C(n_seq-1, j) (j/(theta+j)) (theta/(theta+j))^s,
/// compensated; falls back to the stable per-epoch convolution when
/// cancellation drives the sum below -1e-12 or above 1 (a probability mass),
/// which happens for large n_seq.
inline WattersonEval watterson_likelihood_checked(long s, double theta, int n_seq) {
    if (!(theta > 0.0)) throw ValidationError("watterson_likelihood: theta must be > 0");
    if (n_seq < 2) throw ValidationError("watterson_likelihood: n_seq must be >= 2");
    WattersonEval eval;
    if (s < 0) return eval;

    CompensatedSum sum;
    double binom = 1.0;  // C(n_seq-1, j), built iteratively
    for (int j = 1; j <= n_seq - 1; ++j) {
        binom *= static_cast<double>(n_seq - j) / j;
        const double ratio = theta / (theta + j);
        const double term = binom * (j / (theta + j)) * std::pow(ratio, static_cast<double>(s));
        sum.add(j % 2 == 1 ? term : -term);
    }
    double value = sum.value();

    if (value < -1e-12 || value > 1.0 + 1e-9 || !std::isfinite(value)) {
        eval.fallback = true;
        value = detail::watterson_by_convolution(s, theta, n_seq);
    }
    eval.value = std::max(value, 0.0);
    return eval;
}

inline double watterson_likelihood(long s, double theta, int n_seq) {
    return watterson_likelihood_checked(s, theta, n_seq).value;
}

/// density proportional to likelihood(theta) * prior(theta), trapezoid-
/// normalized on the grid; exact zero outside the prior support.
inline DensityCurve posterior_from_likelihood(const std::function<double(double)>& likelihood,
                                              const Prior& prior,
                                              const std::vector<double>& grid) {
    if (prior.dim() != 1)
        throw ValidationError("posterior_from_likelihood: needs a 1-D prior");
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        values[i] = likelihood(grid[i]) * prior.component_density(0, grid[i]);
    const Support support =
        std::visit([](const auto& c) { return c.support(); }, prior.component(0));
    return make_density_curve(grid, std::move(values), support);
}

/// The toy model's analytic oracle: Watterson likelihood times the prior.
inline DensityCurve analytic_posterior(long S_obs, const Prior& prior, int n_seq,
                                       const std::vector<double>& grid) {
    return posterior_from_likelihood(
        [S_obs, n_seq](double theta) { return watterson_likelihood(S_obs, theta, n_seq); },
        prior, grid);
}

}  // namespace abcglm
