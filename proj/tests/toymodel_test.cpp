#include <abcglm/density_curve.hpp>
#include <abcglm/numerics.hpp>
#include <abcglm/toy.hpp>
#include <catch2/catch_amalgamated.hpp>
#include <map>

#include "support/test_util.hpp"

using namespace abcglm;
using Catch::Approx;
using test_util::linspace;

namespace {

double geometric_pmf(long k, double theta) {
    return std::pow(theta, static_cast<double>(k)) /
           std::pow(1.0 + theta, static_cast<double>(k) + 1.0);
}

double curve_mean(const DensityCurve& curve) {
    std::vector<double> weighted(curve.grid.size());
    for (std::size_t i = 0; i < curve.grid.size(); ++i)
        weighted[i] = curve.grid[i] * curve.density[i];
    return trapezoid(curve.grid, weighted);
}

}  // namespace

TEST_CASE("two-sequence likelihood is the geometric law", "[toymodel]") {
    CHECK(watterson_likelihood(0, 1.0, 2) == Approx(0.5).margin(1e-12));
    for (long k = 0; k <= 20; ++k)
        for (double theta : {0.3, 1.0, 4.2})
            REQUIRE(watterson_likelihood(k, theta, 2) ==
                    Approx(geometric_pmf(k, theta)).epsilon(1e-10));
}

TEST_CASE("likelihood sums to one over the support", "[toymodel]") {
    for (double theta : {0.1, 1.0, 10.0}) {
        CompensatedSum sum;
        for (long s = 0; s <= 3000; ++s) sum.add(watterson_likelihood(s, theta, 10));
        REQUIRE(sum.value() == Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("simulated segregating sites have the watterson mean", "[toymodel]") {
    RandomStream stream(11, 0);
    const int draws = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double s = static_cast<double>(simulate_segregating_sites(2.0, 2, stream));
        sum += s;
        sum_sq += s * s;
    }
    const double mean = sum / draws;
    const double var = sum_sq / draws - mean * mean;
    const double se = std::sqrt(var / draws);
    CHECK(std::abs(mean - 2.0) < 3.0 * se);  // E[S] = theta * a_2 = 2
}

TEST_CASE("two-sequence simulation matches the geometric law (chi-square)", "[toymodel]") {
    RandomStream stream(12, 0);
    const int draws = 100000;
    const double theta = 1.5;
    std::map<long, long> counts;
    for (int i = 0; i < draws; ++i) ++counts[simulate_segregating_sites(theta, 2, stream)];

    double chi2 = 0.0;
    int cells = 0;
    double tail_expected = draws;
    long tail_observed = draws;
    for (long k = 0; k < 40; ++k) {
        const double expected = draws * geometric_pmf(k, theta);
        if (expected < 5.0) break;
        const long observed = counts.count(k) ? counts[k] : 0;
        chi2 += (observed - expected) * (observed - expected) / expected;
        tail_expected -= expected;
        tail_observed -= observed;
        ++cells;
    }
    if (tail_expected >= 5.0) {
        chi2 += (tail_observed - tail_expected) * (tail_observed - tail_expected) / tail_expected;
        ++cells;
    }
    const double p = test_util::chi_square_p_value(chi2, cells - 1);
    INFO("chi2 " << chi2 << " over " << cells << " cells, p " << p);
    CHECK(p > 0.001);
}

TEST_CASE("vanishing mutation rate yields zero segregating sites", "[toymodel]") {
    RandomStream stream(13, 0);
    for (int i = 0; i < 10000; ++i)
        REQUIRE(simulate_segregating_sites(1e-9, 10, stream) == 0);
}

TEST_CASE("simulator and likelihood agree to monte carlo accuracy", "[toymodel]") {
    const double theta = 5.0;
    const int n_seq = 10;
    const int draws = 1000000;
    RandomStream stream(14, 0);
    std::map<long, long> counts;
    for (int i = 0; i < draws; ++i) ++counts[simulate_segregating_sites(theta, n_seq, stream)];

    for (long s = 0; s <= 200; ++s) {
        const double p = watterson_likelihood(s, theta, n_seq);
        if (p <= 1e-3) continue;
        const double freq = static_cast<double>(counts.count(s) ? counts[s] : 0) / draws;
        const double se = std::sqrt(p * (1.0 - p) / draws);
        INFO("s = " << s << ": likelihood " << p << ", frequency " << freq);
        REQUIRE(std::abs(freq - p) < 4.0 * se);
    }
}

TEST_CASE("alternating sum agrees with the integration fallback", "[toymodel]") {
    for (int n_seq : {2, 5, 10, 20})
        for (double theta : {0.5, 2.0, 8.0})
            for (long s : {0L, 3L, 10L, 30L}) {
                const double direct = watterson_likelihood(s, theta, n_seq);
                const double integrated = detail::watterson_by_integration(s, theta, n_seq);
                const double convolved = detail::watterson_by_convolution(s, theta, n_seq);
                REQUIRE(integrated == Approx(direct).margin(1e-9));
                REQUIRE(convolved == Approx(direct).margin(1e-12));
            }

    // Stress corner: large n_seq drives the alternating sum through heavy
    // cancellation; whatever path evaluates it must stay a probability.
    for (int n_seq : {40, 60})
        for (double theta : {1e-4, 0.1, 50.0})
            for (long s : {0L, 1L, 25L}) {
                const WattersonEval eval = watterson_likelihood_checked(s, theta, n_seq);
                REQUIRE(eval.value >= 0.0);
                REQUIRE(eval.value <= 1.0 + 1e-12);
            }

    CHECK_THROWS_AS(watterson_likelihood(3, 0.0, 10), ValidationError);
    CHECK_THROWS_AS(watterson_likelihood(3, 1.0, 1), ValidationError);
}

TEST_CASE("analytic posterior follows the likelihood under a flat prior", "[toymodel]") {
    const Prior prior = Prior::uniform(0.005, 10.0);
    const std::vector<double> grid = linspace(0.005, 10.0, 4001);
    const DensityCurve posterior = analytic_posterior(16, prior, 10, grid);

    double best_theta = 0.0, best_like = -1.0;
    for (double theta : grid) {
        const double like = watterson_likelihood(16, theta, 10);
        if (like > best_like) {
            best_like = like;
            best_theta = theta;
        }
    }
    CHECK(curve_argmax(posterior) == Approx(best_theta).margin(1e-12));
}

TEST_CASE("gap prior forces an exactly empty posterior gap", "[toymodel]") {
    const Prior gap({UniformComponent(Support({{0.005, 3.0}, {6.0, 10.0}}))});
    const DensityCurve posterior = analytic_posterior(16, gap, 10, linspace(0.005, 10.0, 2001));
    for (std::size_t i = 0; i < posterior.grid.size(); ++i)
        if (posterior.grid[i] > 3.0 && posterior.grid[i] < 6.0)
            REQUIRE(posterior.density[i] == 0.0);
    CHECK(curve_integral(posterior) == Approx(1.0).margin(1e-9));
}

TEST_CASE("analytic posterior is stable under grid refinement", "[toymodel]") {
    const Prior prior = Prior::uniform(0.005, 10.0);

    const DensityCurve coarse = analytic_posterior(16, prior, 10, linspace(0.005, 10.0, 2001));
    const DensityCurve fine = analytic_posterior(16, prior, 10, linspace(0.005, 10.0, 20001));
    CHECK(curve_mean(coarse) == Approx(curve_mean(fine)).epsilon(1e-4));

    const DensityCurve base = analytic_posterior(16, prior, 10, linspace(0.005, 10.0, 8192));
    const DensityCurve doubled = analytic_posterior(16, prior, 10, linspace(0.005, 10.0, 16384));
    CHECK(l1_distance(base, doubled) < 1e-6);
}

TEST_CASE("unreachable observations raise an explicit error", "[toymodel]") {
    const Prior prior = Prior::uniform(0.005, 10.0);
    CHECK_THROWS_AS(analytic_posterior(100000, prior, 10, linspace(0.005, 10.0, 501)),
                    NumericalError);
}

TEST_CASE("l1 distance reference values", "[toymodel]") {
    const std::vector<double> grid = linspace(0.0, 1.0, 101);
    std::vector<double> flat(grid.size(), 1.0);
    const DensityCurve f = make_density_curve(grid, flat, Support::interval(0.0, 1.0));
    CHECK(l1_distance(f, f) == 0.0);

    // Disjoint supports: total variation saturates at 2.
    const std::vector<double> grid2 = linspace(2.0, 3.0, 101);
    std::vector<double> flat2(grid2.size(), 1.0);
    const DensityCurve g = make_density_curve(grid2, flat2, Support::interval(2.0, 3.0));
    CHECK(l1_distance(f, g) == Approx(2.0).margin(1e-6));

    // Half-overlapping uniforms: half the mass differs on each side.
    const std::vector<double> grid3 = linspace(0.5, 1.5, 101);
    std::vector<double> flat3(grid3.size(), 1.0);
    const DensityCurve h = make_density_curve(grid3, flat3, Support::interval(0.5, 1.5));
    CHECK(l1_distance(f, h) == Approx(1.0).margin(1e-6));
}

TEST_CASE("l1 distance is a metric on curves", "[toymodel]") {
    const Prior prior = Prior::uniform(0.005, 10.0);
    const std::vector<double> grid = linspace(0.005, 10.0, 512);
    const DensityCurve a = analytic_posterior(10, prior, 10, grid);
    const DensityCurve b = analytic_posterior(16, prior, 10, grid);
    const DensityCurve c = analytic_posterior(23, prior, 10, grid);

    CHECK(l1_distance(a, b) == Approx(l1_distance(b, a)).margin(1e-15));
    CHECK(l1_distance(a, a) == 0.0);
    CHECK(l1_distance(a, c) <= l1_distance(a, b) + l1_distance(b, c) + 1e-12);
    CHECK(l1_distance(a, b) <= 2.0 + 1e-12);
    CHECK(l1_distance(a, b) > 0.0);
}
