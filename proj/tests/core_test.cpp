#include <abcglm/io.hpp>
#include <abcglm/numerics.hpp>
#include <abcglm/prior.hpp>
#include <abcglm/random.hpp>
#include <abcglm/support.hpp>
#include <abcglm/table.hpp>
#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>

#include "support/test_util.hpp"

using namespace abcglm;
using Catch::Approx;

namespace {

Prior gap_prior() {
    return Prior({UniformComponent(Support({{0.005, 3.0}, {6.0, 10.0}}))});
}

Prior tn_prior(double mean, double sd, double lo, double hi) {
    return Prior({TruncatedNormalComponent(mean, sd, lo, hi)});
}

}  // namespace

TEST_CASE("prior density of the paper's uniform ranges", "[core]") {
    const Prior uni = Prior::uniform(0.005, 10.0);
    CHECK(uni.density(Vector::Constant(1, 5.0)) == Approx(1.0 / 9.995).epsilon(1e-12));

    const Prior gap = gap_prior();
    CHECK(gap.density(Vector::Constant(1, 4.5)) == 0.0);
    CHECK(gap.density(Vector::Constant(1, 2.0)) == Approx(1.0 / 6.995).epsilon(1e-12));

    CHECK_THROWS_AS(uni.density(Vector::Zero(2)), ValidationError);
}

TEST_CASE("prior density integrates to one per dimension", "[core]") {
    const auto integral_1d = [](const Prior& prior) {
        double total = 0.0;
        const Support support =
            std::visit([](const auto& c) { return c.support(); }, prior.component(0));
        for (const Interval& piece : support.intervals())
            total += integrate_gl(
                [&](double x) { return prior.component_density(0, x); }, piece.lo, piece.hi, 32);
        return total;
    };
    CHECK(integral_1d(Prior::uniform(0.005, 10.0)) == Approx(1.0).margin(1e-10));
    CHECK(integral_1d(gap_prior()) == Approx(1.0).margin(1e-10));
    CHECK(integral_1d(tn_prior(5.0, 3.0, 0.005, 10.0)) == Approx(1.0).margin(1e-10));
    CHECK(integral_1d(tn_prior(5e-4, 2e-4, 1e-4, 1e-3)) == Approx(1.0).margin(1e-10));
}

TEST_CASE("prior samples stay in support", "[core]") {
    RandomStream stream(42, 0);
    const Prior unit = Prior::uniform(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double x = unit.sample(stream)[0];
        REQUIRE(x >= 0.0);
        REQUIRE(x <= 1.0);
    }

    const Prior gap = gap_prior();
    for (int i = 0; i < 100000; ++i) {
        const double x = gap.sample(stream)[0];
        REQUIRE_FALSE((x > 3.0 && x < 6.0));
        REQUIRE(gap.density(Vector::Constant(1, x)) > 0.0);
    }
}

TEST_CASE("truncated normal sampling matches quadrature moments", "[core]") {
    const double mean = 5e-4, sd = 2e-4, lo = 1e-4, hi = 1e-3;
    const Prior prior = tn_prior(mean, sd, lo, hi);

    const auto moment = [&](int p) {
        return integrate_gl(
            [&](double x) { return std::pow(x, p) * prior.component_density(0, x); }, lo, hi, 32);
    };
    const double true_mean = moment(1);
    const double true_var = moment(2) - true_mean * true_mean;

    const int draws = 100000;
    RandomStream stream(7, 3);
    double sum = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double x = prior.sample(stream)[0];
        REQUIRE(x >= lo);
        REQUIRE(x <= hi);
        sum += x;
    }
    const double sample_mean = sum / draws;
    const double se = std::sqrt(true_var / draws);
    CHECK(std::abs(sample_mean - true_mean) < 3.0 * se);
}

TEST_CASE("prior sample histogram matches density (chi-square)", "[core]") {
    const auto gof_p = [](const Prior& prior, std::uint64_t seed) {
        const Support support =
            std::visit([](const auto& c) { return c.support(); }, prior.component(0));
        const double lo = support.lower(), hi = support.upper();
        const int bins = 50, draws = 100000;

        std::vector<double> expected(bins);
        for (int b = 0; b < bins; ++b) {
            const double a = lo + (hi - lo) * b / bins;
            const double c = lo + (hi - lo) * (b + 1) / bins;
            expected[b] = draws * integrate_gl(
                                      [&](double x) { return prior.component_density(0, x); }, a,
                                      c, 8);
        }

        std::vector<long> observed(bins, 0);
        RandomStream stream(seed, 11);
        for (int i = 0; i < draws; ++i) {
            const double x = prior.sample(stream)[0];
            int b = static_cast<int>((x - lo) / (hi - lo) * bins);
            b = std::clamp(b, 0, bins - 1);
            ++observed[b];
        }

        double chi2 = 0.0;
        int used = 0;
        for (int b = 0; b < bins; ++b) {
            if (expected[b] < 1e-9) {
                REQUIRE(observed[b] == 0);  // zero-density bins must stay empty
                continue;
            }
            const double d = observed[b] - expected[b];
            chi2 += d * d / expected[b];
            ++used;
        }
        return test_util::chi_square_p_value(chi2, used - 1);
    };

    CHECK(gof_p(Prior::uniform(0.005, 10.0), 101) > 0.001);
    CHECK(gof_p(gap_prior(), 102) > 0.001);
    CHECK(gof_p(tn_prior(5.0, 3.0, 0.005, 10.0), 103) > 0.001);
}

TEST_CASE("parameter normalization is the affine map to the unit box", "[core]") {
    const ParameterDomain d10({Support::interval(0.0, 10.0)});
    CHECK(d10.normalize(Vector::Constant(1, 5.0))[0] == Approx(0.5).margin(1e-15));

    const ParameterDomain paper({Support::interval(0.005, 10.0)});
    CHECK(paper.normalize(Vector::Constant(1, 0.005))[0] == 0.0);

    const ParameterDomain two(
        {Support::interval(0.005, 10.0), Support({{0.005, 3.0}, {6.0, 10.0}})});
    RandomStream stream(5, 0);
    for (int i = 0; i < 100; ++i) {
        Vector theta(2);
        theta << stream.uniform(0.005, 10.0), stream.uniform(0.005, 10.0);
        const Vector back = two.denormalize(two.normalize(theta));
        REQUIRE(std::abs(back[0] - theta[0]) < 1e-12);
        REQUIRE(std::abs(back[1] - theta[1]) < 1e-12);
    }

    CHECK_THROWS_AS(Support::interval(2.0, 2.0), ValidationError);
}

TEST_CASE("reference table rejects rows outside the epsilon ball", "[core]") {
    ReferenceTable table;
    table.params = Matrix::Constant(2, 1, 1.0);
    table.stats = Matrix::Zero(2, 1);
    table.stats(1, 0) = 5.0;  // distance 5 from s_obs
    table.s_obs = Vector::Zero(1);
    table.epsilon = 1.0;
    table.total_proposals = 10;
    CHECK_THROWS_AS(table.validate(), ValidationError);

    table.epsilon = 6.0;
    CHECK_NOTHROW(table.validate());
}

TEST_CASE("reference table round-trips through CSV exactly", "[core]") {
    RandomStream stream(99, 0);
    Matrix params(7, 2), stats(7, 3);
    for (int i = 0; i < 7; ++i) {
        params(i, 0) = stream.uniform(0.0, 1.0);
        params(i, 1) = stream.normal();
        for (int k = 0; k < 3; ++k) stats(i, k) = stream.normal(0.0, 0.1);
    }
    ReferenceTable table =
        test_util::synthetic_table(std::move(params), std::move(stats), Vector::Zero(3));
    table.total_proposals = 1234;
    table.seed = 99;

    const auto dir = std::filesystem::temp_directory_path() / "abcglm_core_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "table.csv").string();
    save_table(table, path);
    const ReferenceTable loaded = load_table(path);

    REQUIRE(loaded.size() == table.size());
    CHECK(loaded.params == table.params);  // bitwise via round-trip formatting
    CHECK(loaded.stats == table.stats);
    CHECK(loaded.s_obs == table.s_obs);
    CHECK(loaded.epsilon == table.epsilon);
    CHECK(loaded.total_proposals == table.total_proposals);
    CHECK(loaded.seed == table.seed);
    CHECK(loaded.distance_kind == table.distance_kind);

    save_table(loaded, (dir / "again.csv").string());
    CHECK(read_text_file(path) == read_text_file((dir / "again.csv").string()));
    std::filesystem::remove_all(dir);
}

TEST_CASE("random streams are reproducible and distinct", "[core]") {
    RandomStream a(123, 5), b(123, 5), c(123, 6);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        const double xa = a.uniform01(), xb = b.uniform01(), xc = c.uniform01();
        all_equal = all_equal && (xa == xb);
        any_diff = any_diff || (xa != xc);
        REQUIRE(xa >= 0.0);
        REQUIRE(xa < 1.0);
    }
    CHECK(all_equal);
    CHECK(any_diff);
}
