#include <abcglm/io.hpp>
#include <abcglm/numerics.hpp>
#include <abcglm/table.hpp>
#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "support/test_util.hpp"

namespace fs = std::filesystem;
using Catch::Approx;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

fs::path scratch_dir() {
    const fs::path dir = fs::temp_directory_path() / "abcglm_cli_test";
    fs::create_directories(dir);
    return dir;
}

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path log = scratch_dir() / ("run_" + std::to_string(counter++) + ".log");
    const std::string cmd =
        std::string(ABCGLM_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliResult result;
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    result.output = abcglm::read_text_file(log.string());
    return result;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

const std::string kSampleConfig = R"({
  "model": {"kind": "coalescent", "n_seq": 10},
  "prior": {"components": [{"kind": "uniform", "intervals": [[0.005, 10.0]]}]},
  "s_obs": [16],
  "sampler": {"mode": "retain_best", "n_keep": 200, "budget": 5000}
})";

}  // namespace

TEST_CASE("sample runs are byte-identical across repeats and workers", "[cli]") {
    const fs::path dir = scratch_dir();
    write_file(dir / "sample.json", kSampleConfig);

    const std::string base = "sample --config " + (dir / "sample.json").string() + " --seed 42";
    REQUIRE(run_cli(base + " --out " + (dir / "a").string()).exit_code == 0);
    REQUIRE(run_cli(base + " --out " + (dir / "b").string()).exit_code == 0);
    REQUIRE(run_cli(base + " --workers 3 --out " + (dir / "c").string()).exit_code == 0);

    const std::string a = abcglm::read_text_file((dir / "a/table.csv").string());
    const std::string b = abcglm::read_text_file((dir / "b/table.csv").string());
    const std::string c = abcglm::read_text_file((dir / "c/table.csv").string());
    CHECK(a == b);
    CHECK(a == c);
    CHECK(fs::exists(dir / "a/manifest.json"));
}

TEST_CASE("invalid tolerance exits with the validation code and names the field", "[cli]") {
    const fs::path dir = scratch_dir();
    write_file(dir / "bad.json", R"({
  "model": {"kind": "coalescent"},
  "prior": {"components": [{"kind": "uniform", "intervals": [[0.005, 10.0]]}]},
  "s_obs": [16],
  "sampler": {"mode": "fixed_epsilon", "epsilon": -1.0, "max_proposals": 1000}
})");
    const CliResult result = run_cli("sample --config " + (dir / "bad.json").string() +
                                     " --out " + (dir / "bad_out").string());
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("epsilon") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected", "[cli]") {
    const fs::path dir = scratch_dir();
    write_file(dir / "typo.json", R"({
  "model": {"kind": "coalescent"},
  "prior": {"components": [{"kind": "uniform", "intervals": [[0.005, 10.0]]}]},
  "s_obs": [16],
  "samplerr": {"mode": "retain_best", "n_keep": 10, "budget": 100}
})");
    const CliResult result = run_cli("sample --config " + (dir / "typo.json").string() +
                                     " --out " + (dir / "typo_out").string());
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("samplerr") != std::string::npos);
}

TEST_CASE("missing input files exit with the io code", "[cli]") {
    const fs::path dir = scratch_dir();
    const CliResult result = run_cli("sample --config " + (dir / "nope.json").string() +
                                     " --out " + (dir / "nope_out").string());
    CHECK(result.exit_code == 3);
}

TEST_CASE("hand-written tables round-trip through external-table mode", "[cli]") {
    const fs::path dir = scratch_dir();
    const std::string csv = "theta_1,s_1\n0.25,1.5\n0.5,2\n0.75,2.5\n";
    write_file(dir / "hand.csv", csv);
    write_file(dir / "hand.meta.json", R"({
  "n_rows": 3,
  "total_proposals": 12,
  "epsilon": 2.0,
  "s_obs": [2.0],
  "distance_kind": "euclidean",
  "seed": 5
})");
    write_file(dir / "table.json",
               std::string("{\"table\": {\"path\": \"") + (dir / "hand.csv").string() + "\"}}");

    const CliResult result = run_cli("sample --config " + (dir / "table.json").string() +
                                     " --out " + (dir / "roundtrip").string());
    REQUIRE(result.exit_code == 0);
    CHECK(abcglm::read_text_file((dir / "roundtrip/table.csv").string()) == csv);

    const abcglm::ReferenceTable loaded =
        abcglm::load_table((dir / "roundtrip/table.csv").string());
    CHECK(loaded.size() == 3);
    CHECK(loaded.epsilon == 2.0);
    CHECK(loaded.total_proposals == 12);
}

TEST_CASE("glm posterior curve matches direct mixture arithmetic", "[cli]") {
    // Three-row table rigged so OLS is exact: residuals orthogonal to the
    // design give slope 1, intercept 0, residual variance 3r^2/2... computed
    // below straight from the paper-style formulas with plain doubles.
    const double mu0 = 0.3, d = 0.25, r = 0.05, s_obs = 0.45;
    abcglm::Matrix params(3, 1), stats(3, 1);
    params << mu0 - d, mu0, mu0 + d;
    stats << (mu0 - d) + r, mu0 - 2.0 * r, (mu0 + d) + r;

    const fs::path dir = scratch_dir();
    abcglm::ReferenceTable table =
        test_util::synthetic_table(params, stats, abcglm::Vector::Constant(1, s_obs));
    abcglm::save_table(table, (dir / "conjugate.csv").string());

    write_file(dir / "glm.json", std::string("{\n") +
                                     "  \"table\": {\"path\": \"" +
                                     (dir / "conjugate.csv").string() + "\"},\n" +
                                     R"(  "prior": {"components": [{"kind": "uniform", "intervals": [[-20.0, 20.0]]}]},
  "glm": {"grid_points": 512}
})");
    REQUIRE(run_cli("glm-posterior --config " + (dir / "glm.json").string() + " --out " +
                    (dir / "glm_out").string())
                .exit_code == 0);

    // Independent evaluation: T, t^j, c(theta^j) from Eq (10)/(11) directly.
    const double sigma_s2 = (6.0 * r * r) / 2.0;  // residual SS / (N - m)
    const double sigma_02 = std::pow(40.0 / 3.0, 2);  // scale * range / N, squared
    const double T = 1.0 / (1.0 / sigma_s2 + 1.0 / sigma_02);
    const double thetas[3] = {mu0 - d, mu0, mu0 + d};
    double t[3], logw[3];
    for (int j = 0; j < 3; ++j) {
        const double v = s_obs / sigma_s2 + thetas[j] / sigma_02;
        t[j] = T * v;
        logw[j] = -0.5 * (thetas[j] * thetas[j] / sigma_02 - v * T * v);
    }

    const auto mixture = [&](double x) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j)
            acc += std::exp(logw[j]) * std::exp(-0.5 * (x - t[j]) * (x - t[j]) / T);
        return acc;
    };

    const std::string curve_csv =
        abcglm::read_text_file((dir / "glm_out/marginal_theta_1.csv").string());
    std::vector<double> grid, density;
    std::size_t pos = curve_csv.find('\n') + 1;
    while (pos < curve_csv.size()) {
        const std::size_t comma = curve_csv.find(',', pos);
        const std::size_t eol = curve_csv.find('\n', comma);
        // strtod, not stod: far-tail densities underflow to subnormals, which
        // stod reports as out_of_range
        grid.push_back(std::strtod(curve_csv.c_str() + pos, nullptr));
        density.push_back(std::strtod(curve_csv.c_str() + comma + 1, nullptr));
        pos = eol + 1;
    }
    REQUIRE(grid.size() == 512);

    std::vector<double> expected(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) expected[i] = mixture(grid[i]);
    const double z = abcglm::trapezoid(grid, expected);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (expected[i] / z < 1e-8) continue;
        REQUIRE(density[i] == Approx(expected[i] / z).epsilon(1e-8));
    }
}

TEST_CASE("identical models give a unit bayes factor", "[cli]") {
    const fs::path dir = scratch_dir();
    write_file(dir / "bf.json", R"({
  "model_a": {
    "model": {"kind": "coalescent", "n_seq": 10},
    "prior": {"components": [{"kind": "uniform", "intervals": [[0.005, 10.0]]}]}
  },
  "model_b": {
    "model": {"kind": "coalescent", "n_seq": 10},
    "prior": {"components": [{"kind": "uniform", "intervals": [[0.005, 10.0]]}]}
  },
  "s_obs": [16.5],
  "sampler": {"mode": "retain_best", "n_keep": 300, "budget": 10000}
})");
    const CliResult result = run_cli("bayes-factor --config " + (dir / "bf.json").string() +
                                     " --seed 9 --out " + (dir / "bf_out").string());
    REQUIRE(result.exit_code == 0);
    const std::string report =
        abcglm::read_text_file((dir / "bf_out/bayes_factor.json").string());
    const std::size_t at = report.find("\"log_bayes_factor\": ");
    REQUIRE(at != std::string::npos);
    const double log_b = std::stod(report.substr(at + 20));
    CHECK(std::abs(log_b) < 1e-12);
}

TEST_CASE("small comparison grids emit one row per method and cell", "[cli]") {
    const fs::path dir = scratch_dir();
    write_file(dir / "cmp.json", R"({
  "compare": {"s_obs": [10, 16], "epsilons": [5, 10], "replicates": 2, "n_retained": 500}
})");
    const CliResult result = run_cli("compare --config " + (dir / "cmp.json").string() +
                                     " --seed 2 --out " + (dir / "cmp_out").string());
    REQUIRE(result.exit_code == 0);

    const std::string csv = abcglm::read_text_file((dir / "cmp_out/compare.csv").string());
    const long long rows = std::count(csv.begin(), csv.end(), '\n') - 1;
    CHECK(rows == 12);
    CHECK(csv.rfind("method,S_obs,epsilon,mean_L1,stderr_L1,worse_than_prior", 0) == 0);
    CHECK(fs::exists(dir / "cmp_out/diagnostics.csv"));
    CHECK(fs::exists(dir / "cmp_out/manifest.json"));
}

TEST_CASE("flag overrides beat config values", "[cli]") {
    const fs::path dir = scratch_dir();
    write_file(dir / "sample2.json", kSampleConfig);

    // Same config, overridden budget: a different (valid) run.
    const CliResult ok = run_cli("sample --config " + (dir / "sample2.json").string() +
                                 " --set sampler.budget=6000 --seed 1 --out " +
                                 (dir / "over").string());
    REQUIRE(ok.exit_code == 0);
    const std::string manifest = abcglm::read_text_file((dir / "over/manifest.json").string());
    CHECK(manifest.find("6000") != std::string::npos);

    // Overriding into an invalid value must hit validation.
    const CliResult bad = run_cli("sample --config " + (dir / "sample2.json").string() +
                                  " --set sampler.n_keep=-5 --seed 1 --out " +
                                  (dir / "over_bad").string());
    CHECK(bad.exit_code == 1);
}
