#include <cstdint>
#include <functional>
#include <iostream>
#include <list>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "abcglm/cli.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out = "abcglm_out";
    std::vector<std::string> overrides;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* workers_opt = nullptr;
    CLI::Option* out_opt = nullptr;
};

CommonFlags* add_common_flags(CLI::App* sub, std::list<CommonFlags>& storage) {
    storage.emplace_back();
    CommonFlags* flags = &storage.back();
    sub->add_option("--config", flags->config_path, "JSON run configuration file");
    flags->seed_opt = sub->add_option("--seed", flags->seed, "master RNG seed");
    flags->workers_opt = sub->add_option("--workers", flags->workers, "worker threads");
    flags->out_opt = sub->add_option("--out", flags->out, "output directory");
    sub->add_option("--set", flags->overrides,
                    "override a config entry, e.g. --set sampler.epsilon=2.5");
    return flags;
}

abcglm::cli::RunOptions resolve_options(const CommonFlags& flags) {
    abcglm::cli::RunOptions opt;
    opt.config = flags.config_path.empty() ? abcglm::Json::object()
                                           : abcglm::config::load_config_file(flags.config_path);
    if (!opt.config.is_object())
        throw abcglm::ValidationError("config: top level must be a JSON object");
    for (const std::string& assignment : flags.overrides)
        abcglm::config::apply_override(opt.config, assignment);

    // command-line flags win over config values
    opt.seed = flags.seed_opt->count() > 0
                   ? flags.seed
                   : abcglm::config::get_or<std::uint64_t>(opt.config, "seed", "config", 1);
    opt.workers = flags.workers_opt->count() > 0
                      ? flags.workers
                      : abcglm::config::get_or<int>(opt.config, "workers", "config", 1);
    opt.out = flags.out_opt->count() > 0
                  ? flags.out
                  : abcglm::config::get_or<std::string>(opt.config, "out", "config",
                                                        "abcglm_out");
    if (opt.workers < 1) throw abcglm::ValidationError("--workers must be >= 1");

    // echo the resolved values so the manifest alone reproduces the run
    opt.config["seed"] = opt.seed;
    opt.config["workers"] = opt.workers;
    opt.config["out"] = opt.out;
    return opt;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ABC-GLM: likelihood-free inference with a GLM regression adjustment"};
    app.require_subcommand(1);
    std::list<CommonFlags> storage;

    CLI::App* sample = app.add_subcommand("sample", "draw a rejection-sampling reference table");
    CommonFlags* sample_flags = add_common_flags(sample, storage);

    CLI::App* glm = app.add_subcommand("glm-posterior",
                                       "fit the GLM and export marginal posterior curves");
    CommonFlags* glm_flags = add_common_flags(glm, storage);

    CLI::App* reg = app.add_subcommand("reg-posterior",
                                       "local-linear adjustment with a KDE posterior");
    CommonFlags* reg_flags = add_common_flags(reg, storage);

    CLI::App* bf = app.add_subcommand("bayes-factor",
                                      "GLM marginal densities and the Bayes factor of two models");
    CommonFlags* bf_flags = add_common_flags(bf, storage);

    CLI::App* sweep = app.add_subcommand("stability-sweep",
                                         "Bayes factor as a function of the acceptance rate");
    CommonFlags* sweep_flags = add_common_flags(sweep, storage);

    CLI::App* compare = app.add_subcommand("compare",
                                           "L1 comparison grid of rejection, REG and GLM");
    CommonFlags* compare_flags = add_common_flags(compare, storage);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 1;
    }

    try {
        if (sample->parsed()) return abcglm::cli::cmd_sample(resolve_options(*sample_flags));
        if (glm->parsed()) return abcglm::cli::cmd_glm_posterior(resolve_options(*glm_flags));
        if (reg->parsed()) return abcglm::cli::cmd_reg_posterior(resolve_options(*reg_flags));
        if (bf->parsed()) return abcglm::cli::cmd_bayes_factor(resolve_options(*bf_flags));
        if (sweep->parsed())
            return abcglm::cli::cmd_stability_sweep(resolve_options(*sweep_flags));
        if (compare->parsed()) return abcglm::cli::cmd_compare(resolve_options(*compare_flags));
    } catch (const abcglm::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const abcglm::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const abcglm::NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
