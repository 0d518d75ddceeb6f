#pragma once

#include <filesystem>
#include <string>

#include "abcglm/config.hpp"

namespace abcglm {
namespace cli {

struct RunOptions {
    Json config;  // merged file + --set overrides
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out = "abcglm_out";
};

inline std::filesystem::path prepare_out_dir(const RunOptions& opt) {
    std::filesystem::path dir(opt.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + opt.out + "': " + ec.message());
    return dir;
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const RunOptions& opt, const Json& outputs) {
    Json manifest;
    manifest["command"] = command;
    manifest["seed"] = opt.seed;
    manifest["workers"] = opt.workers;
    manifest["out"] = opt.out;
    manifest["config"] = opt.config;
    manifest["outputs"] = outputs;
    manifest["versions"]["abcglm"] = library_version;
    manifest["versions"]["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION);
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

inline Json table_summary(const ReferenceTable& table) {
    Json j;
    j["n_rows"] = table.size();
    j["total_proposals"] = table.total_proposals;
    j["epsilon"] = table.epsilon;
    j["acceptance_rate"] = table.acceptance_rate();
    return j;
}

// ---------------------------------------------------------------------------
// sample

inline int cmd_sample(const RunOptions& opt) {
    const Json& cfg = opt.config;
    const auto dir = prepare_out_dir(opt);

    // External-table mode: load an existing table and re-save it (validation
    // plus canonical formatting).
    if (cfg.contains("table")) {
        config::require_keys(cfg, {"seed", "workers", "out", "table"}, {"table"}, "config");
        config::require_keys(cfg.at("table"), {"path"}, {"path"}, "config.table");
        const auto path = config::get<std::string>(cfg.at("table"), "path", "config.table");
        const ReferenceTable table = load_table(path);
        save_table(table, (dir / "table.csv").string());
        write_manifest(dir, "sample", opt, table_summary(table));
        return 0;
    }

    config::require_keys(cfg,
                         {"seed", "workers", "out", "model", "prior", "s_obs", "distance",
                          "sampler"},
                         {"model", "prior", "s_obs", "sampler"}, "config");
    const auto model = config::make_model(cfg.at("model"), "config.model");
    const Prior prior = config::make_prior(cfg.at("prior"), "config.prior");
    const Vector s_obs = config::make_s_obs(cfg.at("s_obs"), "config.s_obs");
    const SamplerMode mode = config::make_sampler_mode(cfg.at("sampler"), "config.sampler");
    const DistanceSpec spec =
        cfg.contains("distance")
            ? config::make_distance(cfg.at("distance"), "config.distance", *model, prior,
                                    opt.seed, opt.workers)
            : DistanceSpec::euclidean();

    const ReferenceTable table =
        run_rejection(*model, prior, s_obs, spec, mode, opt.seed, opt.workers);
    save_table(table, (dir / "table.csv").string());
    write_manifest(dir, "sample", opt, table_summary(table));
    return 0;
}

// ---------------------------------------------------------------------------
// glm-posterior

inline int cmd_glm_posterior(const RunOptions& opt) {
    const Json& cfg = opt.config;
    config::require_keys(cfg, {"seed", "workers", "out", "table", "prior", "model", "glm"},
                         {"table", "prior"}, "config");
    const auto dir = prepare_out_dir(opt);

    config::require_keys(cfg.at("table"), {"path"}, {"path"}, "config.table");
    const ReferenceTable table =
        load_table(config::get<std::string>(cfg.at("table"), "path", "config.table"));
    const Prior prior = config::make_prior(cfg.at("prior"), "config.prior");
    if (prior.dim() != table.param_dim())
        throw ValidationError("config.prior: dimension does not match the table");

    double scale = 1.0;
    int grid_points = 512;
    std::string fit_mode = "table";
    long long fit_n = 0;
    if (cfg.contains("glm")) {
        config::require_keys(cfg.at("glm"), {"scale", "grid_points", "fit", "fit_n"}, {},
                             "config.glm");
        scale = config::get_or<double>(cfg.at("glm"), "scale", "config.glm", 1.0);
        grid_points = config::get_or<int>(cfg.at("glm"), "grid_points", "config.glm", 512);
        fit_mode = config::get_or<std::string>(cfg.at("glm"), "fit", "config.glm", "table");
        fit_n = config::get_or<long long>(cfg.at("glm"), "fit_n", "config.glm", 0);
    }
    if (grid_points < 2) throw ValidationError("config.glm.grid_points: must be >= 2");

    const ParameterDomain domain = prior.domain();
    GlmFit fit;
    if (fit_mode == "table") {
        fit = fit_glm(table);
    } else if (fit_mode == "uniform") {
        // the strict reading: fit the truncated model on a fresh design drawn
        // uniformly over the domain rather than on the ABC sample itself
        if (!cfg.contains("model"))
            throw ValidationError("config.model: required when glm.fit is 'uniform'");
        const auto model = config::make_model(cfg.at("model"), "config.model");
        if (model->param_dim() != table.param_dim() || model->stat_dim() != table.stat_dim())
            throw ValidationError("config.model: dimensions do not match the table");
        const long long n_design = fit_n > 0 ? fit_n : table.size();
        const ProposalSet design = run_all_proposals(
            *model, uniform_prior_over(domain), table.s_obs, DistanceSpec::euclidean(), n_design,
            derive_seed(opt.seed, 0x756e69666f726dull), opt.workers);
        fit = fit_glm(design.thetas, design.stats);
    } else {
        throw ValidationError("config.glm.fit: expected 'table' or 'uniform'");
    }
    const SmoothingSpec smoothing = choose_smoothing(table, domain, scale);
    const PosteriorMixture mix = build_posterior(fit, smoothing, table, table.s_obs, domain);

    Json outputs;
    outputs["table"] = table_summary(table);
    outputs["log_normalizer"] = mix.log_normalizer();
    outputs["smoothing_sigma"] = std::vector<double>(smoothing.sigma.begin(),
                                                     smoothing.sigma.end());
    Json files = Json::array();
    for (int k = 0; k < domain.dim(); ++k) {
        const Interval hull = domain.support(k).hull();
        const DensityCurve curve = marginal_posterior(
            mix, k, uniform_grid_vector(hull.lo, hull.hi, grid_points));
        const std::string name = "marginal_theta_" + std::to_string(k + 1) + ".csv";
        write_text_file((dir / name).string(), curve_to_csv(curve, k + 1));
        files.push_back(name);
    }
    outputs["marginals"] = files;

    Json report;
    report["C"] = Json::array();
    for (long i = 0; i < fit.C.rows(); ++i)
        report["C"].push_back(std::vector<double>(fit.C.row(i).begin(), fit.C.row(i).end()));
    report["c0"] = std::vector<double>(fit.c0.begin(), fit.c0.end());
    report["Sigma_s"] = Json::array();
    for (long i = 0; i < fit.Sigma_s.rows(); ++i)
        report["Sigma_s"].push_back(
            std::vector<double>(fit.Sigma_s.row(i).begin(), fit.Sigma_s.row(i).end()));
    report["log_normalizer"] = mix.log_normalizer();
    write_text_file((dir / "glm_fit.json").string(), report.dump(2) + "\n");
    outputs["fit"] = "glm_fit.json";

    write_manifest(dir, "glm-posterior", opt, outputs);
    return 0;
}

// ---------------------------------------------------------------------------
// reg-posterior

inline int cmd_reg_posterior(const RunOptions& opt) {
    const Json& cfg = opt.config;
    config::require_keys(cfg, {"seed", "workers", "out", "table", "prior", "reg"},
                         {"table", "prior"}, "config");
    const auto dir = prepare_out_dir(opt);

    config::require_keys(cfg.at("table"), {"path"}, {"path"}, "config.table");
    const ReferenceTable table =
        load_table(config::get<std::string>(cfg.at("table"), "path", "config.table"));
    const Prior prior = config::make_prior(cfg.at("prior"), "config.prior");
    if (prior.dim() != table.param_dim())
        throw ValidationError("config.prior: dimension does not match the table");

    std::string transform_name = "hamilton";
    double bandwidth = 0.0;  // 0: Silverman
    double multiplier = 1.0;
    int grid_points = 512;
    if (cfg.contains("reg")) {
        config::require_keys(cfg.at("reg"),
                             {"transform", "bandwidth", "multiplier", "grid_points"}, {},
                             "config.reg");
        transform_name =
            config::get_or<std::string>(cfg.at("reg"), "transform", "config.reg", "hamilton");
        bandwidth = config::get_or<double>(cfg.at("reg"), "bandwidth", "config.reg", 0.0);
        multiplier = config::get_or<double>(cfg.at("reg"), "multiplier", "config.reg", 1.0);
        grid_points = config::get_or<int>(cfg.at("reg"), "grid_points", "config.reg", 512);
    }
    if (grid_points < 2) throw ValidationError("config.reg.grid_points: must be >= 2");
    if (!(multiplier > 0.0)) throw ValidationError("config.reg.multiplier: must be > 0");

    const ParameterDomain domain = prior.domain();
    RegTransform transform;
    if (transform_name == "hamilton")
        transform = hamilton_hull_transform(domain);
    else if (transform_name == "none")
        transform = no_transform(domain.dim());
    else
        throw ValidationError("config.reg.transform: expected 'hamilton' or 'none'");

    const RegAdjustment adj = reg_adjust(table, table.s_obs, transform);

    Json outputs;
    outputs["table"] = table_summary(table);
    Json files = Json::array();
    for (int k = 0; k < domain.dim(); ++k) {
        const Interval hull = domain.support(k).hull();
        std::vector<double> values(adj.adjusted.col(k).begin(), adj.adjusted.col(k).end());
        const DensityCurve curve = kde_posterior(
            values, Support::interval(hull.lo, hull.hi), bandwidth,
            uniform_grid_vector(hull.lo, hull.hi, grid_points), multiplier);
        const std::string name = "marginal_theta_" + std::to_string(k + 1) + ".csv";
        write_text_file((dir / name).string(), curve_to_csv(curve, k + 1));
        files.push_back(name);
    }
    outputs["marginals"] = files;

    write_manifest(dir, "reg-posterior", opt, outputs);
    return 0;
}

// ---------------------------------------------------------------------------
// bayes-factor

namespace detail {

struct FittedModel {
    ReferenceTable table;
    MarginalDensityEstimate marginal;
};

inline FittedModel fit_one_model(const Json& spec, const std::string& where, const Json& cfg,
                                 const RunOptions& opt, const Vector& s_obs,
                                 std::uint64_t seed, double glm_scale) {
    config::require_keys(spec, {"model", "prior"}, {"model", "prior"}, where);
    const auto model = config::make_model(spec.at("model"), where + ".model");
    const Prior prior = config::make_prior(spec.at("prior"), where + ".prior");
    const SamplerMode mode = config::make_sampler_mode(cfg.at("sampler"), "config.sampler");
    const DistanceSpec dist =
        cfg.contains("distance")
            ? config::make_distance(cfg.at("distance"), "config.distance", *model, prior, seed,
                                    opt.workers)
            : DistanceSpec::euclidean();

    FittedModel out;
    out.table = run_rejection(*model, prior, s_obs, dist, mode, seed, opt.workers);
    const GlmFit fit = fit_glm(out.table);
    const SmoothingSpec smoothing = choose_smoothing(out.table, prior.domain(), glm_scale);
    out.marginal = model_marginal_density(fit, smoothing, out.table, s_obs,
                                          acceptance_from_table(out.table));
    return out;
}

}  // namespace detail

inline int cmd_bayes_factor(const RunOptions& opt) {
    const Json& cfg = opt.config;
    config::require_keys(cfg,
                         {"seed", "workers", "out", "model_a", "model_b", "s_obs", "distance",
                          "sampler", "glm", "prior_prob_a"},
                         {"model_a", "model_b", "s_obs", "sampler"}, "config");
    const auto dir = prepare_out_dir(opt);

    const Vector s_obs = config::make_s_obs(cfg.at("s_obs"), "config.s_obs");
    double glm_scale = 1.0;
    if (cfg.contains("glm")) {
        config::require_keys(cfg.at("glm"), {"scale"}, {}, "config.glm");
        glm_scale = config::get_or<double>(cfg.at("glm"), "scale", "config.glm", 1.0);
    }
    const double prior_prob_a = config::get_or<double>(cfg, "prior_prob_a", "config", 0.5);

    // both models sample from the same stream (as stability_sweep does): the
    // shared noise cancels in the ratio, and two identical model specs give
    // exactly B = 1
    const std::uint64_t run_seed = derive_seed(opt.seed, 0x6d6f64656c73ull);
    const auto A = detail::fit_one_model(cfg.at("model_a"), "config.model_a", cfg, opt, s_obs,
                                         run_seed, glm_scale);
    const auto B = detail::fit_one_model(cfg.at("model_b"), "config.model_b", cfg, opt, s_obs,
                                         run_seed, glm_scale);
    const BayesFactorResult result = bayes_factor(A.marginal, B.marginal, prior_prob_a);

    save_table(A.table, (dir / "table_a.csv").string());
    save_table(B.table, (dir / "table_b.csv").string());

    Json outputs;
    outputs["table_a"] = table_summary(A.table);
    outputs["table_b"] = table_summary(B.table);
    outputs["log_marginal_a"] = A.marginal.log_value;
    outputs["log_marginal_b"] = B.marginal.log_value;
    outputs["log_bayes_factor"] = result.log_B_AB;
    outputs["bayes_factor"] = result.B_AB;
    outputs["posterior_prob_a"] = result.posterior_prob_A;
    outputs["infinite"] = result.infinite;
    write_text_file((dir / "bayes_factor.json").string(), outputs.dump(2) + "\n");
    write_manifest(dir, "bayes-factor", opt, outputs);
    return 0;
}

// ---------------------------------------------------------------------------
// stability-sweep

inline int cmd_stability_sweep(const RunOptions& opt) {
    const Json& cfg = opt.config;
    config::require_keys(cfg,
                         {"seed", "workers", "out", "model_a", "model_b", "s_obs", "sweep"},
                         {"model_a", "model_b", "s_obs", "sweep"}, "config");
    const auto dir = prepare_out_dir(opt);

    config::require_keys(cfg.at("model_a"), {"model", "prior"}, {"model", "prior"},
                         "config.model_a");
    config::require_keys(cfg.at("model_b"), {"model", "prior"}, {"model", "prior"},
                         "config.model_b");
    const auto model_a = config::make_model(cfg.at("model_a").at("model"), "config.model_a.model");
    const Prior prior_a = config::make_prior(cfg.at("model_a").at("prior"), "config.model_a.prior");
    const auto model_b = config::make_model(cfg.at("model_b").at("model"), "config.model_b.model");
    const Prior prior_b = config::make_prior(cfg.at("model_b").at("prior"), "config.model_b.prior");
    const Vector s_obs = config::make_s_obs(cfg.at("s_obs"), "config.s_obs");

    const Json& sw = cfg.at("sweep");
    config::require_keys(sw, {"acceptance_rates", "budget", "nested", "glm_scale"},
                         {"acceptance_rates"}, "config.sweep");
    StabilitySweepConfig sweep_config;
    sweep_config.acceptance_rates =
        config::get<std::vector<double>>(sw, "acceptance_rates", "config.sweep");
    sweep_config.budget = config::get_or<long long>(sw, "budget", "config.sweep", 100000);
    sweep_config.nested = config::get_or<bool>(sw, "nested", "config.sweep", true);
    sweep_config.glm_scale = config::get_or<double>(sw, "glm_scale", "config.sweep", 1.0);
    sweep_config.seed = opt.seed;
    sweep_config.workers = opt.workers;

    const std::vector<SweepPoint> points =
        stability_sweep(*model_a, prior_a, *model_b, prior_b, s_obs, sweep_config);

    std::string csv = "acceptance_rate,log_bayes_factor,n_retained,flag\n";
    for (const SweepPoint& p : points) {
        csv += format_double(p.acceptance_rate);
        csv += ',';
        csv += format_double(p.log_bayes_factor);
        csv += ',';
        csv += std::to_string(p.n_retained);
        csv += ',';
        csv += p.flag;
        csv += '\n';
    }
    write_text_file((dir / "sweep.csv").string(), csv);

    Json outputs;
    outputs["sweep"] = "sweep.csv";
    outputs["points"] = points.size();
    write_manifest(dir, "stability-sweep", opt, outputs);
    return 0;
}

// ---------------------------------------------------------------------------
// compare

inline int cmd_compare(const RunOptions& opt) {
    const Json& cfg = opt.config;
    config::require_keys(cfg, {"seed", "workers", "out", "prior", "compare"}, {}, "config");
    const auto dir = prepare_out_dir(opt);

    CompareConfig cc;
    cc.seed = opt.seed;
    cc.workers = opt.workers;
    if (cfg.contains("prior")) cc.prior = config::make_prior(cfg.at("prior"), "config.prior");

    Json curve_cells = Json::array();
    if (cfg.contains("compare")) {
        const Json& cj = cfg.at("compare");
        config::require_keys(cj,
                             {"s_obs", "epsilons", "n_seq", "n_retained", "replicates",
                              "max_proposals", "grid_points", "glm_scales", "kde_multipliers",
                              "curve_cells"},
                             {}, "config.compare");
        if (cj.contains("s_obs"))
            cc.s_obs_values = config::get<std::vector<long>>(cj, "s_obs", "config.compare");
        if (cj.contains("epsilons"))
            cc.epsilons = config::get<std::vector<double>>(cj, "epsilons", "config.compare");
        cc.n_seq = config::get_or<int>(cj, "n_seq", "config.compare", cc.n_seq);
        cc.n_retained =
            config::get_or<long long>(cj, "n_retained", "config.compare", cc.n_retained);
        cc.replicates = config::get_or<int>(cj, "replicates", "config.compare", cc.replicates);
        cc.max_proposals =
            config::get_or<long long>(cj, "max_proposals", "config.compare", cc.max_proposals);
        cc.grid_points = config::get_or<int>(cj, "grid_points", "config.compare", cc.grid_points);
        if (cj.contains("glm_scales"))
            cc.glm_scales = config::get<std::vector<double>>(cj, "glm_scales", "config.compare");
        if (cj.contains("kde_multipliers"))
            cc.kde_multipliers =
                config::get<std::vector<double>>(cj, "kde_multipliers", "config.compare");
        if (cj.contains("curve_cells")) curve_cells = cj.at("curve_cells");
    }

    const CompareResult result = run_comparison_grid(cc);

    std::string csv = "method,S_obs,epsilon,mean_L1,stderr_L1,worse_than_prior\n";
    for (const CompareCellRow& row : result.cells) {
        csv += row.method;
        csv += ',';
        csv += std::to_string(row.s_obs);
        csv += ',';
        csv += format_double(row.epsilon);
        csv += ',';
        csv += format_double(row.mean_l1);
        csv += ',';
        csv += format_double(row.stderr_l1);
        csv += ',';
        csv += row.worse_than_prior ? "true" : "false";
        csv += '\n';
    }
    write_text_file((dir / "compare.csv").string(), csv);

    std::string diag = "S_obs,epsilon,replicate,complete,reg_argmax,glm_gap_mass\n";
    for (const CompareDiagnosticsRow& row : result.diagnostics) {
        diag += std::to_string(row.s_obs);
        diag += ',';
        diag += format_double(row.epsilon);
        diag += ',';
        diag += std::to_string(row.replicate);
        diag += ',';
        diag += row.complete ? "true" : "false";
        diag += ',';
        diag += format_double(row.reg_argmax);
        diag += ',';
        diag += format_double(row.glm_gap_mass);
        diag += '\n';
    }
    write_text_file((dir / "diagnostics.csv").string(), diag);

    Json outputs;
    outputs["compare"] = "compare.csv";
    outputs["diagnostics"] = "diagnostics.csv";
    outputs["n_seq"] = cc.n_seq;
    outputs["glm_scales"] = cc.glm_scales;
    outputs["kde_multipliers"] = cc.kde_multipliers;
    outputs["grand_mean_rejection"] = result.grand_mean_rejection;
    outputs["grand_mean_reg"] = result.grand_mean_reg;
    outputs["grand_mean_glm"] = result.grand_mean_glm;
    outputs["chosen_rejection_multiplier"] = result.chosen_rejection_multiplier;
    outputs["chosen_reg_multiplier"] = result.chosen_reg_multiplier;
    outputs["chosen_glm_scale"] = result.chosen_glm_scale;
    outputs["incomplete_replicates"] = result.incomplete_replicates;

    Json curve_files = Json::array();
    for (const Json& cell : curve_cells) {
        if (!cell.is_array() || cell.size() != 2)
            throw ValidationError("config.compare.curve_cells: entries must be [S_obs, epsilon]");
        const long s = cell[0].get<long>();
        const double eps = cell[1].get<double>();
        const CellCurves curves =
            compute_cell_curves(cc, s, eps, 0, result.chosen_glm_scale,
                                result.chosen_rejection_multiplier, result.chosen_reg_multiplier);
        const std::string stem = "curves_S" + std::to_string(s) + "_eps" + format_double(eps);
        const std::pair<const char*, const DensityCurve*> parts[] = {
            {"analytic", &curves.analytic},
            {"rejection", &curves.rejection},
            {"reg", &curves.reg},
            {"glm", &curves.glm},
        };
        for (const auto& [label, curve] : parts) {
            const std::string name = stem + "_" + label + ".csv";
            write_text_file((dir / name).string(), curve_to_csv(*curve, 1));
            curve_files.push_back(name);
        }
    }
    if (!curve_files.empty()) outputs["curves"] = curve_files;

    write_manifest(dir, "compare", opt, outputs);
    return 0;
}

}  // namespace cli
}  // namespace abcglm
