#pragma once

#include <atomic>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "abcglm/density_curve.hpp"
#include "abcglm/glm.hpp"
#include "abcglm/reg.hpp"
#include "abcglm/sampler.hpp"
#include "abcglm/toy.hpp"

namespace abcglm {

/// Grid experiment comparing rejection-KDE, ABC-REG, and ABC-GLM posteriors
/// against the analytic posterior, cell by cell.
struct CompareConfig {
    std::vector<long> s_obs_values = {5, 10, 16, 23, 30};
    std::vector<double> epsilons = {1.0, 2.0, 5.0, 10.0, 20.0};
    Prior prior = Prior::uniform(0.005, 10.0);
    // 20 sequences: with fewer, the local-linear adjustment on the gap prior
    // never relocates its posterior peak into the gap, so the pathology the
    // grid is meant to expose does not show up.
    int n_seq = 20;
    long long n_retained = 5000;
    int replicates = 25;
    long long max_proposals = 50000000;
    std::uint64_t seed = 1;
    int workers = 1;
    int grid_points = 512;
    // Smoothing knobs swept per method; the best (smallest grand-mean L1)
    // value per method is what the cells report.
    std::vector<double> glm_scales = {1.0, 5.0, 25.0, 125.0};
    std::vector<double> kde_multipliers = {0.5, 1.0, 2.0};
};

struct CompareCellRow {
    std::string method;  // "rejection" | "reg" | "glm"
    long s_obs = 0;
    double epsilon = 0.0;
    double mean_l1 = 0.0;
    double stderr_l1 = 0.0;
    bool worse_than_prior = false;
    bool incomplete = false;
    double prior_l1 = 0.0;
};

struct CompareDiagnosticsRow {
    long s_obs = 0;
    double epsilon = 0.0;
    int replicate = 0;
    bool complete = false;
    double reg_argmax = 0.0;    // at the chosen REG multiplier
    double glm_gap_mass = 0.0;  // mass the GLM curve puts into prior gaps, chosen scale
};

struct CompareResult {
    std::vector<CompareCellRow> cells;
    std::vector<CompareDiagnosticsRow> diagnostics;
    double grand_mean_rejection = 0.0;
    double grand_mean_reg = 0.0;
    double grand_mean_glm = 0.0;
    double chosen_rejection_multiplier = 1.0;
    double chosen_reg_multiplier = 1.0;
    double chosen_glm_scale = 1.0;
    int incomplete_replicates = 0;
};

namespace detail {

struct CompareRepResult {
    bool complete = false;
    std::vector<double> rejection_l1;
    std::vector<double> reg_l1;
    std::vector<double> reg_argmax;
    std::vector<double> glm_l1;
    std::vector<double> glm_gap_mass;
};

inline std::uint64_t compare_rep_seed(std::uint64_t seed, std::size_t cell, int replicate) {
    return derive_seed(seed, cell * 0x100000000ull + static_cast<std::uint64_t>(replicate));
}

/// Gaps of a 1-D support: the open intervals between consecutive pieces.
inline std::vector<Interval> support_gaps(const Support& support) {
    std::vector<Interval> gaps;
    const auto& pieces = support.intervals();
    for (std::size_t i = 1; i < pieces.size(); ++i)
        gaps.push_back(Interval{pieces[i - 1].hi, pieces[i].lo});
    return gaps;
}

}  // namespace detail

/// One replicate of one grid cell, at fixed smoothing knobs. Reuses the run's
/// seed derivation, so curves match what the grid run scored.
struct CellCurves {
    DensityCurve analytic;
    DensityCurve rejection;
    DensityCurve reg;
    DensityCurve glm;
};

namespace detail {

struct CompareContext {
    const CompareConfig* config;
    CoalescentToyModel model;
    ParameterDomain domain;
    Support prior_support;
    Support hull_support;
    std::vector<double> grid;
    std::vector<DensityCurve> analytic_by_s;  // per s_obs_values entry
    std::vector<double> prior_l1_by_s;
    std::vector<Interval> gaps;

    explicit CompareContext(const CompareConfig& cfg)
        : config(&cfg),
          model(cfg.n_seq),
          domain(cfg.prior.domain()),
          prior_support(domain.support(0)),
          hull_support(Support::interval(domain.support(0).hull().lo,
                                         domain.support(0).hull().hi)),
          grid(uniform_grid_vector(domain.support(0).hull().lo, domain.support(0).hull().hi,
                                   cfg.grid_points)) {
        if (cfg.prior.dim() != 1)
            throw ValidationError("run_comparison_grid: the toy comparison is 1-D");
        if (cfg.s_obs_values.empty() || cfg.epsilons.empty() || cfg.replicates < 1)
            throw ValidationError("run_comparison_grid: empty grid or no replicates");
        gaps = support_gaps(prior_support);
        std::vector<double> prior_values(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i)
            prior_values[i] = cfg.prior.component_density(0, grid[i]);
        const DensityCurve prior_curve =
            make_density_curve(grid, std::move(prior_values), prior_support);
        for (long s : cfg.s_obs_values) {
            analytic_by_s.push_back(analytic_posterior(s, cfg.prior, cfg.n_seq, grid));
            prior_l1_by_s.push_back(l1_distance(analytic_by_s.back(), prior_curve));
        }
    }

    std::size_t cell_count() const {
        return config->s_obs_values.size() * config->epsilons.size();
    }
    long cell_s_obs(std::size_t cell) const {
        return config->s_obs_values[cell / config->epsilons.size()];
    }
    double cell_epsilon(std::size_t cell) const {
        return config->epsilons[cell % config->epsilons.size()];
    }

    ReferenceTable sample_cell(std::size_t cell, int replicate) const {
        const Vector s_vec = Vector::Constant(1, static_cast<double>(cell_s_obs(cell)));
        FixedEpsilon mode;
        mode.epsilon = cell_epsilon(cell);
        mode.target_n = config->n_retained;
        mode.max_proposals = config->max_proposals;
        return run_rejection(model, config->prior, s_vec, DistanceSpec::euclidean(), mode,
                             compare_rep_seed(config->seed, cell, replicate), 1);
    }

    double gap_mass(const DensityCurve& curve) const {
        double mass = 0.0;
        for (const Interval& gap : gaps) mass += curve_mass(curve, gap.lo, gap.hi);
        return mass;
    }
};

/// Integer-valued statistics under a tight tolerance can leave every retained
/// column constant; the local-linear design is then singular and there is
/// nothing to adjust, so the draws pass through unchanged.
inline Matrix adjusted_params(const ReferenceTable& table, const Vector& s_obs,
                              const ParameterDomain& domain) {
    for (int k = 0; k < table.stat_dim(); ++k)
        if (table.stats.col(k).maxCoeff() != table.stats.col(k).minCoeff())
            return reg_adjust(table, s_obs, hamilton_hull_transform(domain)).adjusted;
    return table.params;
}

inline CompareRepResult run_cell_replicate(const CompareContext& ctx, std::size_t cell,
                                           int replicate) {
    const CompareConfig& cfg = *ctx.config;
    CompareRepResult res;
    ReferenceTable table;
    try {
        table = ctx.sample_cell(cell, replicate);
    } catch (const EmptyTableError&) {
        return res;
    }
    if (table.size() < cfg.n_retained) return res;  // proposal cap hit
    res.complete = true;

    const DensityCurve& analytic = ctx.analytic_by_s[cell / cfg.epsilons.size()];
    const Vector s_vec = table.s_obs;

    const std::vector<double> raw(table.params.col(0).begin(), table.params.col(0).end());
    for (double mult : cfg.kde_multipliers) {
        const DensityCurve curve = kde_posterior(raw, ctx.prior_support, 0.0, ctx.grid, mult);
        res.rejection_l1.push_back(l1_distance(curve, analytic));
    }

    const Matrix adjusted_mat = adjusted_params(table, s_vec, ctx.domain);
    const std::vector<double> adjusted(adjusted_mat.col(0).begin(), adjusted_mat.col(0).end());
    for (double mult : cfg.kde_multipliers) {
        const DensityCurve curve = kde_posterior(adjusted, ctx.hull_support, 0.0, ctx.grid, mult);
        res.reg_l1.push_back(l1_distance(curve, analytic));
        res.reg_argmax.push_back(curve_argmax(curve));
    }

    const GlmFit fit = regularize_fit(fit_glm(table), table.stats);
    for (double scale : cfg.glm_scales) {
        const SmoothingSpec smoothing = choose_smoothing(table, ctx.domain, scale);
        const PosteriorMixture mixture =
            build_posterior(fit, smoothing, table, s_vec, ctx.domain);
        const DensityCurve curve = marginal_posterior(mixture, 0, ctx.grid);
        res.glm_l1.push_back(l1_distance(curve, analytic));
        res.glm_gap_mass.push_back(ctx.gap_mass(curve));
    }
    return res;
}

}  // namespace detail

inline CompareResult run_comparison_grid(const CompareConfig& config) {
    const detail::CompareContext ctx(config);
    const std::size_t cells = ctx.cell_count();
    const std::size_t reps = static_cast<std::size_t>(config.replicates);

    std::vector<detail::CompareRepResult> results(cells * reps);
    {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t job = next.fetch_add(1);
                if (job >= results.size()) return;
                results[job] =
                    detail::run_cell_replicate(ctx, job / reps, static_cast<int>(job % reps));
            }
        };
        const int nthreads = std::max(1, config.workers);
        if (nthreads == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
            for (std::thread& t : pool) t.join();
        }
    }

    CompareResult out;
    for (const auto& r : results)
        if (!r.complete) ++out.incomplete_replicates;

    // Pick each method's smoothing knob by the grand mean over every complete
    // replicate of every cell (the bandwidth policy the paper tunes by hand).
    auto choose = [&](auto member, std::size_t knobs) {
        std::size_t best = 0;
        double best_mean = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < knobs; ++k) {
            double sum = 0.0;
            long count = 0;
            for (const auto& r : results) {
                if (!r.complete) continue;
                sum += (r.*member)[k];
                ++count;
            }
            if (count == 0) continue;
            const double mean = sum / count;
            if (mean < best_mean) {
                best_mean = mean;
                best = k;
            }
        }
        return best;
    };
    const std::size_t rej_k =
        choose(&detail::CompareRepResult::rejection_l1, config.kde_multipliers.size());
    const std::size_t reg_k =
        choose(&detail::CompareRepResult::reg_l1, config.kde_multipliers.size());
    const std::size_t glm_k = choose(&detail::CompareRepResult::glm_l1, config.glm_scales.size());
    out.chosen_rejection_multiplier = config.kde_multipliers[rej_k];
    out.chosen_reg_multiplier = config.kde_multipliers[reg_k];
    out.chosen_glm_scale = config.glm_scales[glm_k];

    auto cell_stats = [&](std::size_t cell, auto member, std::size_t knob) {
        double sum = 0.0, sumsq = 0.0;
        long count = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& res = results[cell * reps + r];
            if (!res.complete) continue;
            const double v = (res.*member)[knob];
            sum += v;
            sumsq += v * v;
            ++count;
        }
        double mean = count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
        double stderr_mean = 0.0;
        if (count > 1) {
            const double var = (sumsq - sum * sum / count) / (count - 1);
            stderr_mean = std::sqrt(std::max(var, 0.0) / count);
        }
        return std::pair<double, double>(mean, stderr_mean);
    };

    struct MethodSpec {
        const char* name;
        std::vector<double> detail::CompareRepResult::* member;
        std::size_t knob;
    };
    const MethodSpec methods[] = {
        {"rejection", &detail::CompareRepResult::rejection_l1, rej_k},
        {"reg", &detail::CompareRepResult::reg_l1, reg_k},
        {"glm", &detail::CompareRepResult::glm_l1, glm_k},
    };

    double grand[3] = {0.0, 0.0, 0.0};
    int grand_cells = 0;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        bool cell_incomplete = false;
        for (std::size_t r = 0; r < reps; ++r)
            if (!results[cell * reps + r].complete) cell_incomplete = true;

        bool any_complete = false;
        for (std::size_t r = 0; r < reps; ++r)
            if (results[cell * reps + r].complete) any_complete = true;

        if (any_complete) ++grand_cells;
        for (int mi = 0; mi < 3; ++mi) {
            const auto [mean, se] = cell_stats(cell, methods[mi].member, methods[mi].knob);
            CompareCellRow row;
            row.method = methods[mi].name;
            row.s_obs = ctx.cell_s_obs(cell);
            row.epsilon = ctx.cell_epsilon(cell);
            row.mean_l1 = mean;
            row.stderr_l1 = se;
            row.prior_l1 = ctx.prior_l1_by_s[cell / config.epsilons.size()];
            row.worse_than_prior = any_complete && mean > row.prior_l1;
            row.incomplete = cell_incomplete;
            out.cells.push_back(row);
            if (any_complete) grand[mi] += mean;
        }
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& res = results[cell * reps + r];
            CompareDiagnosticsRow d;
            d.s_obs = ctx.cell_s_obs(cell);
            d.epsilon = ctx.cell_epsilon(cell);
            d.replicate = static_cast<int>(r);
            d.complete = res.complete;
            if (res.complete) {
                d.reg_argmax = res.reg_argmax[reg_k];
                d.glm_gap_mass = res.glm_gap_mass[glm_k];
            }
            out.diagnostics.push_back(d);
        }
    }
    if (grand_cells > 0) {
        out.grand_mean_rejection = grand[0] / grand_cells;
        out.grand_mean_reg = grand[1] / grand_cells;
        out.grand_mean_glm = grand[2] / grand_cells;
    }
    return out;
}

/// Recomputes the four curves of one (cell, replicate) at explicit knobs.
inline CellCurves compute_cell_curves(const CompareConfig& config, long s_obs, double epsilon,
                                      int replicate, double glm_scale, double rejection_mult,
                                      double reg_mult) {
    const detail::CompareContext ctx(config);
    std::size_t cell = ctx.cell_count();
    for (std::size_t c = 0; c < ctx.cell_count(); ++c)
        if (ctx.cell_s_obs(c) == s_obs && ctx.cell_epsilon(c) == epsilon) cell = c;
    if (cell == ctx.cell_count())
        throw ValidationError("compute_cell_curves: (s_obs, epsilon) not in the grid");

    const ReferenceTable table = ctx.sample_cell(cell, replicate);
    const std::vector<double> raw(table.params.col(0).begin(), table.params.col(0).end());
    const Matrix adjusted_mat = detail::adjusted_params(table, table.s_obs, ctx.domain);
    const std::vector<double> adjusted(adjusted_mat.col(0).begin(), adjusted_mat.col(0).end());
    const GlmFit fit = regularize_fit(fit_glm(table), table.stats);
    const SmoothingSpec smoothing = choose_smoothing(table, ctx.domain, glm_scale);
    const PosteriorMixture mixture =
        build_posterior(fit, smoothing, table, table.s_obs, ctx.domain);

    return CellCurves{
        ctx.analytic_by_s[cell / config.epsilons.size()],
        kde_posterior(raw, ctx.prior_support, 0.0, ctx.grid, rejection_mult),
        kde_posterior(adjusted, ctx.hull_support, 0.0, ctx.grid, reg_mult),
        marginal_posterior(mixture, 0, ctx.grid),
    };
}

}  // namespace abcglm
