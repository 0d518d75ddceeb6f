#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "abcglm/glm.hpp"
#include "abcglm/sampler.hpp"

namespace abcglm {

struct MarginalDensityEstimate {
    double value = 0.0;
    double log_value = kNegInf;
    double acceptance_rate = 0.0;
    double acceptance_rate_stderr = 0.0;
    long long N = 0;
    bool degenerate_zero = false;  // A_eps = 0: no acceptances to build on
};

/// Acceptance estimate implied by a reference table's own metadata.
inline AcceptanceEstimate acceptance_from_table(const ReferenceTable& table) {
    AcceptanceEstimate est;
    est.accepted = table.size();
    est.proposals = table.total_proposals;
    est.rate = table.acceptance_rate();
    est.stderr_rate =
        std::sqrt(est.rate * (1.0 - est.rate) / static_cast<double>(table.total_proposals));
    est.degenerate_zero = est.accepted == 0;
    return est;
}

/// Marginal density of the model at s_obs:
///   f = (A_eps / (N |2 pi D|^{1/2})) sum_j exp(-1/2 (s_obs-m^j)' D^{-1} (s_obs-m^j)),
/// D = Sigma_s + C Sigma_theta C', m^j = c0 + C theta^j. Log-domain throughout.
inline MarginalDensityEstimate model_marginal_density(const GlmFit& fit_in,
                                                      const SmoothingSpec& smoothing,
                                                      const ReferenceTable& table,
                                                      const Vector& s_obs,
                                                      const AcceptanceEstimate& acceptance) {
    const int m = table.param_dim();
    const int n = table.stat_dim();
    if (s_obs.size() != n)
        throw ValidationError("model_marginal_density: s_obs dimension mismatch");
    if (smoothing.sigma.size() != m)
        throw ValidationError("model_marginal_density: smoothing dimension mismatch");

    MarginalDensityEstimate est;
    est.acceptance_rate = acceptance.rate;
    est.acceptance_rate_stderr = acceptance.stderr_rate;
    est.N = table.size();
    if (acceptance.degenerate_zero || acceptance.rate == 0.0) {
        est.degenerate_zero = true;
        return est;
    }

    const GlmFit fit = regularize_fit(fit_in, table.stats);
    Matrix D = fit.Sigma_s;
    D.noalias() += fit.C * smoothing.variance().asDiagonal() * fit.C.transpose();
    Eigen::LLT<Matrix> llt(D);
    if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() <= 0.0)
        throw NumericalError("model_marginal_density: D = Sigma_s + C Sigma_theta C' singular");

    double log_det_sqrt = 0.0;
    for (int k = 0; k < n; ++k) log_det_sqrt += std::log(llt.matrixLLT()(k, k));

    LogSumExp lse;
    Vector r(n);
    for (long long j = 0; j < table.size(); ++j) {
        r = s_obs - fit.c0 - fit.C * table.params.row(j).transpose();
        lse.add(-0.5 * llt.matrixL().solve(r).squaredNorm());
    }

    est.log_value = std::log(acceptance.rate) - std::log(static_cast<double>(table.size())) -
                    0.5 * n * kLogTwoPi - log_det_sqrt + lse.value();
    est.value = std::exp(est.log_value);
    return est;
}

struct BayesFactorResult {
    double B_AB = 0.0;
    double log_B_AB = 0.0;
    double posterior_prob_A = 0.0;
    double prior_prob_A = 0.5;
    bool infinite = false;  // denominator model degenerate-zero
};

/// B_AB = f_A(s_obs) / f_B(s_obs) in log space; posterior model probability
/// B pi_A / (B pi_A + pi_B).
inline BayesFactorResult bayes_factor(const MarginalDensityEstimate& est_A,
                                      const MarginalDensityEstimate& est_B,
                                      double prior_prob_A = 0.5) {
    if (!(prior_prob_A > 0.0 && prior_prob_A < 1.0))
        throw ValidationError("bayes_factor: prior_prob_A must be in (0,1)");
    BayesFactorResult result;
    result.prior_prob_A = prior_prob_A;
    if (est_B.degenerate_zero) {
        if (est_A.degenerate_zero)
            throw NumericalError("bayes_factor: both marginal densities are degenerate zero");
        result.infinite = true;
        result.B_AB = std::numeric_limits<double>::infinity();
        result.log_B_AB = std::numeric_limits<double>::infinity();
        result.posterior_prob_A = 1.0;
        return result;
    }
    result.log_B_AB = est_A.log_value - est_B.log_value;
    result.B_AB = std::exp(result.log_B_AB);
    const double log_prior_odds = std::log(prior_prob_A) - std::log1p(-prior_prob_A);
    const double log_odds = result.log_B_AB + log_prior_odds;
    result.posterior_prob_A = 1.0 / (1.0 + std::exp(-log_odds));
    return result;
}

struct SweepPoint {
    double acceptance_rate = 0.0;
    double log_bayes_factor = 0.0;
    long long n_retained = 0;
    std::string flag;  // "ok" or "unreliable"
};

struct StabilitySweepConfig {
    std::vector<double> acceptance_rates;
    long long budget = 100000;
    std::uint64_t seed = 1;
    int workers = 1;
    double glm_scale = 1.0;
    bool nested = true;  // false: independent proposals per sweep point
};

/// Bayes factor as a function of the acceptance rate: each target A_eps keeps
/// the N = round(A_eps * budget) closest proposals of a fixed budget (nested
/// subsets of one proposal stream by default), fits both models' GLMs, and
/// evaluates the marginal densities. Both models see the same seed policy.
inline std::vector<SweepPoint> stability_sweep(const SimulableModel& model_A,
                                               const Prior& prior_A,
                                               const SimulableModel& model_B,
                                               const Prior& prior_B, const Vector& s_obs,
                                               const StabilitySweepConfig& config) {
    if (config.acceptance_rates.empty())
        throw ValidationError("stability_sweep: needs at least one acceptance rate");
    for (double rate : config.acceptance_rates)
        if (!(rate > 0.0 && rate <= 1.0))
            throw ValidationError("stability_sweep: acceptance rates must be in (0,1]");
    if (config.budget < 1) throw ValidationError("stability_sweep: budget must be >= 1");

    const DistanceSpec spec = DistanceSpec::euclidean();
    const ParameterDomain domain_A = prior_A.domain();
    const ParameterDomain domain_B = prior_B.domain();

    ProposalSet all_A, all_B;
    if (config.nested) {
        all_A = run_all_proposals(model_A, prior_A, s_obs, spec, config.budget, config.seed,
                                  config.workers);
        all_B = run_all_proposals(model_B, prior_B, s_obs, spec, config.budget, config.seed,
                                  config.workers);
    }

    // A retained table whose statistics never vary (every accepted draw produced the
    // same summaries, typical for integer-valued statistics at tiny retention counts)
    // yields a floored covariance whose marginal density tracks the floor, not the
    // data.  Still computed, but flagged.
    auto log_marginal = [&](const ProposalSet& set, const ParameterDomain& domain,
                            long long n_keep, bool& degenerate) {
        const ReferenceTable table = retain_best_subset(set, n_keep);
        for (int k = 0; k < table.stat_dim(); ++k)
            if (table.stats.col(k).maxCoeff() == table.stats.col(k).minCoeff())
                degenerate = true;
        const GlmFit fit = fit_glm(table);
        const SmoothingSpec smoothing = choose_smoothing(table, domain, config.glm_scale);
        AcceptanceEstimate acc;
        acc.accepted = table.size();
        acc.proposals = table.total_proposals;
        acc.rate = table.acceptance_rate();
        acc.stderr_rate = std::sqrt(acc.rate * (1.0 - acc.rate) /
                                    static_cast<double>(table.total_proposals));
        return model_marginal_density(fit, smoothing, table, s_obs, acc).log_value;
    };

    std::vector<SweepPoint> points;
    points.reserve(config.acceptance_rates.size());
    for (std::size_t i = 0; i < config.acceptance_rates.size(); ++i) {
        const double rate = config.acceptance_rates[i];
        SweepPoint point;
        point.acceptance_rate = rate;
        point.n_retained = std::llround(rate * static_cast<double>(config.budget));
        point.n_retained = std::min(point.n_retained, config.budget);
        const long long min_rows =
            std::max(model_A.param_dim(), model_B.param_dim()) + 2;
        if (point.n_retained < min_rows) {
            point.flag = "unreliable";
            point.log_bayes_factor = std::numeric_limits<double>::quiet_NaN();
            points.push_back(point);
            continue;
        }
        bool degenerate = false;
        if (config.nested) {
            point.log_bayes_factor =
                log_marginal(all_A, domain_A, point.n_retained, degenerate) -
                log_marginal(all_B, domain_B, point.n_retained, degenerate);
        } else {
            const std::uint64_t seed_i = derive_seed(config.seed, 0xA11 + i);
            const ProposalSet ind_A = run_all_proposals(model_A, prior_A, s_obs, spec,
                                                        config.budget, seed_i, config.workers);
            const ProposalSet ind_B = run_all_proposals(model_B, prior_B, s_obs, spec,
                                                        config.budget, seed_i, config.workers);
            point.log_bayes_factor =
                log_marginal(ind_A, domain_A, point.n_retained, degenerate) -
                log_marginal(ind_B, domain_B, point.n_retained, degenerate);
        }
        point.flag = degenerate ? "unreliable" : "ok";
        points.push_back(point);
    }
    return points;
}

}  // namespace abcglm
