#pragma once

#include <algorithm>
#include <thread>
#include <variant>
#include <vector>

#include "abcglm/distance.hpp"
#include "abcglm/errors.hpp"
#include "abcglm/model.hpp"
#include "abcglm/prior.hpp"
#include "abcglm/random.hpp"
#include "abcglm/table.hpp"

namespace abcglm {

struct FixedEpsilon {
    double epsilon = 0.0;
    long long target_n = 0;  // 0: no target, run all max_proposals
    long long max_proposals = 0;
};

struct RetainBest {
    long long n_keep = 0;
    long long budget = 0;
};

using SamplerMode = std::variant<FixedEpsilon, RetainBest>;

namespace detail {

struct ProposalBlock {
    Matrix thetas;  // B x m
    Matrix stats;   // B x n
    std::vector<double> dist;
};

/// Evaluates proposals [lo, lo+count). Proposal i draws from its own
/// counter-based stream (seed, i), so any partition across workers yields
/// identical results.
inline void evaluate_proposals(const SimulableModel& model, const Prior& prior,
                               const Vector& s_obs, const DistanceFn& dist_fn,
                               std::uint64_t seed, long long lo, long long count, int workers,
                               ProposalBlock& block) {
    const int m = model.param_dim();
    const int n = model.stat_dim();
    if (block.thetas.rows() < count) {
        block.thetas.resize(count, m);
        block.stats.resize(count, n);
        block.dist.resize(static_cast<std::size_t>(count));
    }

    auto run_range = [&](long long a, long long b) {
        Vector theta(m), s(n);
        for (long long i = a; i < b; ++i) {
            RandomStream stream(seed, static_cast<std::uint64_t>(lo + i));
            prior.sample_into(stream, theta);
            model.simulate(theta, stream, s);
            block.thetas.row(i) = theta.transpose();
            block.stats.row(i) = s.transpose();
            block.dist[static_cast<std::size_t>(i)] = dist_fn(s, s_obs);
        }
    };

    const int nthreads = std::max(1, workers);
    if (nthreads == 1 || count < 2 * nthreads) {
        run_range(0, count);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    const long long chunk = (count + nthreads - 1) / nthreads;
    for (int w = 0; w < nthreads; ++w) {
        const long long a = w * chunk;
        const long long b = std::min(count, a + chunk);
        if (a >= b) break;
        pool.emplace_back(run_range, a, b);
    }
    for (std::thread& t : pool) t.join();
}

constexpr long long kBlockSize = 8192;

}  // namespace detail

/// All proposals of a fixed budget, kept in proposal order. Backs the
/// nested-subset acceptance-rate sweep and the tolerance-monotonicity checks.
struct ProposalSet {
    Matrix thetas;  // budget x m
    Matrix stats;   // budget x n
    std::vector<double> dist;
    Vector s_obs;
    DistanceSpec spec;
    std::uint64_t seed = 0;
};

inline ProposalSet run_all_proposals(const SimulableModel& model, const Prior& prior,
                                     const Vector& s_obs, const DistanceSpec& spec,
                                     long long budget, std::uint64_t seed, int workers = 1) {
    if (budget < 1) throw ValidationError("run_all_proposals: budget must be >= 1");
    const DistanceFn dist_fn(spec);
    ProposalSet set;
    set.thetas.resize(budget, model.param_dim());
    set.stats.resize(budget, model.stat_dim());
    set.dist.resize(static_cast<std::size_t>(budget));
    set.s_obs = s_obs;
    set.spec = spec;
    set.seed = seed;

    detail::ProposalBlock block;
    for (long long lo = 0; lo < budget; lo += detail::kBlockSize) {
        const long long count = std::min(detail::kBlockSize, budget - lo);
        detail::evaluate_proposals(model, prior, s_obs, dist_fn, seed, lo, count, workers, block);
        set.thetas.middleRows(lo, count) = block.thetas.topRows(count);
        set.stats.middleRows(lo, count) = block.stats.topRows(count);
        std::copy(block.dist.begin(), block.dist.begin() + count,
                  set.dist.begin() + static_cast<std::ptrdiff_t>(lo));
    }
    return set;
}

/// The n_keep proposals with the smallest (distance, index); epsilon is the
/// largest retained distance.
inline ReferenceTable retain_best_subset(const ProposalSet& set, long long n_keep) {
    const long long budget = set.thetas.rows();
    if (n_keep < 1 || n_keep > budget)
        throw ValidationError("retain_best_subset: n_keep must be in [1, budget]");

    std::vector<long long> order(static_cast<std::size_t>(budget));
    for (long long i = 0; i < budget; ++i) order[static_cast<std::size_t>(i)] = i;
    auto better = [&set](long long a, long long b) {
        const double da = set.dist[static_cast<std::size_t>(a)];
        const double db = set.dist[static_cast<std::size_t>(b)];
        return da != db ? da < db : a < b;
    };
    std::nth_element(order.begin(), order.begin() + (n_keep - 1), order.end(), better);
    order.resize(static_cast<std::size_t>(n_keep));
    std::sort(order.begin(), order.end());  // proposal order in the table

    ReferenceTable table;
    table.params.resize(n_keep, set.thetas.cols());
    table.stats.resize(n_keep, set.stats.cols());
    double max_dist = 0.0;
    for (long long r = 0; r < n_keep; ++r) {
        const long long i = order[static_cast<std::size_t>(r)];
        table.params.row(r) = set.thetas.row(i);
        table.stats.row(r) = set.stats.row(i);
        max_dist = std::max(max_dist, set.dist[static_cast<std::size_t>(i)]);
    }
    table.total_proposals = budget;
    table.epsilon = max_dist;
    table.s_obs = set.s_obs;
    table.distance_kind = set.spec.kind;
    table.distance_covariance = set.spec.covariance;
    table.seed = set.seed;
    return table;
}

/// ABC rejection sampling (GLM1). Deterministic for fixed (seed, config),
/// independent of worker count.
inline ReferenceTable run_rejection(const SimulableModel& model, const Prior& prior,
                                    const Vector& s_obs, const DistanceSpec& spec,
                                    const SamplerMode& mode, std::uint64_t seed,
                                    int workers = 1) {
    if (prior.dim() != model.param_dim())
        throw ValidationError("run_rejection: prior dimension does not match the model");
    if (s_obs.size() != model.stat_dim())
        throw ValidationError("run_rejection: s_obs dimension does not match the model");

    if (const auto* rb = std::get_if<RetainBest>(&mode)) {
        if (rb->budget < 1) throw ValidationError("run_rejection: budget must be >= 1");
        return retain_best_subset(
            run_all_proposals(model, prior, s_obs, spec, rb->budget, seed, workers), rb->n_keep);
    }

    const auto& fe = std::get<FixedEpsilon>(mode);
    if (!(fe.epsilon > 0.0)) throw ValidationError("run_rejection: epsilon must be > 0");
    if (fe.max_proposals < 1) throw ValidationError("run_rejection: max_proposals must be >= 1");
    if (fe.target_n < 0) throw ValidationError("run_rejection: target_n must be >= 0");

    const DistanceFn dist_fn(spec);
    std::vector<Vector> acc_theta, acc_stat;
    long long total = 0;

    detail::ProposalBlock block;
    for (long long lo = 0; lo < fe.max_proposals && total == 0; lo += detail::kBlockSize) {
        const long long count = std::min(detail::kBlockSize, fe.max_proposals - lo);
        detail::evaluate_proposals(model, prior, s_obs, dist_fn, seed, lo, count, workers, block);
        for (long long i = 0; i < count; ++i) {
            if (block.dist[static_cast<std::size_t>(i)] < fe.epsilon) {
                acc_theta.push_back(block.thetas.row(i).transpose());
                acc_stat.push_back(block.stats.row(i).transpose());
                if (fe.target_n > 0 &&
                    static_cast<long long>(acc_theta.size()) == fe.target_n) {
                    total = lo + i + 1;  // stop at the Nth acceptance
                    break;
                }
            }
        }
    }
    if (total == 0) total = fe.max_proposals;  // cap reached

    if (acc_theta.empty())
        throw EmptyTableError("run_rejection: no proposals accepted within the cap", total);

    ReferenceTable table;
    const long long N = static_cast<long long>(acc_theta.size());
    table.params.resize(N, model.param_dim());
    table.stats.resize(N, model.stat_dim());
    for (long long i = 0; i < N; ++i) {
        table.params.row(i) = acc_theta[static_cast<std::size_t>(i)].transpose();
        table.stats.row(i) = acc_stat[static_cast<std::size_t>(i)].transpose();
    }
    table.total_proposals = total;
    table.epsilon = fe.epsilon;
    table.s_obs = s_obs;
    table.distance_kind = spec.kind;
    table.distance_covariance = spec.covariance;
    table.seed = seed;
    return table;
}

/// Covariance of simulated statistics from a pilot run; feeds the
/// Mahalanobis distance.
inline Matrix pilot_covariance(const SimulableModel& model, const Prior& prior,
                               long long proposals, std::uint64_t seed, int workers = 1) {
    if (proposals < 2) throw ValidationError("pilot_covariance: needs at least 2 proposals");
    const Vector dummy_obs = Vector::Zero(model.stat_dim());
    const ProposalSet set = run_all_proposals(model, prior, dummy_obs,
                                              DistanceSpec::euclidean(), proposals,
                                              derive_seed(seed, 0x70696C6F74ull), workers);
    const Matrix centered = set.stats.rowwise() - set.stats.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(proposals - 1);
}

/// Fraction of `proposals` falling into the epsilon-ball, with its standard
/// error sqrt(A(1-A)/proposals).
struct AcceptanceEstimate {
    double rate = 0.0;
    double stderr_rate = 0.0;
    long long accepted = 0;
    long long proposals = 0;
    bool degenerate_zero = false;
};

inline AcceptanceEstimate estimate_acceptance_rate(const SimulableModel& model, const Prior& prior,
                                                   const Vector& s_obs, const DistanceSpec& spec,
                                                   double epsilon, long long proposals,
                                                   std::uint64_t seed, int workers = 1) {
    if (proposals < 1) throw ValidationError("estimate_acceptance_rate: proposals must be >= 1");
    if (!(epsilon > 0.0)) throw ValidationError("estimate_acceptance_rate: epsilon must be > 0");
    const DistanceFn dist_fn(spec);
    long long accepted = 0;
    detail::ProposalBlock block;
    for (long long lo = 0; lo < proposals; lo += detail::kBlockSize) {
        const long long count = std::min(detail::kBlockSize, proposals - lo);
        detail::evaluate_proposals(model, prior, s_obs, dist_fn, seed, lo, count, workers, block);
        for (long long i = 0; i < count; ++i)
            if (block.dist[static_cast<std::size_t>(i)] < epsilon) ++accepted;
    }
    AcceptanceEstimate est;
    est.accepted = accepted;
    est.proposals = proposals;
    est.rate = static_cast<double>(accepted) / static_cast<double>(proposals);
    est.stderr_rate = std::sqrt(est.rate * (1.0 - est.rate) / static_cast<double>(proposals));
    est.degenerate_zero = accepted == 0;
    return est;
}

}  // namespace abcglm
