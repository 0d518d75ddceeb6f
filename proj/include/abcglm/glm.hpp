#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "abcglm/density_curve.hpp"
#include "abcglm/errors.hpp"
#include "abcglm/numerics.hpp"
#include "abcglm/random.hpp"
#include "abcglm/support.hpp"
#include "abcglm/table.hpp"

namespace abcglm {

/// Estimated truncated model s | theta = C theta + c0 + eps, eps ~ N(0, Sigma_s).
struct GlmFit {
    Matrix C;        // n x m
    Vector c0;       // n
    Matrix Sigma_s;  // n x n, symmetric PSD
};

/// Multivariate OLS of statistics on parameters: (c0 | C) = S X (X^T X)^{-1}
/// with X = (1 | P^T); residual covariance (1/(N-m)) R^T R.
inline GlmFit fit_glm(const Matrix& params, const Matrix& stats) {
    const long long N = params.rows();
    const int m = static_cast<int>(params.cols());
    if (stats.rows() != N) throw ValidationError("fit_glm: params/stats row mismatch");
    if (N < m + 2)
        throw ValidationError("fit_glm: needs at least m + 2 rows, got " + std::to_string(N));

    Matrix X(N, m + 1);
    X.col(0).setOnes();
    X.rightCols(m) = params;

    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    if (qr.rank() < m + 1) {
        const auto perm = qr.colsPermutation().indices();
        std::string cols;
        for (int i = qr.rank(); i < m + 1; ++i) {
            if (!cols.empty()) cols += ", ";
            const int orig = perm[i];
            cols += orig == 0 ? "intercept" : "theta_" + std::to_string(orig);
        }
        throw ValidationError("fit_glm: design matrix is rank deficient; collinear columns: " +
                              cols);
    }

    const Matrix coef = qr.solve(stats);  // (m+1) x n
    const Matrix residuals = stats - X * coef;

    GlmFit fit;
    fit.c0 = coef.row(0).transpose();
    fit.C = coef.bottomRows(m).transpose();
    fit.Sigma_s = residuals.transpose() * residuals / static_cast<double>(N - m);
    return fit;
}

inline GlmFit fit_glm(const ReferenceTable& table) { return fit_glm(table.params, table.stats); }

/// Gaussian-peak widths: per-dimension standard deviations sigma_k.
struct SmoothingSpec {
    Vector sigma;

    Vector variance() const { return sigma.array().square(); }
};

/// sigma_k = scale * range_k / N, the 1/N rule expressed on the dimension's
/// outer support length.
inline SmoothingSpec choose_smoothing(const ReferenceTable& table, const ParameterDomain& domain,
                                      double scale = 1.0) {
    if (!(scale > 0.0)) throw ValidationError("choose_smoothing: scale must be > 0");
    if (domain.dim() != table.param_dim())
        throw ValidationError("choose_smoothing: domain dimension does not match the table");
    SmoothingSpec spec;
    spec.sigma.resize(domain.dim());
    for (int k = 0; k < domain.dim(); ++k)
        spec.sigma[k] = scale * domain.range(k) / static_cast<double>(table.size());
    return spec;
}

/// log of (1/N) sum_j phi(theta - theta^j, Sigma_theta): the smoothed
/// truncated prior, evaluated by log-sum-exp.
inline double log_truncated_prior_density(const ReferenceTable& table, const SmoothingSpec& spec,
                                          const Vector& theta) {
    const int m = table.param_dim();
    if (theta.size() != m || spec.sigma.size() != m)
        throw ValidationError("truncated_prior_density: dimension mismatch");
    double log_const = -0.5 * m * kLogTwoPi;
    for (int k = 0; k < m; ++k) log_const -= std::log(spec.sigma[k]);

    LogSumExp lse;
    for (long long j = 0; j < table.size(); ++j) {
        double q = 0.0;
        for (int k = 0; k < m; ++k) {
            const double z = (theta[k] - table.params(j, k)) / spec.sigma[k];
            q += z * z;
        }
        lse.add(-0.5 * q);
    }
    return log_const + lse.value() - std::log(static_cast<double>(table.size()));
}

inline double truncated_prior_density(const ReferenceTable& table, const SmoothingSpec& spec,
                                      const Vector& theta) {
    return std::exp(log_truncated_prior_density(table, spec, theta));
}

/// Returns the fit with Sigma_s diagonal-loaded when degenerate: floor of
/// 1e-8 x per-statistic sample variance (1e-12 absolute where that is zero).
/// Applied when the Cholesky fails OR a diagonal entry sits below its floor —
/// the latter catches noiseless fits whose residual "variance" is pure
/// rounding noise (e.g. an integer statistic constant across the table),
/// which would otherwise pass the Cholesky with a garbage, seed-dependent
/// magnitude. Healthy fits are returned untouched, keeping clean closed-form
/// cases exact.
inline GlmFit regularize_fit(GlmFit fit, const Matrix& stats) {
    const Vector mean = stats.colwise().mean();
    Vector floor(fit.Sigma_s.rows());
    bool degenerate = false;
    for (int k = 0; k < fit.Sigma_s.rows(); ++k) {
        const double var =
            (stats.col(k).array() - mean[k]).square().sum() / std::max<double>(1, stats.rows() - 1);
        floor[k] = var > 0.0 ? 1e-8 * var : 1e-12;
        if (!(fit.Sigma_s(k, k) >= floor[k])) degenerate = true;
    }
    if (!degenerate) {
        Eigen::LLT<Matrix> llt(fit.Sigma_s);
        if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0)
            return fit;
    }
    fit.Sigma_s += floor.asDiagonal();
    return fit;
}

/// log N(s; C theta + c0, Sigma_s) — the GLM stand-in for the truncated
/// likelihood f_eps(s | theta).
inline double log_glm_likelihood(const GlmFit& fit, const Vector& theta, const Vector& s) {
    Eigen::LLT<Matrix> llt(fit.Sigma_s);
    if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() <= 0.0)
        throw NumericalError("log_glm_likelihood: Sigma_s is not positive definite");
    const int n = static_cast<int>(fit.Sigma_s.rows());
    const Vector r = s - fit.c0 - fit.C * theta;
    const Vector z = llt.matrixL().solve(r);
    double log_det = 0.0;
    for (int k = 0; k < n; ++k) log_det += std::log(llt.matrixLLT()(k, k));
    return -0.5 * (n * kLogTwoPi + z.squaredNorm()) - log_det;
}

/// The closed-form posterior: an N-component Gaussian mixture with shared
/// covariance T, component means t^j = T v^j, and log-weights log c(theta^j),
/// normalized over the bounded parameter domain.
class PosteriorMixture {
public:
    PosteriorMixture(Matrix T, Eigen::LLT<Matrix> precision_llt, Matrix means,
                     Vector log_weights, ParameterDomain domain, double log_normalizer)
        : T_(std::move(T)),
          precision_llt_(std::move(precision_llt)),
          means_(std::move(means)),
          log_weights_(std::move(log_weights)),
          domain_(std::move(domain)),
          log_normalizer_(log_normalizer) {
        const int m = dim();
        // |T|^{-1/2} = |T^{-1}|^{1/2} = prod_k L_kk for the precision Cholesky.
        log_component_const_ = -0.5 * m * kLogTwoPi;
        for (int k = 0; k < m; ++k)
            log_component_const_ += std::log(precision_llt_.matrixLLT()(k, k));
    }

    int dim() const { return static_cast<int>(T_.rows()); }
    long long components() const { return means_.rows(); }
    const Matrix& T() const { return T_; }
    const Matrix& means() const { return means_; }
    const Vector& log_weights() const { return log_weights_; }
    const ParameterDomain& domain() const { return domain_; }
    double log_normalizer() const { return log_normalizer_; }

    /// Unnormalized log sum_j c_j phi(theta; t^j, T).
    double log_unnormalized_density(const Vector& theta) const {
        if (theta.size() != dim())
            throw ValidationError("posterior_density: dimension mismatch");
        LogSumExp lse;
        Vector diff(dim());
        for (long long j = 0; j < components(); ++j) {
            diff = theta - means_.row(j).transpose();
            // precision = L L^T, so diff' precision diff = |L^T diff|^2
            const Vector z = precision_llt_.matrixU() * diff;
            lse.add(log_weights_[j] - 0.5 * z.squaredNorm());
        }
        return log_component_const_ + lse.value();
    }

    double log_density(const Vector& theta) const {
        return log_unnormalized_density(theta) - log_normalizer_;
    }

    double density(const Vector& theta) const { return std::exp(log_density(theta)); }

private:
    Matrix T_;
    Eigen::LLT<Matrix> precision_llt_;  // Cholesky of T^{-1}
    Matrix means_;                      // N x m
    Vector log_weights_;                // max-shifted to 0
    ParameterDomain domain_;
    double log_normalizer_;
    double log_component_const_;
};

namespace detail {

/// log of integral of phi(x; mean, var) over the support intervals.
inline double log_truncated_normal_mass(double mean, double sd, const Support& support) {
    double mass = 0.0;
    for (const Interval& iv : support.intervals())
        mass += standard_normal_cdf((iv.hi - mean) / sd) - standard_normal_cdf((iv.lo - mean) / sd);
    return mass > 0.0 ? std::log(mass) : kNegInf;
}

/// log of integral of phi(theta; mean, T) over rect = I1 x I2 for a 2-D
/// Gaussian, reduced to a 1-D integral of the conditional CDF difference.
inline double log_bivariate_mass(const Vector& mean, const Matrix& T, const Interval& i1,
                                 const Interval& i2) {
    const double s1 = std::sqrt(T(0, 0));
    const double cond_var = T(1, 1) - T(0, 1) * T(0, 1) / T(0, 0);
    const double cond_sd = std::sqrt(std::max(cond_var, 1e-300));
    const double slope = T(0, 1) / T(0, 0);
    const double lo = std::max(i1.lo, mean[0] - 10.0 * s1);
    const double hi = std::min(i1.hi, mean[0] + 10.0 * s1);
    if (!(lo < hi)) return kNegInf;
    const double mass = integrate_gl(
        [&](double x) {
            const double cm = mean[1] + slope * (x - mean[0]);
            const double inner = standard_normal_cdf((i2.hi - cm) / cond_sd) -
                                 standard_normal_cdf((i2.lo - cm) / cond_sd);
            return standard_normal_pdf((x - mean[0]) / s1) / s1 * inner;
        },
        lo, hi, 8, 48);
    return mass > 0.0 ? std::log(mass) : kNegInf;
}

inline double mixture_log_mass_over_domain(const Matrix& means, const Vector& log_weights,
                                           const Matrix& T,
                                           const Eigen::LLT<Matrix>& precision_llt,
                                           const ParameterDomain& domain) {
    const int m = static_cast<int>(T.rows());
    const long long N = means.rows();
    LogSumExp total;
    if (m == 1) {
        const double sd = std::sqrt(T(0, 0));
        for (long long j = 0; j < N; ++j)
            total.add(log_weights[j] +
                      log_truncated_normal_mass(means(j, 0), sd, domain.support(0)));
        return total.value();
    }
    if (m == 2) {
        for (long long j = 0; j < N; ++j) {
            const Vector mu = means.row(j).transpose();
            LogSumExp per_component;
            for (const Interval& i1 : domain.support(0).intervals())
                for (const Interval& i2 : domain.support(1).intervals())
                    per_component.add(log_bivariate_mass(mu, T, i1, i2));
            total.add(log_weights[j] + per_component.value());
        }
        return total.value();
    }
    // m >= 3: self-normalized Monte Carlo over the domain.
    const long long R = 1 << 17;
    RandomStream stream(0x6d697874757265ull, 0);  // fixed: the estimate must be reproducible
    double log_const = -0.5 * m * kLogTwoPi;
    for (int k = 0; k < m; ++k) log_const += std::log(precision_llt.matrixLLT()(k, k));
    LogSumExp mc;
    Vector theta(m), diff(m);
    for (long long r = 0; r < R; ++r) {
        for (int k = 0; k < m; ++k) {
            // uniform over the union: walk the intervals by length
            const Support& sup = domain.support(k);
            double pos = stream.uniform01() * sup.total_length();
            double x = sup.intervals().back().hi;
            for (const Interval& iv : sup.intervals()) {
                if (pos < iv.length()) {
                    x = iv.lo + pos;
                    break;
                }
                pos -= iv.length();
            }
            theta[k] = x;
        }
        LogSumExp point;
        for (long long j = 0; j < N; ++j) {
            diff = theta - means.row(j).transpose();
            const Vector z = precision_llt.matrixU() * diff;
            point.add(log_weights[j] - 0.5 * z.squaredNorm());
        }
        mc.add(log_const + point.value());
    }
    return std::log(domain.volume() / static_cast<double>(R)) + mc.value();
}

}  // namespace detail

/// Assembles the Gaussian-mixture posterior:
///   T = (C^T Sigma_s^{-1} C + Sigma_theta^{-1})^{-1}
///   v^j = C^T Sigma_s^{-1} (s_obs - c0) + Sigma_theta^{-1} theta^j,  t^j = T v^j
///   log c(theta^j) = -1/2 (theta^j' Sigma_theta^{-1} theta^j - v^j' T v^j)
/// The weight exponent is evaluated as the algebraically equal form
///   -1/2 (theta' (P T G) theta - 2 (P T b)' theta - b' T b),
/// P = Sigma_theta^{-1}, G = C' Sigma_s^{-1} C, b = C' Sigma_s^{-1)(s_obs-c0),
/// which avoids the giant-term cancellation of the textbook expression when
/// the smoothing peaks are sharp.
inline PosteriorMixture build_posterior(const GlmFit& fit_in, const SmoothingSpec& smoothing,
                                        const ReferenceTable& table, const Vector& s_obs,
                                        const ParameterDomain& domain) {
    const int m = table.param_dim();
    const int n = table.stat_dim();
    if (fit_in.C.rows() != n || fit_in.C.cols() != m || fit_in.c0.size() != n)
        throw ValidationError("build_posterior: fit dimensions do not match the table");
    if (smoothing.sigma.size() != m)
        throw ValidationError("build_posterior: smoothing dimension mismatch");
    if (s_obs.size() != n) throw ValidationError("build_posterior: s_obs dimension mismatch");
    if (domain.dim() != m) throw ValidationError("build_posterior: domain dimension mismatch");
    for (int k = 0; k < m; ++k)
        if (!(smoothing.sigma[k] > 0.0))
            throw ValidationError("build_posterior: smoothing sigma must be positive");

    const GlmFit fit = regularize_fit(fit_in, table.stats);
    Eigen::LLT<Matrix> llt_s(fit.Sigma_s);
    if (llt_s.info() != Eigen::Success || llt_s.matrixLLT().diagonal().minCoeff() <= 0.0)
        throw NumericalError("build_posterior: Sigma_s singular even after regularization");

    const Vector p_diag = smoothing.variance().cwiseInverse();  // Sigma_theta^{-1} diagonal
    const Matrix G = fit.C.transpose() * llt_s.solve(fit.C);
    Matrix precision = G;
    precision.diagonal() += p_diag;

    Eigen::LLT<Matrix> llt_T(precision);
    if (llt_T.info() != Eigen::Success || llt_T.matrixLLT().diagonal().minCoeff() <= 0.0)
        throw NumericalError("build_posterior: T is not positive definite");
    const Matrix T = llt_T.solve(Matrix::Identity(m, m));

    const Vector b = fit.C.transpose() * llt_s.solve(s_obs - fit.c0);
    const Vector Tb = llt_T.solve(b);
    const double bTb = b.dot(Tb);

    // W = P T G = P - P T P, symmetric; the product form has no cancellation.
    Matrix W = p_diag.asDiagonal() * llt_T.solve(G);
    W = 0.5 * (W + W.transpose()).eval();
    const Vector w_lin = p_diag.cwiseProduct(Tb);  // P T b

    // t^j = T v^j = T b + T P theta^j
    const Matrix TP = llt_T.solve(Matrix(p_diag.asDiagonal()));
    Matrix means = table.params * TP.transpose();
    means.rowwise() += Tb.transpose();

    Vector log_weights(table.size());
    {
        const Matrix& th = table.params;
        const Vector quad = ((th * W).cwiseProduct(th)).rowwise().sum();
        log_weights = -0.5 * (quad - 2.0 * (th * w_lin)).array() + 0.5 * bTb;
        const double shift = log_weights.maxCoeff();
        log_weights.array() -= shift;
    }

    const double log_norm = detail::mixture_log_mass_over_domain(means, log_weights, T, llt_T,
                                                                 domain);
    if (!std::isfinite(log_norm))
        throw NumericalError("build_posterior: posterior carries no mass over the domain");
    return PosteriorMixture(T, std::move(llt_T), std::move(means), std::move(log_weights),
                            domain, log_norm);
}

inline double posterior_density(const PosteriorMixture& mix, const Vector& theta) {
    return mix.density(theta);
}

/// Marginal of dimension `dim_index` (0-based) on the given ascending grid,
/// per the shared-covariance mixture: sum_j c_j N(theta_k; t^j_k, T_kk),
/// renormalized on the grid. The curve's support is the dimension's outer
/// hull: smoothing leaks mass into interior gaps by design, and that leak is
/// part of what the curve reports.
inline DensityCurve marginal_posterior(const PosteriorMixture& mix, int dim_index,
                                       const std::vector<double>& grid) {
    const int m = mix.dim();
    if (dim_index < 0 || dim_index >= m)
        throw ValidationError("marginal_posterior: dimension index out of range");
    if (grid.size() < 2) throw ValidationError("marginal_posterior: grid too short");

    const double tau = mix.T()(dim_index, dim_index);
    const double sd = std::sqrt(tau);
    const long long N = mix.components();

    // Components sorted along this axis; each grid point only sees the window
    // where exp() does not underflow, which loses nothing.
    std::vector<std::pair<double, double>> comps;  // (t^j_k, weight)
    comps.reserve(static_cast<std::size_t>(N));
    for (long long j = 0; j < N; ++j) {
        const double w = std::exp(mix.log_weights()[j]);  // max-shifted: in [0,1]
        if (w > 0.0) comps.emplace_back(mix.means()(j, dim_index), w);
    }
    std::sort(comps.begin(), comps.end());
    const double cut = sd * 38.7;  // exp(-0.5 z^2) underflows past |z| ~ 38.6

    std::vector<double> values(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        auto first = std::lower_bound(comps.begin(), comps.end(),
                                      std::make_pair(x - cut, 0.0));
        double acc = 0.0;
        for (auto it = first; it != comps.end() && it->first <= x + cut; ++it) {
            const double z = (x - it->first) / sd;
            acc += it->second * std::exp(-0.5 * z * z);
        }
        values[i] = acc;  // common constants cancel in the renormalization
    }

    const Interval hull = mix.domain().support(dim_index).hull();
    DensityCurve curve = make_density_curve(grid, std::move(values),
                                            Support::interval(hull.lo, hull.hi));
    const double slack = 1e-9 * hull.length();
    curve.grid_covers_support =
        grid.front() <= hull.lo + slack && grid.back() >= hull.hi - slack;
    return curve;
}

}  // namespace abcglm
