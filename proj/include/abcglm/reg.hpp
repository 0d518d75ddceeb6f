#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "abcglm/density_curve.hpp"
#include "abcglm/errors.hpp"
#include "abcglm/table.hpp"

namespace abcglm {

/// y = ln(tan(((theta-a)/(b-a)) * pi/2)): maps (a,b) onto the real line.
inline double hamilton_transform(double theta, double a, double b) {
    if (!(a < theta && theta < b))
        throw ValidationError("hamilton_transform: theta must lie strictly inside (a,b)");
    const double u = (theta - a) / (b - a);
    return std::log(std::tan(u * kPi / 2.0));
}

/// Inverse map; lands strictly inside (a,b) for every real y.
inline double hamilton_inverse(double y, double a, double b) {
    double theta = a + (b - a) * (2.0 / kPi) * std::atan(std::exp(y));
    if (theta <= a) theta = std::nextafter(a, b);
    if (theta >= b) theta = std::nextafter(b, a);
    return theta;
}

struct HamiltonBounds {
    double a = 0.0;
    double b = 0.0;
};

/// Per-dimension transform: disengaged (nullopt) or Hamilton over (a,b).
using RegTransform = std::vector<std::optional<HamiltonBounds>>;

inline RegTransform no_transform(int m) { return RegTransform(static_cast<std::size_t>(m)); }

/// Hamilton over each dimension's outer hull (the variant used whenever the
/// baseline runs, gaps included: per-piece transforms do not compose).
inline RegTransform hamilton_hull_transform(const ParameterDomain& domain) {
    RegTransform transform(static_cast<std::size_t>(domain.dim()));
    for (int k = 0; k < domain.dim(); ++k) {
        const Interval hull = domain.support(k).hull();
        transform[static_cast<std::size_t>(k)] = HamiltonBounds{hull.lo, hull.hi};
    }
    return transform;
}

struct RegFit {
    Matrix M;   // m x n
    Vector m0;  // m
};

struct RegAdjustment {
    Matrix adjusted;  // N x m, back-transformed
    RegFit fit;       // in transformed coordinates
};

/// ABC-REG: OLS of (transformed) parameters on statistics, then projection of
/// the residual structure to s_obs: theta*_j = theta_j - M (s_j - s_obs).
/// Optional Epanechnikov weights w_j = 1 - (dist_j/epsilon)^2 turn the fit
/// into WLS (off by default; the reference procedure is unweighted).
inline RegAdjustment reg_adjust(const ReferenceTable& table, const Vector& s_obs,
                                const RegTransform& transform,
                                bool epanechnikov_weights = false) {
    const long long N = table.size();
    const int m = table.param_dim();
    const int n = table.stat_dim();
    if (static_cast<int>(transform.size()) != m)
        throw ValidationError("reg_adjust: transform size does not match parameter dimension");
    if (s_obs.size() != n) throw ValidationError("reg_adjust: s_obs dimension mismatch");
    if (N < n + 2)
        throw ValidationError("reg_adjust: needs at least n + 2 rows, got " + std::to_string(N));

    Matrix Y = table.params;
    for (int k = 0; k < m; ++k) {
        const auto& bounds = transform[static_cast<std::size_t>(k)];
        if (!bounds) continue;
        for (long long j = 0; j < N; ++j) {
            // Retained draws can sit exactly on a border after rounding; the
            // transform needs the open interval.
            double v = std::min(std::max(Y(j, k), std::nextafter(bounds->a, bounds->b)),
                                std::nextafter(bounds->b, bounds->a));
            Y(j, k) = hamilton_transform(v, bounds->a, bounds->b);
        }
    }

    Matrix X(N, n + 1);
    X.col(0).setOnes();
    X.rightCols(n) = table.stats;

    Matrix Y_fit = Y;
    if (epanechnikov_weights) {
        if (!(table.epsilon > 0.0))
            throw ValidationError("reg_adjust: Epanechnikov weights need epsilon > 0");
        const DistanceFn dist(table.distance_spec());
        for (long long j = 0; j < N; ++j) {
            const double u = dist(table.stats.row(j).transpose(), table.s_obs) / table.epsilon;
            const double w = std::sqrt(std::max(1.0 - u * u, 1e-12));
            X.row(j) *= w;
            Y_fit.row(j) *= w;
        }
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    if (qr.rank() < n + 1) {
        const auto perm = qr.colsPermutation().indices();
        std::string cols;
        for (int i = qr.rank(); i < n + 1; ++i) {
            if (!cols.empty()) cols += ", ";
            const int orig = perm[i];
            cols += orig == 0 ? "intercept" : "s_" + std::to_string(orig);
        }
        throw ValidationError("reg_adjust: design matrix is rank deficient; collinear columns: " +
                              cols);
    }

    const Matrix coef = qr.solve(Y_fit);  // (n+1) x m
    RegAdjustment result;
    result.fit.m0 = coef.row(0).transpose();
    result.fit.M = coef.bottomRows(n).transpose();

    const Matrix shifted = table.stats.rowwise() - s_obs.transpose();
    result.adjusted = Y - shifted * result.fit.M.transpose();

    for (int k = 0; k < m; ++k) {
        const auto& bounds = transform[static_cast<std::size_t>(k)];
        if (!bounds) continue;
        for (long long j = 0; j < N; ++j)
            result.adjusted(j, k) = hamilton_inverse(result.adjusted(j, k), bounds->a, bounds->b);
    }
    return result;
}

/// Silverman-style bandwidth: 0.9 min(sd, IQR/1.34) N^{-1/5}.
inline double silverman_bandwidth(std::vector<double> values) {
    const std::size_t N = values.size();
    if (N < 2) throw ValidationError("silverman_bandwidth: needs at least 2 values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(N);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(N - 1));

    std::sort(values.begin(), values.end());
    auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(N - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double w = pos - static_cast<double>(lo);
        return lo + 1 < N ? values[lo] * (1.0 - w) + values[lo + 1] * w : values[lo];
    };
    const double iqr = quantile(0.75) - quantile(0.25);

    double spread = std::min(sd, iqr / 1.34);
    if (spread <= 0.0) spread = std::max(sd, iqr / 1.34);
    if (spread <= 0.0) return 0.0;  // degenerate sample; caller picks a fallback
    return 0.9 * spread * std::pow(static_cast<double>(N), -0.2);
}

/// Gaussian KDE over a bounded support with boundary reflection at every
/// finite border (interior gap borders included): values in an interval are
/// mirrored at that interval's two ends, the curve is zeroed outside the
/// support and renormalized on the grid. bandwidth <= 0 selects the
/// Silverman rule times `auto_multiplier`.
inline DensityCurve kde_posterior(const std::vector<double>& values, const Support& support,
                                  double bandwidth, const std::vector<double>& grid,
                                  double auto_multiplier = 1.0, bool reflect = true) {
    if (values.size() < 2) throw ValidationError("kde_posterior: needs at least 2 values");
    if (grid.size() < 2) throw ValidationError("kde_posterior: grid too short");

    double h = bandwidth;
    if (!(h > 0.0)) {
        h = silverman_bandwidth(values) * auto_multiplier;
        if (!(h > 0.0)) h = 1e-3 * support.hull().length();  // zero-spread sample
    }

    // Values outside the support contribute from the nearest in-support point.
    auto clamp_to_support = [&support](double v) {
        if (support.contains(v)) return v;
        double best = support.lower();
        double best_dist = std::abs(v - best);
        for (const Interval& iv : support.intervals()) {
            for (double edge : {iv.lo, iv.hi}) {
                const double d = std::abs(v - edge);
                if (d < best_dist) {
                    best = edge;
                    best_dist = d;
                }
            }
        }
        return best;
    };

    std::vector<double> density(grid.size(), 0.0);
    const double cut = 38.7 * h;  // beyond this the kernel underflows
    const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * kPi));

    for (const Interval& iv : support.intervals()) {
        // Kernel source points for this interval: the member values plus
        // their mirror images at both borders.
        std::vector<double> sources;
        for (double v : values) {
            const double c = clamp_to_support(v);
            if (!iv.contains(c)) continue;
            sources.push_back(c);
            if (reflect) {
                sources.push_back(2.0 * iv.lo - c);
                sources.push_back(2.0 * iv.hi - c);
            }
        }
        if (sources.empty()) continue;
        std::sort(sources.begin(), sources.end());

        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double x = grid[i];
            if (!iv.contains(x)) continue;
            const auto first = std::lower_bound(sources.begin(), sources.end(), x - cut);
            double acc = 0.0;
            for (auto it = first; it != sources.end() && *it <= x + cut; ++it) {
                const double z = (x - *it) / h;
                acc += std::exp(-0.5 * z * z);
            }
            density[i] = acc * norm;
        }
    }

    return make_density_curve(grid, std::move(density), support);
}

}  // namespace abcglm
