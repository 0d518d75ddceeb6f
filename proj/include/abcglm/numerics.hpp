#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "abcglm/errors.hpp"

namespace abcglm {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLogTwoPi = 1.8378770664093454836;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Neumaier-compensated accumulation; keeps alternating sums honest.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// log(sum_i exp(x_i)) with max-shift; -inf for an empty or all-(-inf) input.
inline double log_sum_exp(std::span<const double> xs) {
    double m = kNegInf;
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline double log_add_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Streaming log-sum-exp accumulator (single pass over terms).
class LogSumExp {
public:
    void add(double x) {
        if (x == kNegInf) return;
        if (x <= max_) {
            sum_ += std::exp(x - max_);
        } else {
            sum_ = sum_ * std::exp(max_ - x) + 1.0;
            max_ = x;
        }
    }
    double value() const { return sum_ > 0.0 ? max_ + std::log(sum_) : kNegInf; }

private:
    double max_ = kNegInf;
    double sum_ = 0.0;
};

inline double standard_normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
}

inline double standard_normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

/// Inverse standard normal CDF: Acklam's rational approximation polished by
/// one Halley step, good to ~1e-15 over (0,1).
inline double standard_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal quantile requires p in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = standard_normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * kPi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

/// Gauss-Legendre nodes and weights on [-1,1], Newton iteration on P_n.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int n) {
    if (n < 1) throw ValidationError("gauss_legendre: order must be >= 1");
    Eigen::VectorXd x(n), w(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 0; k < n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k + 1.0) * z * p1 - k * p2) / (k + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    return {x, w};
}

/// Composite Gauss-Legendre integration of f over [a,b].
template <class F>
double integrate_gl(F&& f, double a, double b, int panels = 16, int order = 32) {
    static thread_local std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> cache(65);
    if (order < 1 || order > 64) throw ValidationError("integrate_gl: order out of range");
    if (cache[order].first.size() == 0) cache[order] = gauss_legendre(order);
    const auto& [xs, ws] = cache[order];
    const double h = (b - a) / panels;
    CompensatedSum total;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        const double mid = lo + 0.5 * h;
        for (int i = 0; i < order; ++i) total.add(0.5 * h * ws[i] * f(mid + 0.5 * h * xs[i]));
    }
    return total.value();
}

/// Trapezoidal rule on an ascending grid.
inline double trapezoid(const Eigen::VectorXd& grid, const Eigen::VectorXd& values) {
    if (grid.size() != values.size()) throw ValidationError("trapezoid: size mismatch");
    if (grid.size() < 2) return 0.0;
    CompensatedSum s;
    for (Eigen::Index i = 0; i + 1 < grid.size(); ++i)
        s.add(0.5 * (grid[i + 1] - grid[i]) * (values[i] + values[i + 1]));
    return s.value();
}

inline double trapezoid(const std::vector<double>& grid, const std::vector<double>& values) {
    if (grid.size() != values.size()) throw ValidationError("trapezoid: size mismatch");
    if (grid.size() < 2) return 0.0;
    CompensatedSum s;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        s.add(0.5 * (grid[i + 1] - grid[i]) * (values[i] + values[i + 1]));
    return s.value();
}

inline Eigen::VectorXd uniform_grid(double a, double b, int n) {
    if (n < 2) throw ValidationError("uniform_grid: need at least 2 points");
    if (!(b > a)) throw ValidationError("uniform_grid: empty range");
    return Eigen::VectorXd::LinSpaced(n, a, b);
}

inline std::vector<double> uniform_grid_vector(double a, double b, int n) {
    const Eigen::VectorXd g = uniform_grid(a, b, n);
    return std::vector<double>(g.begin(), g.end());
}

/// log P(S=s) for S ~ Poisson(mean).
inline double poisson_log_pmf(long s, double mean) {
    if (s < 0) return kNegInf;
    if (!(mean > 0.0)) return s == 0 ? 0.0 : kNegInf;
    return static_cast<double>(s) * std::log(mean) - mean - std::lgamma(static_cast<double>(s) + 1.0);
}

inline bool nearly_equal(double a, double b, double rel, double abs_floor = 0.0) {
    return std::abs(a - b) <= abs_floor + rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace abcglm
