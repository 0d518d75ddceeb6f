#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "abcglm/errors.hpp"
#include "abcglm/io.hpp"
#include "abcglm/numerics.hpp"
#include "abcglm/support.hpp"

namespace abcglm {

/// A density tabulated on an ascending 1-D grid over a bounded support.
/// Normalized on its grid by trapezoidal quadrature; zero outside support.
struct DensityCurve {
    std::vector<double> grid;
    std::vector<double> density;
    Support support;
    bool grid_covers_support = true;
};

inline double curve_integral(const DensityCurve& curve) {
    return trapezoid(curve.grid, curve.density);
}

/// Zeroes values outside the support, clips round-off negatives, and
/// renormalizes on the grid.
inline DensityCurve make_density_curve(std::vector<double> grid, std::vector<double> values,
                                       Support support) {
    if (grid.size() != values.size() || grid.size() < 2)
        throw ValidationError("make_density_curve: grid/value size mismatch or too short");
    if (!std::is_sorted(grid.begin(), grid.end()))
        throw ValidationError("make_density_curve: grid must be ascending");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!support.contains(grid[i]))
            values[i] = 0.0;
        else if (values[i] < 0.0)
            values[i] = 0.0;
        if (!std::isfinite(values[i]))
            throw NumericalError("make_density_curve: non-finite density value");
    }
    DensityCurve curve{std::move(grid), std::move(values), std::move(support), true};
    const double mass = curve_integral(curve);
    if (!(mass > 0.0))
        throw NumericalError("make_density_curve: density integrates to zero on the grid");
    for (double& v : curve.density) v /= mass;
    const double slack = 1e-9 * curve.support.hull().length();
    curve.grid_covers_support = curve.grid.front() <= curve.support.lower() + slack &&
                                curve.grid.back() >= curve.support.upper() - slack;
    return curve;
}

/// Piecewise-linear interpolation of the curve; zero outside its grid.
inline double curve_value(const DensityCurve& curve, double x) {
    if (x < curve.grid.front() || x > curve.grid.back()) return 0.0;
    const auto it = std::lower_bound(curve.grid.begin(), curve.grid.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - curve.grid.begin());
    if (hi == 0) return curve.density.front();
    const double x0 = curve.grid[hi - 1], x1 = curve.grid[hi];
    const double w = (x - x0) / (x1 - x0);
    return curve.density[hi - 1] * (1.0 - w) + curve.density[hi] * w;
}

inline DensityCurve resample_curve(const DensityCurve& curve, const std::vector<double>& grid) {
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) values[i] = curve_value(curve, grid[i]);
    return DensityCurve{grid, std::move(values), curve.support, curve.grid_covers_support};
}

/// Trapezoidal integral of |f - g|. Different grids are merged: the union of
/// both grids' nodes plus just-outside sentinels at each curve's endpoints,
/// so a curve falls to zero sharply beyond its own range instead of leaking a
/// spurious linear ramp into the other curve's territory.
inline double l1_distance(const DensityCurve& f, const DensityCurve& g) {
    if (g.grid == f.grid) {
        std::vector<double> diff(f.grid.size());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff[i] = std::abs(f.density[i] - g.density[i]);
        return trapezoid(f.grid, diff);
    }

    std::vector<double> merged;
    merged.reserve(f.grid.size() + g.grid.size() + 4);
    merged.insert(merged.end(), f.grid.begin(), f.grid.end());
    merged.insert(merged.end(), g.grid.begin(), g.grid.end());
    for (const DensityCurve* c : {&f, &g}) {
        merged.push_back(std::nextafter(c->grid.front(), -std::numeric_limits<double>::infinity()));
        merged.push_back(std::nextafter(c->grid.back(), std::numeric_limits<double>::infinity()));
    }
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

    std::vector<double> diff(merged.size());
    for (std::size_t i = 0; i < merged.size(); ++i)
        diff[i] = std::abs(curve_value(f, merged[i]) - curve_value(g, merged[i]));
    return trapezoid(merged, diff);
}

inline double curve_argmax(const DensityCurve& curve) {
    const auto it = std::max_element(curve.density.begin(), curve.density.end());
    return curve.grid[static_cast<std::size_t>(it - curve.density.begin())];
}

/// Mass the curve assigns to [a, b] (trapezoid on the grid restricted to it).
inline double curve_mass(const DensityCurve& curve, double a, double b) {
    if (!(a < b)) throw ValidationError("curve_mass: requires a < b");
    double mass = 0.0;
    for (std::size_t i = 1; i < curve.grid.size(); ++i) {
        const double lo = std::max(curve.grid[i - 1], a);
        const double hi = std::min(curve.grid[i], b);
        if (lo >= hi) continue;
        // linear segment between grid nodes, integrated over the overlap
        const double x0 = curve.grid[i - 1], x1 = curve.grid[i];
        const double f0 = curve.density[i - 1], f1 = curve.density[i];
        auto at = [&](double x) { return f0 + (f1 - f0) * (x - x0) / (x1 - x0); };
        mass += 0.5 * (at(lo) + at(hi)) * (hi - lo);
    }
    return mass;
}

/// CSV with header `theta_k,density`.
inline std::string curve_to_csv(const DensityCurve& curve, int dim_index_one_based = 1) {
    std::string csv = "theta_" + std::to_string(dim_index_one_based) + ",density\n";
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        csv += format_double(curve.grid[i]);
        csv += ',';
        csv += format_double(curve.density[i]);
        csv += '\n';
    }
    return csv;
}

}  // namespace abcglm
