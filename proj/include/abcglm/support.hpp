#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "abcglm/errors.hpp"
#include "abcglm/types.hpp"

namespace abcglm {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double length() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Union of disjoint, sorted, bounded intervals. One interval is the common case.
class Support {
public:
    explicit Support(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
        if (intervals_.empty()) throw ValidationError("Support: needs at least one interval");
        for (std::size_t i = 0; i < intervals_.size(); ++i) {
            const Interval& iv = intervals_[i];
            if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi)))
                throw ValidationError("Support: interval bounds must be finite");
            if (!(iv.lo < iv.hi))
                throw ValidationError("Support: interval [" + std::to_string(iv.lo) + ", " +
                                      std::to_string(iv.hi) + "] has non-positive length");
            if (i > 0 && !(intervals_[i - 1].hi < iv.lo))
                throw ValidationError("Support: intervals must be disjoint and sorted");
        }
    }

    static Support interval(double lo, double hi) { return Support({Interval{lo, hi}}); }

    const std::vector<Interval>& intervals() const { return intervals_; }
    std::size_t pieces() const { return intervals_.size(); }

    bool contains(double x) const {
        for (const Interval& iv : intervals_)
            if (iv.contains(x)) return true;
        return false;
    }

    double total_length() const {
        double len = 0.0;
        for (const Interval& iv : intervals_) len += iv.length();
        return len;
    }

    double lower() const { return intervals_.front().lo; }
    double upper() const { return intervals_.back().hi; }

    /// Outer bounding interval (spans any gaps).
    Interval hull() const { return Interval{lower(), upper()}; }

private:
    std::vector<Interval> intervals_;
};

/// Cartesian product of per-dimension supports, with the affine map to the
/// unit cube taken over each dimension's outer bounding interval.
class ParameterDomain {
public:
    explicit ParameterDomain(std::vector<Support> dims) : dims_(std::move(dims)) {
        if (dims_.empty()) throw ValidationError("ParameterDomain: needs at least one dimension");
    }

    int dim() const { return static_cast<int>(dims_.size()); }
    const Support& support(int k) const { return dims_.at(static_cast<std::size_t>(k)); }

    /// Outer hull length of dimension k; the length scale for smoothing.
    double range(int k) const { return support(k).hull().length(); }

    bool contains(const Vector& theta) const {
        check_dim(theta);
        for (int k = 0; k < dim(); ++k)
            if (!dims_[static_cast<std::size_t>(k)].contains(theta[k])) return false;
        return true;
    }

    Vector normalize(const Vector& theta) const {
        check_dim(theta);
        Vector u(dim());
        for (int k = 0; k < dim(); ++k) {
            const Interval h = support(k).hull();
            u[k] = (theta[k] - h.lo) / h.length();
        }
        return u;
    }

    Vector denormalize(const Vector& u) const {
        check_dim(u);
        Vector theta(dim());
        for (int k = 0; k < dim(); ++k) {
            const Interval h = support(k).hull();
            theta[k] = h.lo + u[k] * h.length();
        }
        return theta;
    }

    /// Volume of the support (product of per-dimension total lengths).
    double volume() const {
        double v = 1.0;
        for (const Support& s : dims_) v *= s.total_length();
        return v;
    }

private:
    void check_dim(const Vector& v) const {
        if (v.size() != dim())
            throw ValidationError("ParameterDomain: expected dimension " + std::to_string(dim()) +
                                  ", got " + std::to_string(v.size()));
    }

    std::vector<Support> dims_;
};

}  // namespace abcglm
