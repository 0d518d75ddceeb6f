#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "abcglm/errors.hpp"
#include "abcglm/numerics.hpp"
#include "abcglm/random.hpp"
#include "abcglm/support.hpp"

namespace abcglm {

/// Uniform over a support (single interval or union of disjoint intervals).
class UniformComponent {
public:
    explicit UniformComponent(Support support)
        : support_(std::move(support)), inv_length_(1.0 / support_.total_length()) {}

    const Support& support() const { return support_; }

    double density(double x) const { return support_.contains(x) ? inv_length_ : 0.0; }

    double sample(RandomStream& stream) const {
        double pos = stream.uniform01() * support_.total_length();
        for (const Interval& iv : support_.intervals()) {
            if (pos < iv.length()) return iv.lo + pos;
            pos -= iv.length();
        }
        return support_.intervals().back().hi;  // pos landed on the far edge
    }

private:
    Support support_;
    double inv_length_;
};

/// Normal(mean, sd) truncated to [lo, hi]; sampled by inverse CDF.
class TruncatedNormalComponent {
public:
    TruncatedNormalComponent(double mean, double sd, double lo, double hi)
        : mean_(mean), sd_(sd), lo_(lo), hi_(hi) {
        if (!(sd > 0.0)) throw ValidationError("truncated normal: sd must be positive");
        if (!(lo < hi)) throw ValidationError("truncated normal: requires lo < hi");
        cdf_lo_ = standard_normal_cdf((lo_ - mean_) / sd_);
        mass_ = standard_normal_cdf((hi_ - mean_) / sd_) - cdf_lo_;
        if (!(mass_ > 0.0))
            throw ValidationError("truncated normal: truncation interval carries no mass");
    }

    Support support() const { return Support::interval(lo_, hi_); }
    double mean() const { return mean_; }
    double sd() const { return sd_; }

    double density(double x) const {
        if (x < lo_ || x > hi_) return 0.0;
        return standard_normal_pdf((x - mean_) / sd_) / (sd_ * mass_);
    }

    double sample(RandomStream& stream) const {
        const double p = cdf_lo_ + stream.uniform01() * mass_;
        double x = mean_ + sd_ * standard_normal_quantile(p);
        // Inverse-CDF round-off can spill just past the borders.
        return std::min(std::max(x, lo_), hi_);
    }

private:
    double mean_, sd_, lo_, hi_;
    double cdf_lo_, mass_;
};

using PriorComponent = std::variant<UniformComponent, TruncatedNormalComponent>;

/// Product prior: independent per-dimension components.
class Prior {
public:
    explicit Prior(std::vector<PriorComponent> components) : components_(std::move(components)) {
        if (components_.empty()) throw ValidationError("Prior: needs at least one component");
    }

    static Prior uniform(double lo, double hi) {
        return Prior({UniformComponent(Support::interval(lo, hi))});
    }
    static Prior uniform(Support support) {
        return Prior({UniformComponent(std::move(support))});
    }

    int dim() const { return static_cast<int>(components_.size()); }
    const PriorComponent& component(int k) const {
        return components_.at(static_cast<std::size_t>(k));
    }

    double component_density(int k, double x) const {
        return std::visit([x](const auto& c) { return c.density(x); }, component(k));
    }

    double density(const Vector& theta) const {
        check_dim(theta);
        double d = 1.0;
        for (int k = 0; k < dim(); ++k) d *= component_density(k, theta[k]);
        return d;
    }

    void sample_into(RandomStream& stream, Vector& theta) const {
        theta.resize(dim());
        for (int k = 0; k < dim(); ++k)
            theta[k] = std::visit([&stream](const auto& c) { return c.sample(stream); },
                                  components_[static_cast<std::size_t>(k)]);
    }

    Vector sample(RandomStream& stream) const {
        Vector theta(dim());
        sample_into(stream, theta);
        return theta;
    }

    ParameterDomain domain() const {
        std::vector<Support> dims;
        dims.reserve(components_.size());
        for (const PriorComponent& c : components_)
            dims.push_back(std::visit([](const auto& comp) { return comp.support(); }, c));
        return ParameterDomain(std::move(dims));
    }

private:
    void check_dim(const Vector& v) const {
        if (v.size() != dim())
            throw ValidationError("Prior: expected dimension " + std::to_string(dim()) + ", got " +
                                  std::to_string(v.size()));
    }

    std::vector<PriorComponent> components_;
};

/// Product of uniforms over each dimension's support.
inline Prior uniform_prior_over(const ParameterDomain& domain) {
    std::vector<PriorComponent> components;
    components.reserve(static_cast<std::size_t>(domain.dim()));
    for (int k = 0; k < domain.dim(); ++k)
        components.emplace_back(UniformComponent(domain.support(k)));
    return Prior(std::move(components));
}

}  // namespace abcglm
