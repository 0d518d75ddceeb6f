#pragma once

#include "abcglm/random.hpp"
#include "abcglm/support.hpp"

namespace abcglm {

/// A stochastic simulator: given parameters and a random stream, produce one
/// summary-statistic vector. Identical (theta, stream state) must yield
/// identical output; all other state is immutable.
class SimulableModel {
public:
    virtual ~SimulableModel() = default;

    virtual int param_dim() const = 0;
    virtual int stat_dim() const = 0;

    /// Natural bounded domain of valid parameters.
    virtual ParameterDomain domain() const = 0;

    virtual void simulate(const Vector& theta, RandomStream& stream, Vector& out) const = 0;

    Vector simulate(const Vector& theta, RandomStream& stream) const {
        Vector out(stat_dim());
        simulate(theta, stream, out);
        return out;
    }
};

}  // namespace abcglm
