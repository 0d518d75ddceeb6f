#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "abcglm/compare.hpp"
#include "abcglm/errors.hpp"
#include "abcglm/model_select.hpp"
#include "abcglm/prior.hpp"
#include "abcglm/sampler.hpp"
#include "abcglm/toy.hpp"

namespace abcglm {

using Json = nlohmann::json;

namespace config {

inline void require_keys(const Json& obj, const std::set<std::string>& allowed,
                         const std::set<std::string>& required, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw ValidationError(where + ": unknown key '" + key + "'");
    for (const std::string& key : required)
        if (!obj.contains(key))
            throw ValidationError(where + ": missing required key '" + key + "'");
}

template <class T>
T get(const Json& obj, const std::string& key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ValidationError(where + "." + key + ": " + e.what());
    }
}

template <class T>
T get_or(const Json& obj, const std::string& key, const std::string& where, T fallback) {
    if (!obj.contains(key)) return fallback;
    return get<T>(obj, key, where);
}

inline Prior make_prior(const Json& spec, const std::string& where) {
    require_keys(spec, {"components"}, {"components"}, where);
    const Json& comps = spec.at("components");
    if (!comps.is_array() || comps.empty())
        throw ValidationError(where + ".components: expected a non-empty array");
    std::vector<PriorComponent> components;
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const Json& c = comps[k];
        const std::string cwhere = where + ".components[" + std::to_string(k) + "]";
        const std::string kind = get<std::string>(c, "kind", cwhere);
        if (kind == "uniform") {
            require_keys(c, {"kind", "intervals"}, {"kind", "intervals"}, cwhere);
            const auto raw = get<std::vector<std::vector<double>>>(c, "intervals", cwhere);
            std::vector<Interval> intervals;
            for (const auto& pair : raw) {
                if (pair.size() != 2)
                    throw ValidationError(cwhere + ".intervals: each entry must be [lo, hi]");
                intervals.push_back(Interval{pair[0], pair[1]});
            }
            components.emplace_back(UniformComponent(Support(std::move(intervals))));
        } else if (kind == "truncated_normal") {
            require_keys(c, {"kind", "mean", "sd", "lo", "hi"},
                         {"kind", "mean", "sd", "lo", "hi"}, cwhere);
            components.emplace_back(TruncatedNormalComponent(
                get<double>(c, "mean", cwhere), get<double>(c, "sd", cwhere),
                get<double>(c, "lo", cwhere), get<double>(c, "hi", cwhere)));
        } else {
            throw ValidationError(cwhere + ".kind: unknown prior component '" + kind + "'");
        }
    }
    return Prior(std::move(components));
}

inline std::unique_ptr<SimulableModel> make_model(const Json& spec, const std::string& where) {
    const std::string kind = get<std::string>(spec, "kind", where);
    if (kind == "coalescent") {
        require_keys(spec, {"kind", "n_seq"}, {"kind"}, where);
        const int n_seq = get_or<int>(spec, "n_seq", where, 10);
        if (n_seq < 2) throw ValidationError(where + ".n_seq: must be >= 2");
        return std::make_unique<CoalescentToyModel>(n_seq);
    }
    if (kind == "poisson_rate") {
        require_keys(spec, {"kind"}, {"kind"}, where);
        return std::make_unique<PoissonRateModel>();
    }
    throw ValidationError(where + ".kind: unknown model '" + kind + "'");
}

inline Vector make_s_obs(const Json& spec, const std::string& where) {
    if (!spec.is_array() || spec.empty())
        throw ValidationError(where + ": expected a non-empty array of numbers");
    Vector s(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (!spec[i].is_number()) throw ValidationError(where + ": entries must be numbers");
        s[static_cast<long>(i)] = spec[i].get<double>();
    }
    return s;
}

inline SamplerMode make_sampler_mode(const Json& spec, const std::string& where) {
    const std::string mode = get<std::string>(spec, "mode", where);
    if (mode == "fixed_epsilon") {
        require_keys(spec, {"mode", "epsilon", "target_n", "max_proposals"},
                     {"mode", "epsilon", "max_proposals"}, where);
        FixedEpsilon fe;
        fe.epsilon = get<double>(spec, "epsilon", where);
        fe.target_n = get_or<long long>(spec, "target_n", where, 0);
        fe.max_proposals = get<long long>(spec, "max_proposals", where);
        if (!(fe.epsilon > 0.0)) throw ValidationError(where + ".epsilon: must be > 0");
        if (fe.max_proposals < 1) throw ValidationError(where + ".max_proposals: must be >= 1");
        if (fe.target_n < 0) throw ValidationError(where + ".target_n: must be >= 0");
        return fe;
    }
    if (mode == "retain_best") {
        require_keys(spec, {"mode", "n_keep", "budget"}, {"mode", "n_keep", "budget"}, where);
        RetainBest rb;
        rb.n_keep = get<long long>(spec, "n_keep", where);
        rb.budget = get<long long>(spec, "budget", where);
        if (rb.n_keep < 1) throw ValidationError(where + ".n_keep: must be >= 1");
        if (rb.budget < rb.n_keep)
            throw ValidationError(where + ".budget: must be >= n_keep");
        return rb;
    }
    throw ValidationError(where + ".mode: unknown sampler mode '" + mode + "'");
}

/// Builds the distance spec; a mahalanobis request estimates the covariance
/// from a pilot run of the model under the prior.
inline DistanceSpec make_distance(const Json& spec, const std::string& where,
                                  const SimulableModel& model, const Prior& prior,
                                  std::uint64_t seed, int workers) {
    const std::string kind = get<std::string>(spec, "kind", where);
    if (kind == "euclidean") {
        require_keys(spec, {"kind"}, {"kind"}, where);
        return DistanceSpec::euclidean();
    }
    if (kind == "mahalanobis") {
        require_keys(spec, {"kind", "pilot_proposals"}, {"kind"}, where);
        const long long pilot = get_or<long long>(spec, "pilot_proposals", where, 1000);
        if (pilot < 2) throw ValidationError(where + ".pilot_proposals: must be >= 2");
        return DistanceSpec::mahalanobis(pilot_covariance(model, prior, pilot, seed, workers));
    }
    throw ValidationError(where + ".kind: unknown distance '" + kind + "'");
}

/// Applies one `--set section.key=value` override onto the config tree.
inline void apply_override(Json& root, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ValidationError("--set expects section.key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string raw_value = assignment.substr(eq + 1);

    Json value;
    try {
        value = Json::parse(raw_value);
    } catch (const Json::exception&) {
        value = raw_value;  // plain string
    }

    Json* node = &root;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw ValidationError("--set: empty key segment in '" + path + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

inline Json load_config_file(const std::string& path) {
    try {
        return Json::parse(read_text_file(path));
    } catch (const Json::exception& e) {
        throw ValidationError(path + ": invalid JSON: " + std::string(e.what()));
    }
}

}  // namespace config

}  // namespace abcglm
