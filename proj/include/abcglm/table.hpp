#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "abcglm/distance.hpp"
#include "abcglm/errors.hpp"
#include "abcglm/io.hpp"
#include "abcglm/types.hpp"

namespace abcglm {

/// Accepted (parameter, statistic) pairs from a rejection run, plus the
/// metadata needed to interpret them. Rows are proposal-order.
struct ReferenceTable {
    Matrix params;  // N x m
    Matrix stats;   // N x n
    long long total_proposals = 0;
    double epsilon = 0.0;
    Vector s_obs;
    DistanceKind distance_kind = DistanceKind::euclidean;
    Matrix distance_covariance;  // mahalanobis only
    std::uint64_t seed = 0;

    long long size() const { return params.rows(); }
    int param_dim() const { return static_cast<int>(params.cols()); }
    int stat_dim() const { return static_cast<int>(stats.cols()); }

    double acceptance_rate() const {
        return static_cast<double>(size()) / static_cast<double>(total_proposals);
    }

    DistanceSpec distance_spec() const {
        return distance_kind == DistanceKind::euclidean
                   ? DistanceSpec::euclidean()
                   : DistanceSpec::mahalanobis(distance_covariance);
    }

    /// Checks the structural invariants, including the epsilon-ball condition
    /// on every row. Retain-best tables set epsilon to the largest retained
    /// distance, so the row condition is dist <= epsilon.
    void validate() const {
        if (size() < 1) throw ValidationError("ReferenceTable: empty table");
        if (stats.rows() != params.rows())
            throw ValidationError("ReferenceTable: params and stats row counts differ");
        if (s_obs.size() != stats.cols())
            throw ValidationError("ReferenceTable: s_obs dimension does not match stats");
        if (!(epsilon >= 0.0)) throw ValidationError("ReferenceTable: epsilon must be >= 0");
        if (total_proposals < size())
            throw ValidationError("ReferenceTable: total_proposals < number of rows");
        const DistanceFn dist(distance_spec());
        for (long long i = 0; i < size(); ++i) {
            if (!params.row(i).allFinite() || !stats.row(i).allFinite())
                throw ValidationError("ReferenceTable: non-finite entry in row " +
                                      std::to_string(i));
            const Vector s = stats.row(i).transpose();
            if (dist(s, s_obs) > epsilon)
                throw ValidationError("ReferenceTable: row " + std::to_string(i) +
                                      " violates the epsilon-ball condition");
        }
    }
};

inline std::string table_sidecar_path(const std::string& csv_path) {
    const std::string suffix = ".csv";
    if (csv_path.size() > suffix.size() &&
        csv_path.compare(csv_path.size() - suffix.size(), suffix.size(), suffix) == 0)
        return csv_path.substr(0, csv_path.size() - suffix.size()) + ".meta.json";
    return csv_path + ".meta.json";
}

/// Writes `<path>` (CSV, header theta_1..theta_m,s_1..s_n) and the metadata
/// sidecar `<stem>.meta.json` next to it.
inline void save_table(const ReferenceTable& table, const std::string& csv_path) {
    std::string csv;
    csv.reserve(static_cast<std::size_t>(table.size()) * 32);
    for (int k = 0; k < table.param_dim(); ++k) {
        if (k > 0) csv += ',';
        csv += "theta_" + std::to_string(k + 1);
    }
    for (int k = 0; k < table.stat_dim(); ++k) csv += ",s_" + std::to_string(k + 1);
    csv += '\n';
    for (long long i = 0; i < table.size(); ++i) {
        for (int k = 0; k < table.param_dim(); ++k) {
            if (k > 0) csv += ',';
            csv += format_double(table.params(i, k));
        }
        for (int k = 0; k < table.stat_dim(); ++k) {
            csv += ',';
            csv += format_double(table.stats(i, k));
        }
        csv += '\n';
    }
    write_text_file(csv_path, csv);

    nlohmann::json meta;
    meta["n_rows"] = table.size();
    meta["total_proposals"] = table.total_proposals;
    meta["epsilon"] = table.epsilon;
    meta["s_obs"] = std::vector<double>(table.s_obs.begin(), table.s_obs.end());
    meta["distance_kind"] = to_string(table.distance_kind);
    meta["seed"] = table.seed;
    if (table.distance_kind == DistanceKind::mahalanobis) {
        std::vector<std::vector<double>> cov;
        for (long long r = 0; r < table.distance_covariance.rows(); ++r)
            cov.emplace_back(table.distance_covariance.row(r).begin(),
                             table.distance_covariance.row(r).end());
        meta["distance_covariance"] = cov;
    }
    write_text_file(table_sidecar_path(csv_path), meta.dump(2) + "\n");
}

inline ReferenceTable load_table(const std::string& csv_path) {
    const std::string csv = read_text_file(csv_path);

    std::vector<std::string_view> lines;
    {
        std::string_view rest(csv);
        while (!rest.empty()) {
            const std::size_t nl = rest.find('\n');
            const std::string_view line =
                nl == std::string_view::npos ? rest : rest.substr(0, nl);
            if (!line.empty()) lines.push_back(line);
            if (nl == std::string_view::npos) break;
            rest = rest.substr(nl + 1);
        }
    }
    if (lines.size() < 2) throw ValidationError(csv_path + ": table needs a header and rows");

    const auto header = split_csv_line(lines[0]);
    int m = 0;
    while (m < static_cast<int>(header.size()) &&
           header[static_cast<std::size_t>(m)] == "theta_" + std::to_string(m + 1))
        ++m;
    const int n = static_cast<int>(header.size()) - m;
    if (m < 1 || n < 1)
        throw ValidationError(csv_path + ": header must be theta_1..theta_m,s_1..s_n");
    for (int k = 0; k < n; ++k)
        if (header[static_cast<std::size_t>(m + k)] != "s_" + std::to_string(k + 1))
            throw ValidationError(csv_path + ": header must be theta_1..theta_m,s_1..s_n");

    ReferenceTable table;
    const long long rows = static_cast<long long>(lines.size()) - 1;
    table.params.resize(rows, m);
    table.stats.resize(rows, n);
    for (long long i = 0; i < rows; ++i) {
        const auto fields = split_csv_line(lines[static_cast<std::size_t>(i + 1)]);
        if (static_cast<int>(fields.size()) != m + n)
            throw ValidationError(csv_path + ": row " + std::to_string(i + 1) +
                                  " has wrong field count");
        const std::string ctx = csv_path + " row " + std::to_string(i + 1);
        for (int k = 0; k < m; ++k)
            table.params(i, k) = parse_double(fields[static_cast<std::size_t>(k)], ctx);
        for (int k = 0; k < n; ++k)
            table.stats(i, k) = parse_double(fields[static_cast<std::size_t>(m + k)], ctx);
    }

    nlohmann::json meta;
    const std::string meta_path = table_sidecar_path(csv_path);
    try {
        meta = nlohmann::json::parse(read_text_file(meta_path));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(meta_path + ": invalid metadata sidecar: " + e.what());
    }
    try {
        table.total_proposals = meta.at("total_proposals").get<long long>();
        table.epsilon = meta.at("epsilon").get<double>();
        const auto s_obs = meta.at("s_obs").get<std::vector<double>>();
        table.s_obs = Eigen::Map<const Vector>(s_obs.data(), static_cast<long>(s_obs.size()));
        table.distance_kind = distance_kind_from_string(meta.at("distance_kind").get<std::string>());
        table.seed = meta.at("seed").get<std::uint64_t>();
        if (meta.contains("n_rows") && meta.at("n_rows").get<long long>() != rows)
            throw ValidationError(meta_path + ": n_rows does not match the CSV");
        if (table.distance_kind == DistanceKind::mahalanobis) {
            const auto cov = meta.at("distance_covariance").get<std::vector<std::vector<double>>>();
            table.distance_covariance.resize(static_cast<long>(cov.size()), n);
            for (std::size_t r = 0; r < cov.size(); ++r) {
                if (static_cast<int>(cov[r].size()) != n)
                    throw ValidationError(meta_path + ": distance_covariance shape mismatch");
                for (int c = 0; c < n; ++c) table.distance_covariance(static_cast<long>(r), c) = cov[r][c];
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(meta_path + ": missing or malformed field: " + e.what());
    }

    table.validate();
    return table;
}

}  // namespace abcglm
