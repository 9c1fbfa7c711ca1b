// Mixed-type schema of a tabular dataset: feature kinds, level catalogs,
// standardization statistics, and the forward/inverse encoders.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "cardicat/csv.hpp"
#include "cardicat/errors.hpp"
#include "cardicat/rng.hpp"

namespace cardicat {

// Sentinel level given to missing discrete values. Mask levels are appended
// by the conditional model variant, never present in data schemas.
inline constexpr const char* kMissingLevel = "⟨NA⟩";    // ⟨NA⟩
inline constexpr const char* kMaskLevel = "⟨MASK⟩";     // ⟨MASK⟩

enum class FeatureKind { numerical, binary, categorical };

inline std::string to_string(FeatureKind k) {
    switch (k) {
        case FeatureKind::numerical: return "numerical";
        case FeatureKind::binary: return "binary";
        case FeatureKind::categorical: return "categorical";
    }
    return "?";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
    if (s == "numerical") return FeatureKind::numerical;
    if (s == "binary") return FeatureKind::binary;
    if (s == "categorical") return FeatureKind::categorical;
    throw DataError("schema: unknown feature kind '" + s + "'");
}

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::numerical;
    std::vector<std::string> levels;  // discrete kinds only; code = index
    double mean = 0.0;                // numerical only
    double sd = 1.0;                  // numerical only

    bool discrete() const { return kind != FeatureKind::numerical; }
    int cardinality() const { return static_cast<int>(levels.size()); }

    int code_of(const std::string& level) const {
        for (std::size_t i = 0; i < levels.size(); ++i)
            if (levels[i] == level) return static_cast<int>(i);
        return -1;
    }
};

struct Schema {
    int version = 1;
    std::vector<FeatureSpec> features;

    std::size_t size() const { return features.size(); }

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < features.size(); ++i)
            if (features[i].name == name) return static_cast<int>(i);
        return -1;
    }

    std::vector<std::size_t> indices_of(FeatureKind k) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < features.size(); ++i)
            if (features[i].kind == k) out.push_back(i);
        return out;
    }
};

inline void validate(const Schema& schema) {
    std::set<std::string> names;
    for (const auto& f : schema.features) {
        if (!names.insert(f.name).second) throw DataError("schema: duplicate feature name '" + f.name + "'");
        switch (f.kind) {
            case FeatureKind::numerical:
                if (!(f.sd > 0.0) || !std::isfinite(f.sd) || !std::isfinite(f.mean))
                    throw DataError("schema: feature '" + f.name + "' has invalid mean/sd");
                if (!f.levels.empty()) throw DataError("schema: numerical feature '" + f.name + "' has levels");
                break;
            case FeatureKind::binary:
                if (f.levels.empty() || f.levels.size() > 2)
                    throw DataError("schema: binary feature '" + f.name + "' must have 1..2 levels");
                break;
            case FeatureKind::categorical:
                if (f.levels.size() < 3)
                    throw DataError("schema: categorical feature '" + f.name + "' must have >= 3 levels");
                break;
        }
        std::set<std::string> lv(f.levels.begin(), f.levels.end());
        if (lv.size() != f.levels.size())
            throw DataError("schema: feature '" + f.name + "' has duplicate levels");
    }
}

inline nlohmann::json to_json(const Schema& schema) {
    nlohmann::json j;
    j["version"] = schema.version;
    j["features"] = nlohmann::json::array();
    for (const auto& f : schema.features) {
        nlohmann::json jf;
        jf["name"] = f.name;
        jf["kind"] = to_string(f.kind);
        if (f.discrete()) {
            jf["cardinality"] = f.cardinality();
            jf["levels"] = f.levels;
        } else {
            jf["mean"] = f.mean;
            jf["sd"] = f.sd;
        }
        j["features"].push_back(jf);
    }
    return j;
}

inline Schema schema_from_json(const nlohmann::json& j) {
    Schema schema;
    schema.version = j.at("version").get<int>();
    if (schema.version != 1) throw DataError("schema: unsupported version " + std::to_string(schema.version));
    for (const auto& jf : j.at("features")) {
        FeatureSpec f;
        f.name = jf.at("name").get<std::string>();
        f.kind = feature_kind_from_string(jf.at("kind").get<std::string>());
        if (f.kind != FeatureKind::numerical) {
            f.levels = jf.at("levels").get<std::vector<std::string>>();
            if (jf.at("cardinality").get<int>() != f.cardinality())
                throw DataError("schema: cardinality disagrees with levels for '" + f.name + "'");
        } else {
            f.mean = jf.at("mean").get<double>();
            f.sd = jf.at("sd").get<double>();
        }
        schema.features.push_back(std::move(f));
    }
    validate(schema);
    return schema;
}

// ---------------------------------------------------------------------------
// Inference

struct InferOptions {
    // All-numeric columns with at most this many distinct values are treated
    // as categorical. 0 disables the rule.
    int max_numeric_as_categorical = 0;
};

namespace schema_detail {

inline bool is_missing(const std::string& cell) { return cell.empty(); }

// Levels ordered by descending frequency, ties broken lexicographically.
inline std::vector<std::string> ordered_levels(const std::map<std::string, std::size_t>& counts) {
    std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> levels;
    levels.reserve(items.size());
    for (auto& [lv, n] : items) levels.push_back(lv);
    return levels;
}

}  // namespace schema_detail

struct IngestResult {
    Schema schema;
    std::vector<std::vector<std::string>> rows;  // rows kept after missing-numerical drop
    std::size_t dropped_rows = 0;
};

// Classifies columns, drops rows with missing numerical cells, builds level
// catalogs (missing discrete values become the dedicated ⟨NA⟩ level) and
// computes standardization statistics from the surviving rows.
inline IngestResult ingest(const CsvTable& table, const InferOptions& options = {}) {
    if (table.rows.empty()) throw DataError("ingest: no data rows");
    {
        std::set<std::string> names(table.header.begin(), table.header.end());
        if (names.size() != table.header.size()) throw DataError("ingest: duplicate header names");
    }
    const std::size_t m = table.header.size();

    // Pass 1: numeric-or-not per column, over non-missing cells.
    std::vector<bool> numeric(m, true);
    std::vector<std::set<std::string>> distinct(m);
    std::vector<bool> any_missing(m, false);
    for (const auto& row : table.rows) {
        for (std::size_t j = 0; j < m; ++j) {
            const std::string& cell = row[j];
            if (schema_detail::is_missing(cell)) {
                any_missing[j] = true;
                continue;
            }
            if (numeric[j]) {
                bool ok = false;
                parse_double(cell, ok);
                if (!ok) numeric[j] = false;
            }
            distinct[j].insert(cell);
        }
    }
    for (std::size_t j = 0; j < m; ++j) {
        if (distinct[j].empty()) throw DataError("ingest: column '" + table.header[j] + "' has no values");
        if (numeric[j] &&
            static_cast<int>(distinct[j].size()) <= options.max_numeric_as_categorical)
            numeric[j] = false;
    }

    // Pass 2: drop rows that miss a value in a numerical column.
    IngestResult result;
    for (const auto& row : table.rows) {
        bool keep = true;
        for (std::size_t j = 0; j < m && keep; ++j)
            if (numeric[j] && schema_detail::is_missing(row[j])) keep = false;
        if (keep)
            result.rows.push_back(row);
        else
            ++result.dropped_rows;
    }
    if (result.rows.empty()) throw DataError("ingest: all rows dropped (missing numerical values)");

    // Pass 3: per-column statistics / level catalogs on kept rows.
    result.schema.version = 1;
    for (std::size_t j = 0; j < m; ++j) {
        FeatureSpec f;
        f.name = table.header[j];
        if (numeric[j]) {
            f.kind = FeatureKind::numerical;
            double sum = 0.0;
            for (const auto& row : result.rows) {
                bool ok = false;
                sum += parse_double(row[j], ok);
            }
            const double n = static_cast<double>(result.rows.size());
            f.mean = sum / n;
            double ss = 0.0;
            for (const auto& row : result.rows) {
                bool ok = false;
                const double d = parse_double(row[j], ok) - f.mean;
                ss += d * d;
            }
            f.sd = result.rows.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
            if (!(f.sd > 0.0))
                throw DataError("ingest: numerical column '" + f.name + "' is constant");
        } else {
            std::map<std::string, std::size_t> counts;
            bool saw_missing = false;
            for (const auto& row : result.rows) {
                if (schema_detail::is_missing(row[j]))
                    saw_missing = true;
                else
                    ++counts[row[j]];
            }
            if (saw_missing) {
                if (counts.count(kMissingLevel))
                    throw DataError("ingest: column '" + f.name + "' mixes missing cells with literal " +
                                    std::string(kMissingLevel));
                std::size_t n_missing = 0;
                for (const auto& row : result.rows)
                    if (schema_detail::is_missing(row[j])) ++n_missing;
                counts[kMissingLevel] = n_missing;
            }
            f.levels = schema_detail::ordered_levels(counts);
            f.kind = f.levels.size() <= 2 ? FeatureKind::binary : FeatureKind::categorical;
        }
        result.schema.features.push_back(std::move(f));
    }
    validate(result.schema);
    return result;
}

inline Schema infer_schema(const CsvTable& table, const InferOptions& options = {}) {
    return ingest(table, options).schema;
}

// ---------------------------------------------------------------------------
// Encoding

struct EncodedDataset {
    std::size_t n_rows = 0;
    // Parallel to schema features: codes for discrete kinds, reals otherwise.
    std::vector<std::vector<std::int32_t>> codes;
    std::vector<std::vector<double>> reals;
};

struct EncodeOptions {
    bool strict = true;  // lenient maps unknown levels to ⟨NA⟩ when present
};

inline EncodedDataset encode(const Schema& schema,
                             const std::vector<std::vector<std::string>>& rows,
                             const EncodeOptions& options = {}) {
    EncodedDataset out;
    out.n_rows = rows.size();
    out.codes.resize(schema.size());
    out.reals.resize(schema.size());
    std::vector<std::unordered_map<std::string, std::int32_t>> lookup(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto& f = schema.features[j];
        if (f.discrete()) {
            out.codes[j].reserve(rows.size());
            for (std::size_t c = 0; c < f.levels.size(); ++c)
                lookup[j][f.levels[c]] = static_cast<std::int32_t>(c);
        } else {
            out.reals[j].reserve(rows.size());
        }
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() != schema.size())
            throw DataError("encode: row " + std::to_string(i) + " has " + std::to_string(row.size()) +
                            " fields, expected " + std::to_string(schema.size()));
        for (std::size_t j = 0; j < schema.size(); ++j) {
            const auto& f = schema.features[j];
            const std::string& cell = row[j];
            if (f.discrete()) {
                const std::string& key = schema_detail::is_missing(cell) ? kMissingLevel : cell;
                auto it = lookup[j].find(key);
                if (it == lookup[j].end() && !options.strict) it = lookup[j].find(kMissingLevel);
                if (it == lookup[j].end())
                    throw DataError("encode: unknown level '" + cell + "' in feature '" + f.name + "'");
                out.codes[j].push_back(it->second);
            } else {
                bool ok = false;
                const double v = parse_double(cell, ok);
                if (!ok)
                    throw DataError("encode: non-numeric value '" + cell + "' in feature '" + f.name + "'");
                out.reals[j].push_back((v - f.mean) / f.sd);
            }
        }
    }
    return out;
}

inline std::vector<std::vector<std::string>> decode(const Schema& schema, const EncodedDataset& data) {
    std::vector<std::vector<std::string>> rows(data.n_rows, std::vector<std::string>(schema.size()));
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto& f = schema.features[j];
        if (f.discrete()) {
            if (data.codes[j].size() != data.n_rows) throw DataError("decode: column size mismatch");
            for (std::size_t i = 0; i < data.n_rows; ++i) {
                const std::int32_t c = data.codes[j][i];
                if (c < 0 || c >= f.cardinality())
                    throw DataError("decode: code " + std::to_string(c) + " out of range for feature '" +
                                    f.name + "'");
                rows[i][j] = f.levels[static_cast<std::size_t>(c)];
            }
        } else {
            if (data.reals[j].size() != data.n_rows) throw DataError("decode: column size mismatch");
            for (std::size_t i = 0; i < data.n_rows; ++i) {
                const double v = data.reals[j][i];
                if (!std::isfinite(v)) throw DataError("decode: non-finite value in feature '" + f.name + "'");
                rows[i][j] = format_double(v * f.sd + f.mean);
            }
        }
    }
    return rows;
}

inline std::vector<double> one_hot(int code, int cardinality) {
    if (code < 0 || code >= cardinality)
        throw DataError("one_hot: code " + std::to_string(code) + " out of range [0, " +
                        std::to_string(cardinality) + ")");
    std::vector<double> v(static_cast<std::size_t>(cardinality), 0.0);
    v[static_cast<std::size_t>(code)] = 1.0;
    return v;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

inline SplitIndices split_indices(std::size_t n_rows, double fraction, std::uint64_t seed) {
    if (n_rows < 2) throw DataError("split: need at least 2 rows");
    if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("split: fraction must be in (0, 1)");
    std::vector<std::size_t> order(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n_rows) * fraction));
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return s;
}

template <typename Row>
std::vector<Row> take_rows(const std::vector<Row>& rows, const std::vector<std::size_t>& idx) {
    std::vector<Row> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(rows.at(i));
    return out;
}

// Replaces numerical mean/sd with statistics of the given rows. Used to fit
// standardization on the training split while keeping full-data level catalogs.
inline void refit_standardization(Schema& schema, const std::vector<std::vector<std::string>>& rows) {
    if (rows.empty()) throw DataError("refit_standardization: no rows");
    for (std::size_t j = 0; j < schema.size(); ++j) {
        auto& f = schema.features[j];
        if (f.discrete()) continue;
        double sum = 0.0;
        for (const auto& row : rows) {
            bool ok = false;
            const double v = parse_double(row.at(j), ok);
            if (!ok) throw DataError("refit_standardization: non-numeric value in '" + f.name + "'");
            sum += v;
        }
        const double n = static_cast<double>(rows.size());
        f.mean = sum / n;
        double ss = 0.0;
        for (const auto& row : rows) {
            bool ok = false;
            const double d = parse_double(row.at(j), ok) - f.mean;
            ss += d * d;
        }
        f.sd = rows.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        if (!(f.sd > 0.0)) throw DataError("refit_standardization: column '" + f.name + "' is constant");
    }
}

}  // namespace cardicat
