// Fidelity scoring of synthetic data against a held-out sample: marginal
// KS/TVD complements, pairwise contingency TVD, correlation difference and
// the conditional mixed score, plus the five-column aggregate summary.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cardicat/csv.hpp"
#include "cardicat/errors.hpp"
#include "cardicat/schema.hpp"

namespace cardicat {

// 1 - sup |F_n - F_m| over the two empirical CDFs (two-pointer merge).
inline double ks_score(std::vector<double> real, std::vector<double> synth) {
    if (real.empty() || synth.empty()) throw DataError("ks_score: empty sample");
    std::sort(real.begin(), real.end());
    std::sort(synth.begin(), synth.end());
    const double inv_n = 1.0 / static_cast<double>(real.size());
    const double inv_m = 1.0 / static_cast<double>(synth.size());
    std::size_t i = 0, j = 0;
    double sup = 0.0;
    while (i < real.size() && j < synth.size()) {
        const double x = std::min(real[i], synth[j]);
        while (i < real.size() && real[i] <= x) ++i;
        while (j < synth.size() && synth[j] <= x) ++j;
        sup = std::max(sup, std::abs(static_cast<double>(i) * inv_n - static_cast<double>(j) * inv_m));
    }
    // Past this point one CDF is pinned at 1 and the gap only shrinks.
    return 1.0 - sup;
}

// 1 - total variation distance between the two level marginals.
inline double tvd_score(const std::vector<std::int32_t>& real, const std::vector<std::int32_t>& synth,
                        int n_levels) {
    if (real.empty() || synth.empty()) throw DataError("tvd_score: empty sample");
    std::vector<double> r(static_cast<std::size_t>(n_levels), 0.0), s(r);
    for (std::int32_t c : real) r.at(static_cast<std::size_t>(c)) += 1.0;
    for (std::int32_t c : synth) s.at(static_cast<std::size_t>(c)) += 1.0;
    double dist = 0.0;
    for (std::size_t l = 0; l < r.size(); ++l)
        dist += std::abs(r[l] / static_cast<double>(real.size()) -
                         s[l] / static_cast<double>(synth.size()));
    return 1.0 - 0.5 * dist;
}

// 1 - TVD on the joint contingency table of two discrete columns.
inline double pair_tvd_score(const std::vector<std::int32_t>& real_a,
                             const std::vector<std::int32_t>& real_b,
                             const std::vector<std::int32_t>& synth_a,
                             const std::vector<std::int32_t>& synth_b, int ca, int cb) {
    if (real_a.empty() || synth_a.empty()) throw DataError("pair_tvd_score: empty sample");
    if (real_a.size() != real_b.size() || synth_a.size() != synth_b.size())
        throw DataError("pair_tvd_score: column length mismatch");
    const std::size_t cells = static_cast<std::size_t>(ca) * static_cast<std::size_t>(cb);
    std::vector<double> r(cells, 0.0), s(cells, 0.0);
    for (std::size_t i = 0; i < real_a.size(); ++i)
        r.at(static_cast<std::size_t>(real_a[i]) * static_cast<std::size_t>(cb) +
             static_cast<std::size_t>(real_b[i])) += 1.0;
    for (std::size_t i = 0; i < synth_a.size(); ++i)
        s.at(static_cast<std::size_t>(synth_a[i]) * static_cast<std::size_t>(cb) +
             static_cast<std::size_t>(synth_b[i])) += 1.0;
    double dist = 0.0;
    for (std::size_t l = 0; l < cells; ++l)
        dist += std::abs(r[l] / static_cast<double>(real_a.size()) -
                         s[l] / static_cast<double>(synth_a.size()));
    return 1.0 - 0.5 * dist;
}

inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;  // constant column
    return sxy / std::sqrt(sxx * syy);
}

// 1 - |corr(real) - corr(synth)| / 2; empty when either correlation is
// undefined (a constant column), so the pair drops out of the aggregate.
inline std::optional<double> corr_score(const std::vector<double>& real_x,
                                        const std::vector<double>& real_y,
                                        const std::vector<double>& synth_x,
                                        const std::vector<double>& synth_y) {
    if (real_x.empty() || synth_x.empty()) throw DataError("corr_score: empty sample");
    if (real_x.size() != real_y.size() || synth_x.size() != synth_y.size())
        throw DataError("corr_score: column length mismatch");
    const auto cr = pearson(real_x, real_y);
    const auto cs = pearson(synth_x, synth_y);
    if (!cr || !cs) return std::nullopt;
    return 1.0 - std::abs(*cr - *cs) / 2.0;
}

// 1 - sum_l pi_l * KS_l: pi_l is the REAL marginal of level l, KS_l the
// two-sample statistic between the conditional numerical samples given
// level l, and 1 when the synthetic sample lacks the level entirely.
inline double mixed_score(const std::vector<std::int32_t>& real_cat,
                          const std::vector<double>& real_num,
                          const std::vector<std::int32_t>& synth_cat,
                          const std::vector<double>& synth_num, int n_levels) {
    if (real_cat.empty()) throw DataError("mixed_score: empty real sample");
    if (real_cat.size() != real_num.size() || synth_cat.size() != synth_num.size())
        throw DataError("mixed_score: column length mismatch");
    std::vector<std::vector<double>> real_by(static_cast<std::size_t>(n_levels));
    std::vector<std::vector<double>> synth_by(static_cast<std::size_t>(n_levels));
    for (std::size_t i = 0; i < real_cat.size(); ++i)
        real_by.at(static_cast<std::size_t>(real_cat[i])).push_back(real_num[i]);
    for (std::size_t i = 0; i < synth_cat.size(); ++i)
        synth_by.at(static_cast<std::size_t>(synth_cat[i])).push_back(synth_num[i]);
    double weighted = 0.0;
    for (std::size_t l = 0; l < real_by.size(); ++l) {
        if (real_by[l].empty()) continue;  // pi_l = 0
        const double pi = static_cast<double>(real_by[l].size()) / static_cast<double>(real_cat.size());
        const double ks = synth_by[l].empty() ? 1.0 : 1.0 - ks_score(real_by[l], synth_by[l]);
        weighted += pi * ks;
    }
    return 1.0 - weighted;
}

// ---------------------------------------------------------------------------
// Full report

struct FidelityReport {
    struct Marginal {
        std::string feature;
        FeatureKind kind;
        double score = 0.0;
    };
    struct Pair {
        std::string a, b;
        std::string kind;  // categorical | correlation | mixed
        std::optional<double> score;
    };
    std::vector<Marginal> marginals;
    std::vector<Pair> pairs;
    std::optional<double> marginal_categorical, marginal_numerical;
    std::optional<double> pairs_categorical, pairs_mixed, pairs_correlation;
};

namespace fidelity_detail {

inline std::optional<double> mean(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace fidelity_detail

// Scores synthetic rows against real rows under one schema. Marginals use
// tvd for the discrete kinds and ks for numericals; pairs route by kind.
inline FidelityReport evaluate(const Schema& schema,
                               const std::vector<std::vector<std::string>>& real_rows,
                               const std::vector<std::vector<std::string>>& synth_rows) {
    if (real_rows.empty() || synth_rows.empty()) throw DataError("evaluate: empty dataset");
    const EncodedDataset real = encode(schema, real_rows);
    const EncodedDataset synth = encode(schema, synth_rows);

    FidelityReport report;
    std::vector<double> agg_mc, agg_mn, agg_pc, agg_pm, agg_pr;

    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto& f = schema.features[j];
        double score;
        if (f.discrete()) {
            score = tvd_score(real.codes[j], synth.codes[j], f.cardinality());
            agg_mc.push_back(score);
        } else {
            score = ks_score(real.reals[j], synth.reals[j]);
            agg_mn.push_back(score);
        }
        report.marginals.push_back({f.name, f.kind, score});
    }

    for (std::size_t j1 = 0; j1 < schema.size(); ++j1) {
        for (std::size_t j2 = j1 + 1; j2 < schema.size(); ++j2) {
            const auto& fa = schema.features[j1];
            const auto& fb = schema.features[j2];
            FidelityReport::Pair entry{fa.name, fb.name, "", std::nullopt};
            if (fa.discrete() && fb.discrete()) {
                entry.kind = "categorical";
                entry.score = pair_tvd_score(real.codes[j1], real.codes[j2], synth.codes[j1],
                                             synth.codes[j2], fa.cardinality(), fb.cardinality());
                agg_pc.push_back(*entry.score);
            } else if (!fa.discrete() && !fb.discrete()) {
                entry.kind = "correlation";
                entry.score = corr_score(real.reals[j1], real.reals[j2], synth.reals[j1],
                                         synth.reals[j2]);
                if (entry.score) agg_pr.push_back(*entry.score);
            } else {
                entry.kind = "mixed";
                const std::size_t jc = fa.discrete() ? j1 : j2;
                const std::size_t jn = fa.discrete() ? j2 : j1;
                entry.score = mixed_score(real.codes[jc], real.reals[jn], synth.codes[jc],
                                          synth.reals[jn], schema.features[jc].cardinality());
                agg_pm.push_back(*entry.score);
            }
            report.pairs.push_back(std::move(entry));
        }
    }

    report.marginal_categorical = fidelity_detail::mean(agg_mc);
    report.marginal_numerical = fidelity_detail::mean(agg_mn);
    report.pairs_categorical = fidelity_detail::mean(agg_pc);
    report.pairs_mixed = fidelity_detail::mean(agg_pm);
    report.pairs_correlation = fidelity_detail::mean(agg_pr);
    return report;
}

inline nlohmann::json to_json(const FidelityReport& report) {
    nlohmann::json j;
    j["marginals"] = nlohmann::json::array();
    for (const auto& m : report.marginals)
        j["marginals"].push_back({{"feature", m.feature}, {"kind", to_string(m.kind)}, {"score", m.score}});
    j["pairs"] = nlohmann::json::array();
    for (const auto& p : report.pairs) {
        nlohmann::json jp{{"a", p.a}, {"b", p.b}, {"kind", p.kind}};
        if (p.score)
            jp["score"] = *p.score;
        else
            jp["score"] = nullptr;  // excluded (constant column)
        j["pairs"].push_back(jp);
    }
    auto put = [](nlohmann::json& dst, const char* key, const std::optional<double>& v) {
        if (v)
            dst[key] = *v;
        else
            dst[key] = nullptr;
    };
    nlohmann::json agg;
    put(agg, "marginal_categorical", report.marginal_categorical);
    put(agg, "marginal_numerical", report.marginal_numerical);
    put(agg, "pairs_categorical", report.pairs_categorical);
    put(agg, "pairs_mixed", report.pairs_mixed);
    put(agg, "pairs_correlation", report.pairs_correlation);
    j["aggregates"] = agg;
    return j;
}

// Two-line CSV with the five aggregate columns in table order.
inline std::string summary_csv(const FidelityReport& report) {
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    std::string out =
        "marginal_categorical,marginal_numerical,pairs_categorical,pairs_mixed,pairs_correlation\n";
    out += cell(report.marginal_categorical) + ',' + cell(report.marginal_numerical) + ',' +
           cell(report.pairs_categorical) + ',' + cell(report.pairs_mixed) + ',' +
           cell(report.pairs_correlation) + '\n';
    return out;
}

}  // namespace cardicat
