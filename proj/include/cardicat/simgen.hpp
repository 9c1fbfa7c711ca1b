// Simulated mixed-type benchmark data: 5 discrete features (cardinalities
// 2, 5, 10, 20, 50) and 6 numericals, with one dependent pair of each kind
// (cat-cat, num-num, cat-num) so every fidelity metric is exercised.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cardicat/csv.hpp"
#include "cardicat/errors.hpp"
#include "cardicat/rng.hpp"

namespace cardicat {

struct SimSpec {
    std::size_t n_rows = 100000;
    std::uint64_t seed = 1;
};

inline nlohmann::json to_json(const SimSpec& spec) {
    return nlohmann::json{{"n_rows", spec.n_rows}, {"seed", spec.seed}};
}

inline void apply_json(SimSpec& spec, const nlohmann::json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "n_rows") spec.n_rows = val.get<std::size_t>();
        else if (key == "seed") spec.seed = val.get<std::uint64_t>();
        else throw UsageError("sim spec: unknown key '" + key + "'");
    }
    if (spec.n_rows < 1) throw UsageError("sim spec: n_rows must be >= 1");
}

inline SimSpec sim_spec_from_json(const nlohmann::json& j) {
    SimSpec spec;
    apply_json(spec, j);
    return spec;
}

// The generating distributions, exposed so tests can check the output's
// empirical laws against the exact tables.
struct SimTables {
    std::vector<double> c2_weights;                   // Zipf over 5 levels, normalized
    std::vector<std::vector<double>> c3_transition;   // 5 x 10 row-stochastic, rows: C2 level
    std::vector<double> c4_weights;                   // Zipf over 20
    std::vector<double> c5_weights;                   // Zipf over 50
    std::vector<double> n4_shift;                     // N4 mean per C2 level
    double n1n2_rho = 0.8;
    double c1_p_yes = 0.3;
};

namespace simgen_detail {

inline std::vector<double> zipf_weights(std::size_t c) {
    std::vector<double> w(c);
    double total = 0.0;
    for (std::size_t l = 0; l < c; ++l) {
        w[l] = 1.0 / static_cast<double>(l + 1);
        total += w[l];
    }
    for (double& v : w) v /= total;
    return w;
}

inline std::string level_name(std::size_t idx) {  // 0 -> "v01"
    const std::size_t n = idx + 1;
    std::string s = std::to_string(n);
    if (s.size() < 2) s.insert(s.begin(), '0');
    return "v" + s;
}

}  // namespace simgen_detail

inline const SimTables& sim_tables() {
    static const SimTables tables = [] {
        SimTables t;
        t.c2_weights = simgen_detail::zipf_weights(5);
        t.c4_weights = simgen_detail::zipf_weights(20);
        t.c5_weights = simgen_detail::zipf_weights(50);
        // Transition mass concentrated around column 2i, decaying with
        // distance: a strong, known cat-cat dependence.
        t.c3_transition.assign(5, std::vector<double>(10, 0.0));
        for (std::size_t i = 0; i < 5; ++i) {
            double total = 0.0;
            for (std::size_t j = 0; j < 10; ++j) {
                const double d = std::abs(static_cast<double>(j) - 2.0 * static_cast<double>(i));
                t.c3_transition[i][j] = 1.0 / (1.0 + d);
                total += t.c3_transition[i][j];
            }
            for (double& v : t.c3_transition[i]) v /= total;
        }
        t.n4_shift = {0.0, 1.0, 2.0, 3.0, 4.0};
        return t;
    }();
    return tables;
}

inline const std::vector<std::string>& sim_header() {
    static const std::vector<std::string> header{"C1", "C2", "C3", "C4", "C5",
                                                 "N1", "N2", "N3", "N4", "N5", "N6"};
    return header;
}

// Fixed per-row draw order (C1..C5 then N1..N6) over one sequential RNG
// stream; the output is byte-identical for a given spec.
inline CsvTable simulate(const SimSpec& spec) {
    const SimTables& t = sim_tables();
    Rng rng(spec.seed);
    CsvTable out;
    out.header = sim_header();
    out.rows.reserve(spec.n_rows);
    const double rho = t.n1n2_rho;
    const double rho_c = std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < spec.n_rows; ++i) {
        std::vector<std::string> row;
        row.reserve(11);
        row.push_back(rng.uniform() < t.c1_p_yes ? "yes" : "no");
        const std::size_t c2 = rng.discrete(t.c2_weights);
        row.push_back(simgen_detail::level_name(c2));
        row.push_back(simgen_detail::level_name(rng.discrete(t.c3_transition[c2])));
        row.push_back(simgen_detail::level_name(rng.discrete(t.c4_weights)));
        row.push_back(simgen_detail::level_name(rng.discrete(t.c5_weights)));
        const double g1 = rng.gaussian();
        const double g2 = rng.gaussian();
        row.push_back(format_double(g1));
        row.push_back(format_double(rho * g1 + rho_c * g2));
        row.push_back(format_double(rng.gaussian()));
        row.push_back(format_double(rng.gaussian() + t.n4_shift[c2]));
        row.push_back(format_double(rng.exponential()));
        row.push_back(format_double(rng.uniform(-1.0, 1.0)));
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace cardicat
