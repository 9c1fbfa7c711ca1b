// Synthetic-row generation: sample the latent prior, decode, and map decoder
// outputs back to raw labels and de-standardized numerical values.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cardicat/errors.hpp"
#include "cardicat/model.hpp"
#include "cardicat/nn.hpp"
#include "cardicat/rng.hpp"
#include "cardicat/schema.hpp"

namespace cardicat {

enum class DecodeRule { nearest, softmax };

inline std::string to_string(DecodeRule r) { return r == DecodeRule::nearest ? "nearest" : "softmax"; }

inline DecodeRule decode_rule_from_string(const std::string& s) {
    if (s == "nearest") return DecodeRule::nearest;
    if (s == "softmax") return DecodeRule::softmax;
    throw UsageError("unknown decode rule '" + s + "' (expected nearest | softmax)");
}

struct SynthesisRequest {
    std::size_t n_rows = 1;
    std::uint64_t seed = 1;
    std::map<std::string, std::string> condition;  // conditional mode only
    DecodeRule decode_rule = DecodeRule::nearest;  // softmax-over-distances is non-default
};

// Index of the candidate row closest to query in squared Euclidean distance;
// ties go to the lowest code. Candidates are the first n_candidates rows.
template <typename T>
std::size_t nearest_row(const Matrix<T>& table, const T* query, std::size_t n_candidates) {
    if (n_candidates == 0 || n_candidates > table.rows)
        throw std::invalid_argument("nearest_row: bad candidate count");
    std::size_t best = 0;
    T best_d{0};
    for (std::size_t r = 0; r < n_candidates; ++r) {
        T d{0};
        for (std::size_t j = 0; j < table.cols; ++j) {
            const T diff = query[j] - table(r, j);
            d += diff * diff;
        }
        if (r == 0 || d < best_d) {
            best = r;
            best_d = d;
        }
    }
    return best;
}

// Draws n_rows from the prior and decodes to raw rows in schema column
// order. A non-empty condition needs a conditional-mode model; an empty one
// on a conditional model is the all-mask vector.
template <typename T>
std::vector<std::vector<std::string>> sample_rows(const CardiCatModel<T>& model,
                                                  const SynthesisRequest& request) {
    if (request.n_rows < 1) throw UsageError("sample: n_rows must be >= 1");
    if (!request.condition.empty() && !model.conditional())
        throw UsageError("sample: condition requires a conditional-mode checkpoint");

    Rng rng(request.seed);
    const std::size_t n = request.n_rows;
    Matrix<T> z = gauss_sample<T>(rng, n, model.config.latent_dim);

    Matrix<T> cond;
    if (model.conditional())
        cond = broadcast_rows(conditional_vector(model, request.condition), n);
    DecodeResult<T> dec = decode_batch(model, z, model.conditional() ? &cond : nullptr);

    EncodedDataset out;
    out.n_rows = n;
    out.codes.resize(model.schema.size());
    out.reals.resize(model.schema.size());
    for (std::size_t j = 0; j < model.schema.size(); ++j) {
        const std::size_t pos = model.kind_pos[j];
        const auto& f = model.schema.features[j];
        switch (f.kind) {
            case FeatureKind::categorical: {
                auto& codes = out.codes[j];
                codes.reserve(n);
                const Matrix<T>& y = dec.cat[pos];
                if (!model.uses_embeddings()) {
                    // Baseline softmax head. The default rule takes the
                    // mode (argmax, ties to the lowest code), the one-hot
                    // analog of the nearest-row rule; the softmax rule
                    // draws from the probabilities instead.
                    if (request.decode_rule == DecodeRule::nearest) {
                        for (std::size_t i = 0; i < n; ++i) {
                            std::size_t best = 0;
                            for (std::size_t c = 1; c < y.cols; ++c)
                                if (y(i, c) > y(i, best)) best = c;
                            codes.push_back(static_cast<std::int32_t>(best));
                        }
                    } else {
                        std::vector<double> w(y.cols);
                        for (std::size_t i = 0; i < n; ++i) {
                            for (std::size_t c = 0; c < y.cols; ++c) w[c] = static_cast<double>(y(i, c));
                            codes.push_back(static_cast<std::int32_t>(rng.discrete(w)));
                        }
                    }
                    break;
                }
                const Matrix<T>& table = model.emb[pos]->value;
                // The mask row (appended last) is never a sampling candidate.
                const std::size_t n_candidates = model.conditional() ? table.rows - 1 : table.rows;
                if (request.decode_rule == DecodeRule::nearest) {
                    for (std::size_t i = 0; i < n; ++i)
                        codes.push_back(static_cast<std::int32_t>(
                            nearest_row(table, &y.data[i * y.cols], n_candidates)));
                } else {
                    std::vector<double> w(n_candidates);
                    for (std::size_t i = 0; i < n; ++i) {
                        double mx = 0.0;
                        for (std::size_t r = 0; r < n_candidates; ++r) {
                            double d = 0.0;
                            for (std::size_t k = 0; k < table.cols; ++k) {
                                const double diff =
                                    static_cast<double>(y(i, k)) - static_cast<double>(table(r, k));
                                d += diff * diff;
                            }
                            w[r] = -d;
                            if (r == 0 || w[r] > mx) mx = w[r];
                        }
                        for (double& v : w) v = std::exp(v - mx);
                        codes.push_back(static_cast<std::int32_t>(rng.discrete(w)));
                    }
                }
                break;
            }
            case FeatureKind::binary: {
                auto& codes = out.codes[j];
                codes.reserve(n);
                const Matrix<T>& probs = dec.bin[pos];
                std::vector<double> w(probs.cols);
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t c = 0; c < probs.cols; ++c) w[c] = static_cast<double>(probs(i, c));
                    codes.push_back(static_cast<std::int32_t>(rng.discrete(w)));
                }
                break;
            }
            case FeatureKind::numerical: {
                auto& vals = out.reals[j];
                vals.reserve(n);
                for (std::size_t i = 0; i < n; ++i)
                    vals.push_back(static_cast<double>(dec.num[pos](i, 0)));
                break;
            }
        }
    }
    return decode(model.schema, out);
}

}  // namespace cardicat
