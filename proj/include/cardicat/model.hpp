// The CardiCat network: tied encoder/decoder embedding tables, the VAE
// encoder/decoder stacks, the three-term loss with the embedding-variance
// regularizer, the training loop, a one-hot baseline mode and the masked
// conditional variant.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cardicat/autodiff.hpp"
#include "cardicat/errors.hpp"
#include "cardicat/matrix.hpp"
#include "cardicat/nn.hpp"
#include "cardicat/params.hpp"
#include "cardicat/rng.hpp"
#include "cardicat/schema.hpp"

namespace cardicat {

enum class ModelMode { cardicat, baseline_onehot, conditional };

inline std::string to_string(ModelMode m) {
    switch (m) {
        case ModelMode::cardicat: return "cardicat";
        case ModelMode::baseline_onehot: return "baseline_onehot";
        case ModelMode::conditional: return "conditional";
    }
    return "?";
}

inline ModelMode model_mode_from_string(const std::string& s) {
    if (s == "cardicat") return ModelMode::cardicat;
    if (s == "baseline_onehot") return ModelMode::baseline_onehot;
    if (s == "conditional") return ModelMode::conditional;
    throw UsageError("unknown mode '" + s + "' (expected cardicat | baseline_onehot | conditional)");
}

enum class NumericHead { tanh, linear };

inline std::string to_string(NumericHead h) {
    return h == NumericHead::tanh ? "tanh" : "linear";
}

inline NumericHead numeric_head_from_string(const std::string& s) {
    if (s == "tanh") return NumericHead::tanh;
    if (s == "linear") return NumericHead::linear;
    throw UsageError("unknown numeric_head '" + s + "' (expected tanh | linear)");
}

struct TrainConfig {
    ModelMode mode = ModelMode::cardicat;
    NumericHead numeric_head = NumericHead::tanh;
    std::size_t latent_dim = 15;
    std::size_t hidden_dim = 128;
    std::size_t epochs = 150;
    std::size_t batch_size = 2000;
    double learning_rate = 0.0005;
    double loss_factor = 5.0;
    double lambda1 = 1.0;
    // The regularizer is an average over features and embedding columns of a
    // squared variance gap, so its per-entry gradient carries 1/|H|, 1/k_j
    // and 1/c_j factors. The default weight compensates for that scaling;
    // near 1 the term is too weak to stop the tables from collapsing.
    double lambda2 = 1000.0;
    std::uint64_t seed = 1;
    double train_fraction = 0.8;
    std::size_t max_embedding_dim = 16;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    AdamConfig adam() const { return AdamConfig{learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }
};

inline void validate(const TrainConfig& c) {
    if (c.latent_dim < 1) throw UsageError("config: latent_dim must be >= 1");
    if (c.hidden_dim < 1) throw UsageError("config: hidden_dim must be >= 1");
    if (c.batch_size < 1) throw UsageError("config: batch_size must be >= 1");
    if (!(c.learning_rate > 0.0)) throw UsageError("config: learning_rate must be > 0");
    if (c.loss_factor < 0.0 || c.lambda1 < 0.0 || c.lambda2 < 0.0)
        throw UsageError("config: loss_factor, lambda1, lambda2 must be >= 0");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
        throw UsageError("config: train_fraction must be in (0, 1)");
    if (c.max_embedding_dim < 1) throw UsageError("config: max_embedding_dim must be >= 1");
}

inline nlohmann::json to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["mode"] = to_string(c.mode);
    j["numeric_head"] = to_string(c.numeric_head);
    j["latent_dim"] = c.latent_dim;
    j["hidden_dim"] = c.hidden_dim;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["loss_factor"] = c.loss_factor;
    j["lambda1"] = c.lambda1;
    j["lambda2"] = c.lambda2;
    j["seed"] = c.seed;
    j["train_fraction"] = c.train_fraction;
    j["max_embedding_dim"] = c.max_embedding_dim;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_epsilon"] = c.adam_epsilon;
    return j;
}

// Applies the keys present in j on top of c; unknown keys are an error so a
// typo in a config file cannot silently fall back to a default.
inline void apply_json(TrainConfig& c, const nlohmann::json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "mode") c.mode = model_mode_from_string(val.get<std::string>());
        else if (key == "numeric_head") c.numeric_head = numeric_head_from_string(val.get<std::string>());
        else if (key == "latent_dim") c.latent_dim = val.get<std::size_t>();
        else if (key == "hidden_dim") c.hidden_dim = val.get<std::size_t>();
        else if (key == "epochs") c.epochs = val.get<std::size_t>();
        else if (key == "batch_size") c.batch_size = val.get<std::size_t>();
        else if (key == "learning_rate") c.learning_rate = val.get<double>();
        else if (key == "loss_factor") c.loss_factor = val.get<double>();
        else if (key == "lambda1") c.lambda1 = val.get<double>();
        else if (key == "lambda2") c.lambda2 = val.get<double>();
        else if (key == "seed") c.seed = val.get<std::uint64_t>();
        else if (key == "train_fraction") c.train_fraction = val.get<double>();
        else if (key == "max_embedding_dim") c.max_embedding_dim = val.get<std::size_t>();
        else if (key == "adam_beta1") c.adam_beta1 = val.get<double>();
        else if (key == "adam_beta2") c.adam_beta2 = val.get<double>();
        else if (key == "adam_epsilon") c.adam_epsilon = val.get<double>();
        else throw UsageError("config: unknown key '" + key + "'");
    }
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    apply_json(c, j);
    validate(c);
    return c;
}

// k_j = min(cap, ceil(sqrt(c_j))): sublinear growth keeps the parameter
// advantage over one-hot widths for high-cardinality features.
inline std::size_t embedding_dim(std::size_t cardinality, std::size_t cap) {
    const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(cardinality))));
    return std::min(cap, std::max<std::size_t>(1, k));
}

// Appends the mask level to every categorical feature; used before building
// a conditional-mode model. Binary and numerical features are untouched.
inline Schema conditional_prepare(const Schema& schema) {
    Schema out = schema;
    for (auto& f : out.features) {
        if (f.kind != FeatureKind::categorical) continue;
        if (f.code_of(kMaskLevel) >= 0)
            throw DataError("conditional_prepare: feature '" + f.name + "' already has a " +
                            std::string(kMaskLevel) + " level");
        f.levels.push_back(kMaskLevel);
    }
    return out;
}

// Inverse of conditional_prepare for evaluation purposes: a schema that
// describes the data again, with trailing mask levels removed.
inline Schema schema_without_mask_levels(const Schema& schema) {
    Schema out = schema;
    for (auto& f : out.features) {
        if (f.kind != FeatureKind::categorical) continue;
        if (!f.levels.empty() && f.levels.back() == kMaskLevel) f.levels.pop_back();
    }
    return out;
}

template <typename T>
struct CardiCatModel {
    Schema schema;  // conditional mode: mask levels already appended
    TrainConfig config;
    ParamStore<T> store;

    std::vector<std::size_t> cats;  // schema indices of categorical features (H)
    std::vector<std::size_t> bins;  // binary features (L)
    std::vector<std::size_t> nums;  // numerical features (M)
    std::vector<std::size_t> kind_pos;  // schema index -> position within its kind list

    std::vector<Parameter<T>*> emb;   // per H feature; empty in baseline mode
    std::vector<std::size_t> emb_dim; // k_j per H feature (baseline: cardinality)
    std::vector<T> initial_variance;  // frozen V_j0 per H feature; empty in baseline mode

    DenseLayer<T> enc_in, enc_hidden, enc_mu, enc_logvar;
    DenseLayer<T> dec_in, dec_hidden;
    std::vector<DenseLayer<T>> cat_heads;  // per H: 128->k_h (embedding) or 128->c_h (baseline)
    std::vector<DenseLayer<T>> bin_heads;  // per L: 128->c_l
    std::vector<DenseLayer<T>> num_heads;  // per M: 128->1

    bool uses_embeddings() const { return config.mode != ModelMode::baseline_onehot; }
    bool conditional() const { return config.mode == ModelMode::conditional; }

    std::size_t mask_code(std::size_t hpos) const {
        return static_cast<std::size_t>(schema.features[cats[hpos]].cardinality()) - 1;
    }

    std::size_t cond_width() const {
        if (!conditional()) return 0;
        std::size_t w = 0;
        for (std::size_t k : emb_dim) w += k;
        return w;
    }

    std::size_t encoder_input_width() const {
        std::size_t w = cond_width();
        for (std::size_t hpos = 0; hpos < cats.size(); ++hpos)
            w += uses_embeddings() ? emb_dim[hpos]
                                   : static_cast<std::size_t>(schema.features[cats[hpos]].cardinality());
        for (std::size_t l : bins) w += static_cast<std::size_t>(schema.features[l].cardinality());
        w += nums.size();
        return w;
    }

    std::size_t trainable_parameter_count() const { return store.scalar_count(); }
};

template <typename T>
CardiCatModel<T> init_model(const Schema& schema, const TrainConfig& config, Rng& rng) {
    validate(schema);
    validate(config);
    if (schema.features.empty()) throw DataError("init_model: schema has no features");

    CardiCatModel<T> model;
    model.schema = schema;
    model.config = config;
    model.kind_pos.resize(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
        switch (schema.features[j].kind) {
            case FeatureKind::categorical:
                model.kind_pos[j] = model.cats.size();
                model.cats.push_back(j);
                break;
            case FeatureKind::binary:
                model.kind_pos[j] = model.bins.size();
                model.bins.push_back(j);
                break;
            case FeatureKind::numerical:
                model.kind_pos[j] = model.nums.size();
                model.nums.push_back(j);
                break;
        }
    }
    if (model.conditional() && model.cats.empty())
        throw UsageError("init_model: conditional mode needs at least one categorical feature");

    // Embedding tables first, in schema order, so the RNG stream is pinned.
    for (std::size_t h : model.cats) {
        const auto& f = model.schema.features[h];
        const auto c = static_cast<std::size_t>(f.cardinality());
        if (model.uses_embeddings()) {
            const std::size_t k = embedding_dim(c, config.max_embedding_dim);
            auto& p = model.store.add("emb." + f.name, embedding_uniform<T>(rng, c, k));
            model.emb.push_back(&p);
            model.emb_dim.push_back(k);
            model.initial_variance.push_back(column_variance_mean(p.value));
        } else {
            model.emb_dim.push_back(c);  // one-hot width
        }
    }

    const std::size_t hd = config.hidden_dim;
    const std::size_t a = config.latent_dim;
    model.enc_in = DenseLayer<T>::create(model.store, "enc_in", model.encoder_input_width(), hd, rng);
    model.enc_hidden = DenseLayer<T>::create(model.store, "enc_hidden", hd, hd, rng);
    model.enc_mu = DenseLayer<T>::create(model.store, "enc_mu", hd, a, rng);
    model.enc_logvar = DenseLayer<T>::create(model.store, "enc_logvar", hd, a, rng);
    model.dec_in = DenseLayer<T>::create(model.store, "dec_in", a + model.cond_width(), hd, rng);
    model.dec_hidden = DenseLayer<T>::create(model.store, "dec_hidden", hd, hd, rng);

    for (std::size_t j = 0; j < model.schema.size(); ++j) {
        const auto& f = model.schema.features[j];
        const std::string name = "head." + f.name;
        switch (f.kind) {
            case FeatureKind::categorical:
                model.cat_heads.push_back(
                    DenseLayer<T>::create(model.store, name, hd, model.emb_dim[model.kind_pos[j]], rng));
                break;
            case FeatureKind::binary:
                model.bin_heads.push_back(DenseLayer<T>::create(
                    model.store, name, hd, static_cast<std::size_t>(f.cardinality()), rng));
                break;
            case FeatureKind::numerical:
                model.num_heads.push_back(DenseLayer<T>::create(model.store, name, hd, 1, rng));
                break;
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// Batches

template <typename T>
struct Batch {
    std::size_t n = 0;
    std::vector<std::vector<std::int32_t>> cat_codes;  // parallel to model.cats
    std::vector<Matrix<T>> cat_onehot;                 // baseline mode only
    std::vector<std::vector<std::int32_t>> bin_codes;  // parallel to model.bins
    std::vector<Matrix<T>> bin_onehot;
    std::vector<Matrix<T>> num_vals;  // n x 1, standardized
};

namespace model_detail {

template <typename T>
Matrix<T> one_hot_matrix(const std::vector<std::int32_t>& codes, std::size_t cardinality,
                         const std::string& feature) {
    Matrix<T> m(codes.size(), cardinality);
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const std::int32_t c = codes[i];
        if (c < 0 || static_cast<std::size_t>(c) >= cardinality)
            throw DataError("batch: label code " + std::to_string(c) + " out of range in feature '" +
                            feature + "'");
        m(i, static_cast<std::size_t>(c)) = T{1};
    }
    return m;
}

template <typename T>
Matrix<T> gather_rows_eval(const Matrix<T>& table, const std::vector<std::int32_t>& codes,
                           const std::string& feature) {
    Matrix<T> out(codes.size(), table.cols);
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const std::int32_t c = codes[i];
        if (c < 0 || static_cast<std::size_t>(c) >= table.rows)
            throw DataError("batch: label code " + std::to_string(c) + " out of range in feature '" +
                            feature + "'");
        for (std::size_t j = 0; j < table.cols; ++j) out(i, j) = table(static_cast<std::size_t>(c), j);
    }
    return out;
}

}  // namespace model_detail

// Slices the encoded dataset rows given by idx into per-feature columns.
template <typename T>
Batch<T> make_batch(const CardiCatModel<T>& model, const EncodedDataset& data,
                    const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw DataError("make_batch: empty batch");
    Batch<T> batch;
    batch.n = idx.size();
    for (std::size_t hpos = 0; hpos < model.cats.size(); ++hpos) {
        const std::size_t j = model.cats[hpos];
        const auto& col = data.codes.at(j);
        std::vector<std::int32_t> codes;
        codes.reserve(idx.size());
        for (std::size_t i : idx) codes.push_back(col.at(i));
        if (!model.uses_embeddings())
            batch.cat_onehot.push_back(model_detail::one_hot_matrix<T>(
                codes, static_cast<std::size_t>(model.schema.features[j].cardinality()),
                model.schema.features[j].name));
        batch.cat_codes.push_back(std::move(codes));
    }
    for (std::size_t lpos = 0; lpos < model.bins.size(); ++lpos) {
        const std::size_t j = model.bins[lpos];
        const auto& col = data.codes.at(j);
        std::vector<std::int32_t> codes;
        codes.reserve(idx.size());
        for (std::size_t i : idx) codes.push_back(col.at(i));
        batch.bin_onehot.push_back(model_detail::one_hot_matrix<T>(
            codes, static_cast<std::size_t>(model.schema.features[j].cardinality()),
            model.schema.features[j].name));
        batch.bin_codes.push_back(std::move(codes));
    }
    for (std::size_t j : model.nums) {
        const auto& col = data.reals.at(j);
        Matrix<T> m(idx.size(), 1);
        for (std::size_t r = 0; r < idx.size(); ++r) m(r, 0) = static_cast<T>(col.at(idx[r]));
        batch.num_vals.push_back(std::move(m));
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Conditional vectors

// Concatenation over H of the current embedding row of the conditioned level,
// or of the mask level where unconditioned. The caller treats the result as a
// constant input: no gradient flows through this copy.
template <typename T>
std::vector<T> conditional_vector(const CardiCatModel<T>& model,
                                  const std::map<std::string, std::string>& condition) {
    if (!model.conditional())
        throw UsageError("conditional_vector: model was not trained in conditional mode");
    std::vector<std::size_t> codes(model.cats.size());
    for (std::size_t hpos = 0; hpos < model.cats.size(); ++hpos) codes[hpos] = model.mask_code(hpos);
    for (const auto& [name, level] : condition) {
        const int j = model.schema.index_of(name);
        if (j < 0) throw DataError("condition: unknown feature '" + name + "'");
        if (model.schema.features[static_cast<std::size_t>(j)].kind != FeatureKind::categorical)
            throw DataError("condition: feature '" + name + "' is not categorical");
        const int code = model.schema.features[static_cast<std::size_t>(j)].code_of(level);
        if (code < 0) throw DataError("condition: unknown level '" + level + "' for feature '" + name + "'");
        codes[model.kind_pos[static_cast<std::size_t>(j)]] = static_cast<std::size_t>(code);
    }
    std::vector<T> out;
    out.reserve(model.cond_width());
    for (std::size_t hpos = 0; hpos < model.cats.size(); ++hpos) {
        const Matrix<T>& table = model.emb[hpos]->value;
        for (std::size_t k = 0; k < table.cols; ++k) out.push_back(table(codes[hpos], k));
    }
    return out;
}

template <typename T>
Matrix<T> broadcast_rows(const std::vector<T>& row, std::size_t n) {
    Matrix<T> m(n, row.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < row.size(); ++j) m(i, j) = row[j];
    return m;
}

// Training-time self-conditioning: each row conditions on one uniformly
// chosen categorical feature at its true level, mask everywhere else.
template <typename T>
Matrix<T> self_condition_matrix(const CardiCatModel<T>& model, const Batch<T>& batch, Rng& rng) {
    Matrix<T> cond(batch.n, model.cond_width());
    for (std::size_t i = 0; i < batch.n; ++i) {
        const std::size_t pick = static_cast<std::size_t>(rng.uniform_int(model.cats.size()));
        std::size_t off = 0;
        for (std::size_t hpos = 0; hpos < model.cats.size(); ++hpos) {
            const Matrix<T>& table = model.emb[hpos]->value;
            const std::size_t code = hpos == pick
                                         ? static_cast<std::size_t>(batch.cat_codes[hpos][i])
                                         : model.mask_code(hpos);
            for (std::size_t k = 0; k < table.cols; ++k) cond(i, off + k) = table(code, k);
            off += table.cols;
        }
    }
    return cond;
}

// ---------------------------------------------------------------------------
// Loss graph

template <typename T>
struct LossGraph {
    typename Tape<T>::Var total, recon, kl, reg;
};

template <typename T>
struct LossBreakdown {
    T total{0}, recon{0}, kl{0}, reg{0};
};

// Records the full forward pass on the tape. eps is the reparameterization
// noise (batch x a); cond must be given exactly in conditional mode and is
// treated as a constant (the non-trainable conditional input copy).
template <typename T>
LossGraph<T> build_loss(CardiCatModel<T>& model, Tape<T>& tape, const Batch<T>& batch,
                        const Matrix<T>& eps, const Matrix<T>* cond = nullptr) {
    using Var = typename Tape<T>::Var;
    const std::size_t n = batch.n;
    const std::size_t a = model.config.latent_dim;
    require_shape(eps.rows == n && eps.cols == a, "build_loss: eps");
    if (model.conditional() != (cond != nullptr))
        throw std::invalid_argument("build_loss: conditional matrix mismatch with mode");
    if (cond) require_shape(cond->rows == n && cond->cols == model.cond_width(), "build_loss: cond");

    Var cond_var;
    if (cond) cond_var = tape.constant(*cond);

    // Encoder input: one block per feature in schema order, conditional
    // vector appended last.
    std::vector<Var> blocks;
    std::vector<Var> emb_vars(model.cats.size());
    for (std::size_t j = 0; j < model.schema.size(); ++j) {
        const std::size_t pos = model.kind_pos[j];
        switch (model.schema.features[j].kind) {
            case FeatureKind::categorical:
                if (model.uses_embeddings()) {
                    emb_vars[pos] = tape.param(*model.emb[pos]);
                    blocks.push_back(tape.gather_rows(emb_vars[pos], batch.cat_codes[pos]));
                } else {
                    blocks.push_back(tape.constant(batch.cat_onehot[pos]));
                }
                break;
            case FeatureKind::binary:
                blocks.push_back(tape.constant(batch.bin_onehot[pos]));
                break;
            case FeatureKind::numerical:
                blocks.push_back(tape.constant(batch.num_vals[pos]));
                break;
        }
    }
    if (cond) blocks.push_back(cond_var);

    Var x = tape.concat_cols(blocks);
    Var h1 = tape.relu(model.enc_in.apply(tape, x));
    Var h2 = tape.relu(model.enc_hidden.apply(tape, h1));
    Var mu = model.enc_mu.apply(tape, h2);
    Var logvar = model.enc_logvar.apply(tape, h2);

    Var sigma = tape.exp(tape.scale(logvar, T{0.5}));
    Var z = tape.add(mu, tape.mul(sigma, tape.constant(eps)));

    Var zin = cond ? tape.concat_cols({z, cond_var}) : z;
    Var d1 = tape.relu(model.dec_in.apply(tape, zin));
    Var d2 = tape.relu(model.dec_hidden.apply(tape, d1));

    // Reconstruction: squared terms are summed then divided by n; the fused
    // cross-entropy op used by the binary heads already returns a per-row
    // mean.
    Var sq_sum, ce_sum;
    auto accumulate = [&tape](Var& acc, Var term) { acc = acc.valid() ? tape.add(acc, term) : term; };
    for (std::size_t j = 0; j < model.schema.size(); ++j) {
        const std::size_t pos = model.kind_pos[j];
        switch (model.schema.features[j].kind) {
            case FeatureKind::categorical:
                if (model.uses_embeddings()) {
                    Var e_hat = tape.tanh(model.cat_heads[pos].apply(tape, d2));
                    Var target = tape.gather_rows(emb_vars[pos], batch.cat_codes[pos]);
                    Var diff = tape.sub(target, e_hat);
                    accumulate(sq_sum, tape.sum_all(tape.mul(diff, diff)));
                } else {
                    // Vanilla one-hot path: the one-hot block is treated as a
                    // Gaussian observation, i.e. squared error between the
                    // softmax output and the one-hot target, not a
                    // cross-entropy categorical likelihood.
                    Var p = tape.softmax_rows(model.cat_heads[pos].apply(tape, d2));
                    Var diff = tape.sub(p, tape.constant(batch.cat_onehot[pos]));
                    accumulate(sq_sum, tape.sum_all(tape.mul(diff, diff)));
                }
                break;
            case FeatureKind::binary:
                accumulate(ce_sum, tape.softmax_cross_entropy(model.bin_heads[pos].apply(tape, d2),
                                                              batch.bin_codes[pos]));
                break;
            case FeatureKind::numerical: {
                Var r_hat = model.num_heads[pos].apply(tape, d2);
                if (model.config.numeric_head == NumericHead::tanh) r_hat = tape.tanh(r_hat);
                Var diff = tape.sub(tape.constant(batch.num_vals[pos]), r_hat);
                accumulate(sq_sum, tape.sum_all(tape.mul(diff, diff)));
                break;
            }
        }
    }
    Var recon;
    if (sq_sum.valid()) recon = tape.scale(sq_sum, T{1} / static_cast<T>(n));
    if (ce_sum.valid()) recon = recon.valid() ? tape.add(recon, ce_sum) : ce_sum;

    // kl = (0.5/n) * (sum mu^2 + sum exp(logvar) - sum logvar - n*a); exactly
    // zero at mu = 0, logvar = 0.
    Var s = tape.sub(tape.add(tape.sum_all(tape.mul(mu, mu)), tape.sum_all(tape.exp(logvar))),
                     tape.sum_all(logvar));
    Var kl = tape.scale(tape.add_scalar(s, -static_cast<T>(n) * static_cast<T>(a)),
                        T{0.5} / static_cast<T>(n));

    // reg = (1/|H|) * sum_j (V_j - V_j0)^2 over the live embedding tables.
    Var reg;
    if (model.uses_embeddings() && !model.cats.empty()) {
        Var acc;
        for (std::size_t hpos = 0; hpos < model.cats.size(); ++hpos) {
            Var v = tape.column_variance_mean(emb_vars[hpos]);
            Var d = tape.add_scalar(v, -model.initial_variance[hpos]);
            accumulate(acc, tape.mul(d, d));
        }
        reg = tape.scale(acc, T{1} / static_cast<T>(model.cats.size()));
    } else {
        reg = tape.constant(Matrix<T>(1, 1));
    }

    Var total = tape.add(tape.add(tape.scale(recon, static_cast<T>(model.config.loss_factor)),
                                  tape.scale(kl, static_cast<T>(model.config.lambda1))),
                         tape.scale(reg, static_cast<T>(model.config.lambda2)));
    if (!all_finite(tape.value(total)))
        throw NumericalError("loss: non-finite total (recon=" +
                             std::to_string(static_cast<double>(tape.value(recon)(0, 0))) +
                             ", kl=" + std::to_string(static_cast<double>(tape.value(kl)(0, 0))) + ")");
    return LossGraph<T>{total, recon, kl, reg};
}

// Forward-only loss components (throwaway tape, no backward sweep).
template <typename T>
LossBreakdown<T> loss_components(CardiCatModel<T>& model, const Batch<T>& batch, const Matrix<T>& eps,
                                 const Matrix<T>* cond = nullptr) {
    Tape<T> tape;
    auto g = build_loss(model, tape, batch, eps, cond);
    return LossBreakdown<T>{tape.value(g.total)(0, 0), tape.value(g.recon)(0, 0),
                            tape.value(g.kl)(0, 0), tape.value(g.reg)(0, 0)};
}

// ---------------------------------------------------------------------------
// Eval-path encode/decode (no tape)

template <typename T>
struct EncodeResult {
    Matrix<T> mu, sigma;
};

template <typename T>
EncodeResult<T> encode_batch(const CardiCatModel<T>& model, const Batch<T>& batch,
                             const Matrix<T>* cond = nullptr) {
    if (model.conditional() != (cond != nullptr))
        throw std::invalid_argument("encode_batch: conditional matrix mismatch with mode");
    Matrix<T> x(batch.n, 0);
    for (std::size_t j = 0; j < model.schema.size(); ++j) {
        const std::size_t pos = model.kind_pos[j];
        switch (model.schema.features[j].kind) {
            case FeatureKind::categorical:
                x = hconcat(x, model.uses_embeddings()
                                   ? model_detail::gather_rows_eval(model.emb[pos]->value,
                                                                    batch.cat_codes[pos],
                                                                    model.schema.features[j].name)
                                   : batch.cat_onehot[pos]);
                break;
            case FeatureKind::binary: x = hconcat(x, batch.bin_onehot[pos]); break;
            case FeatureKind::numerical: x = hconcat(x, batch.num_vals[pos]); break;
        }
    }
    if (cond) x = hconcat(x, *cond);
    Matrix<T> h1 = model.enc_in.eval(x);
    relu_inplace(h1);
    Matrix<T> h2 = model.enc_hidden.eval(h1);
    relu_inplace(h2);
    EncodeResult<T> out{model.enc_mu.eval(h2), model.enc_logvar.eval(h2)};
    for (T& v : out.sigma.data) v = std::exp(T{0.5} * v);
    return out;
}

template <typename T>
struct DecodeResult {
    std::vector<Matrix<T>> cat;  // per H: n x k_h tanh outputs, or n x c_h probs in baseline mode
    std::vector<Matrix<T>> bin;  // per L: n x c_l probs
    std::vector<Matrix<T>> num;  // per M: n x 1
};

template <typename T>
DecodeResult<T> decode_batch(const CardiCatModel<T>& model, const Matrix<T>& z,
                             const Matrix<T>* cond = nullptr) {
    if (model.conditional() != (cond != nullptr))
        throw std::invalid_argument("decode_batch: conditional matrix mismatch with mode");
    require_shape(z.cols == model.config.latent_dim, "decode_batch: z");
    if (!all_finite(z)) throw NumericalError("decode_batch: non-finite z");
    Matrix<T> zin = cond ? hconcat(z, *cond) : z;
    Matrix<T> d1 = model.dec_in.eval(zin);
    relu_inplace(d1);
    Matrix<T> d2 = model.dec_hidden.eval(d1);
    relu_inplace(d2);
    DecodeResult<T> out;
    for (std::size_t hpos = 0; hpos < model.cats.size(); ++hpos) {
        Matrix<T> y = model.cat_heads[hpos].eval(d2);
        if (model.uses_embeddings())
            tanh_inplace(y);
        else
            y = softmax_rows(y);
        out.cat.push_back(std::move(y));
    }
    for (std::size_t lpos = 0; lpos < model.bins.size(); ++lpos)
        out.bin.push_back(softmax_rows(model.bin_heads[lpos].eval(d2)));
    for (std::size_t mpos = 0; mpos < model.nums.size(); ++mpos) {
        Matrix<T> y = model.num_heads[mpos].eval(d2);
        if (model.config.numeric_head == NumericHead::tanh) tanh_inplace(y);
        out.num.push_back(std::move(y));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochStats {
    double recon = 0, kl = 0, reg = 0, total = 0;
};

struct TrainLog {
    std::vector<EpochStats> epochs;
};

// Shuffled minibatches per epoch; every parameter, embedding tables included,
// is updated by Adam. The log holds per-epoch means of the loss components
// over the epoch's steps.
template <typename T>
TrainLog train(CardiCatModel<T>& model, const EncodedDataset& data, Rng& rng,
               const std::function<void(std::size_t, const EpochStats&)>& on_epoch = {}) {
    if (data.n_rows == 0) throw DataError("train: no rows");
    Rng shuffle_rng = rng.child(1);
    Rng eps_rng = rng.child(2);
    Rng cond_rng = rng.child(3);
    const AdamConfig adam = model.config.adam();
    const std::size_t bs = model.config.batch_size;

    std::vector<std::size_t> order(data.n_rows);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainLog log;
    for (std::size_t epoch = 1; epoch <= model.config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        EpochStats stats;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t stop = std::min(order.size(), start + bs);
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            Batch<T> batch = make_batch(model, data, idx);
            Matrix<T> eps = gauss_sample<T>(eps_rng, batch.n, model.config.latent_dim);
            Matrix<T> cond;
            if (model.conditional()) cond = self_condition_matrix(model, batch, cond_rng);

            model.store.zero_grads();
            Tape<T> tape;
            auto graph = build_loss(model, tape, batch, eps, model.conditional() ? &cond : nullptr);
            stats.recon += static_cast<double>(tape.value(graph.recon)(0, 0));
            stats.kl += static_cast<double>(tape.value(graph.kl)(0, 0));
            stats.reg += static_cast<double>(tape.value(graph.reg)(0, 0));
            stats.total += static_cast<double>(tape.value(graph.total)(0, 0));
            tape.backward(graph.total);
            model.store.adam_step(adam);
            ++steps;
        }
        stats.recon /= static_cast<double>(steps);
        stats.kl /= static_cast<double>(steps);
        stats.reg /= static_cast<double>(steps);
        stats.total /= static_cast<double>(steps);
        log.epochs.push_back(stats);
        if (on_epoch) on_epoch(epoch, stats);
    }
    return log;
}

// Current total coordinate-wise variance per embedding table, for comparing
// against the frozen initial values.
template <typename T>
std::vector<T> embedding_variances(const CardiCatModel<T>& model) {
    std::vector<T> out;
    out.reserve(model.emb.size());
    for (const auto* p : model.emb) out.push_back(column_variance_mean(p->value));
    return out;
}

}  // namespace cardicat
