// Command-line front end: simulate | fit | sample | evaluate.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cardicat/checkpoint.hpp"
#include "cardicat/csv.hpp"
#include "cardicat/errors.hpp"
#include "cardicat/fidelity.hpp"
#include "cardicat/model.hpp"
#include "cardicat/schema.hpp"
#include "cardicat/simgen.hpp"
#include "cardicat/synthesis.hpp"

namespace {

using cardicat::DataError;
using cardicat::NumericalError;
using cardicat::UsageError;

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad JSON in " + path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot open file for writing: " + path);
    out << text;
    if (!out) throw UsageError("failed writing file: " + path);
}

void require_header(const cardicat::Schema& schema, const std::vector<std::string>& header,
                    const std::string& what) {
    if (header.size() != schema.size())
        throw DataError(what + ": expected " + std::to_string(schema.size()) + " columns, got " +
                        std::to_string(header.size()));
    for (std::size_t j = 0; j < schema.size(); ++j)
        if (header[j] != schema.features[j].name)
            throw DataError(what + ": column " + std::to_string(j) + " is '" + header[j] +
                            "', schema expects '" + schema.features[j].name + "'");
}

// Replays ingestion's drop rule for a known schema: rows missing a value in
// a numerical column are removed.
std::vector<std::vector<std::string>> drop_missing_numeric(const cardicat::Schema& schema,
                                                           const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::vector<std::string>> kept;
    kept.reserve(rows.size());
    for (const auto& row : rows) {
        if (row.size() != schema.size()) throw DataError("row width does not match schema");
        bool keep = true;
        for (std::size_t j = 0; j < schema.size() && keep; ++j)
            if (!schema.features[j].discrete() && row[j].empty()) keep = false;
        if (keep) kept.push_back(row);
    }
    return kept;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string out;
    std::string config_path;
    std::uint64_t rows = 0;
    std::uint64_t seed = 0;
    CLI::Option* rows_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
};

int cmd_simulate(const SimulateArgs& args) {
    cardicat::SimSpec spec;
    if (!args.config_path.empty()) cardicat::apply_json(spec, load_json_file(args.config_path));
    if (args.rows_opt->count() > 0) spec.n_rows = args.rows;
    if (args.seed_opt->count() > 0) spec.seed = args.seed;
    if (spec.n_rows < 1) throw UsageError("simulate: rows must be >= 1");
    cardicat::CsvTable table = cardicat::simulate(spec);
    cardicat::write_csv(args.out, table);
    std::cout << "wrote " << table.rows.size() << " rows to " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
    std::string data;
    std::string out;
    std::string log_path;
    std::string config_path;
    std::string schema_path;
    std::string mode;
    std::string numeric_head;
    std::uint64_t epochs = 0, batch_size = 0, latent_dim = 0, hidden_dim = 0, max_embedding_dim = 0;
    std::uint64_t seed = 0;
    double learning_rate = 0, loss_factor = 0, lambda1 = 0, lambda2 = 0, train_fraction = 0;
    std::map<std::string, CLI::Option*> set;
};

cardicat::TrainConfig resolve_train_config(const FitArgs& args) {
    cardicat::TrainConfig cfg;
    if (!args.config_path.empty()) cardicat::apply_json(cfg, load_json_file(args.config_path));
    auto given = [&](const char* name) { return args.set.at(name)->count() > 0; };
    if (given("mode")) cfg.mode = cardicat::model_mode_from_string(args.mode);
    if (given("numeric-head")) cfg.numeric_head = cardicat::numeric_head_from_string(args.numeric_head);
    if (given("epochs")) cfg.epochs = args.epochs;
    if (given("batch-size")) cfg.batch_size = args.batch_size;
    if (given("latent-dim")) cfg.latent_dim = args.latent_dim;
    if (given("hidden-dim")) cfg.hidden_dim = args.hidden_dim;
    if (given("max-embedding-dim")) cfg.max_embedding_dim = args.max_embedding_dim;
    if (given("seed")) cfg.seed = args.seed;
    if (given("lr")) cfg.learning_rate = args.learning_rate;
    if (given("loss-factor")) cfg.loss_factor = args.loss_factor;
    if (given("lambda1")) cfg.lambda1 = args.lambda1;
    if (given("lambda2")) cfg.lambda2 = args.lambda2;
    if (given("train-fraction")) cfg.train_fraction = args.train_fraction;
    cardicat::validate(cfg);
    return cfg;
}

int cmd_fit(const FitArgs& args) {
    const cardicat::TrainConfig cfg = resolve_train_config(args);
    const cardicat::CsvTable table = cardicat::read_csv(args.data);

    // Schema either loaded or inferred; inference also standardizes on the
    // training split below.
    cardicat::Schema data_schema;
    std::vector<std::vector<std::string>> rows;
    bool inferred = false;
    if (!args.schema_path.empty()) {
        data_schema = cardicat::schema_from_json(load_json_file(args.schema_path));
        require_header(data_schema, table.header, "fit: " + args.data);
        rows = drop_missing_numeric(data_schema, table.rows);
        if (rows.empty()) throw DataError("fit: all rows dropped (missing numerical values)");
    } else {
        cardicat::IngestResult ingested = cardicat::ingest(table);
        data_schema = std::move(ingested.schema);
        rows = std::move(ingested.rows);
        inferred = true;
        if (ingested.dropped_rows > 0)
            std::cout << "dropped " << ingested.dropped_rows << " rows with missing numerical values\n";
    }

    const cardicat::SplitIndices split =
        cardicat::split_indices(rows.size(), cfg.train_fraction, cfg.seed);
    const auto train_rows = cardicat::take_rows(rows, split.train);
    // Level catalogs come from the full file; the standardization statistics
    // are refit on the training split so the test rows stay held out.
    if (inferred) cardicat::refit_standardization(data_schema, train_rows);

    const cardicat::Schema model_schema = cfg.mode == cardicat::ModelMode::conditional
                                              ? cardicat::conditional_prepare(data_schema)
                                              : data_schema;
    const cardicat::EncodedDataset encoded = cardicat::encode(model_schema, train_rows);

    cardicat::Rng root(cfg.seed);
    cardicat::Rng init_rng = root.child(1);
    cardicat::Rng train_rng = root.child(2);
    auto model = cardicat::init_model<float>(model_schema, cfg, init_rng);
    std::cout << "mode: " << to_string(cfg.mode) << "\n";
    std::cout << "trainable parameters: " << model.trainable_parameter_count() << "\n";
    std::cout << "training rows: " << train_rows.size() << ", test rows: " << split.test.size()
              << "\n";

    std::string log_csv = "epoch,recon,kl,reg,total\n";
    cardicat::train(model, encoded, train_rng,
                    [&](std::size_t epoch, const cardicat::EpochStats& s) {
                        log_csv += std::to_string(epoch) + ',' + cardicat::format_double(s.recon) +
                                   ',' + cardicat::format_double(s.kl) + ',' +
                                   cardicat::format_double(s.reg) + ',' +
                                   cardicat::format_double(s.total) + '\n';
                        std::cout << "epoch " << epoch << "/" << cfg.epochs
                                  << " recon=" << s.recon << " kl=" << s.kl << " reg=" << s.reg
                                  << " total=" << s.total << "\n";
                    });

    const std::string log_path = args.log_path.empty() ? args.out + ".log.csv" : args.log_path;
    write_text_file(log_path, log_csv);
    cardicat::save_checkpoint(args.out, model, split.test);
    std::cout << "wrote checkpoint " << args.out << " and log " << log_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
    std::string checkpoint;
    std::string out;
    std::string condition_json;
    std::string decode_rule = "nearest";
    std::uint64_t rows = 1000;
    std::uint64_t seed = 1;
};

int cmd_sample(const SampleArgs& args) {
    auto loaded = cardicat::load_checkpoint<float>(args.checkpoint);
    cardicat::SynthesisRequest request;
    request.n_rows = args.rows;
    request.seed = args.seed;
    request.decode_rule = cardicat::decode_rule_from_string(args.decode_rule);
    if (!args.condition_json.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(args.condition_json);
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("sample: bad --condition JSON: " + std::string(e.what()));
        }
        if (!j.is_object()) throw UsageError("sample: --condition must be a JSON object");
        for (const auto& [key, val] : j.items()) request.condition[key] = val.get<std::string>();
    }

    cardicat::CsvTable table;
    for (const auto& f : loaded.model.schema.features) table.header.push_back(f.name);
    table.rows = cardicat::sample_rows(loaded.model, request);
    cardicat::write_csv(args.out, table);
    std::cout << "wrote " << table.rows.size() << " rows to " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    std::string synthetic;
    std::string checkpoint;
    std::string data;
    std::string real;
    std::string schema_path;
    std::string report_path;
    std::string summary_path;
};

int cmd_evaluate(const EvaluateArgs& args) {
    const cardicat::CsvTable synth_table = cardicat::read_csv(args.synthetic);

    cardicat::Schema schema;
    std::vector<std::vector<std::string>> real_rows;
    if (!args.real.empty()) {
        const cardicat::CsvTable real_table = cardicat::read_csv(args.real);
        if (!args.schema_path.empty()) {
            schema = cardicat::schema_from_json(load_json_file(args.schema_path));
        } else if (!args.checkpoint.empty()) {
            auto loaded = cardicat::load_checkpoint<float>(args.checkpoint);
            schema = loaded.model.conditional()
                         ? cardicat::schema_without_mask_levels(loaded.model.schema)
                         : loaded.model.schema;
        } else {
            schema = cardicat::infer_schema(real_table);
        }
        require_header(schema, real_table.header, "evaluate: " + args.real);
        real_rows = drop_missing_numeric(schema, real_table.rows);
    } else if (!args.checkpoint.empty() && !args.data.empty()) {
        auto loaded = cardicat::load_checkpoint<float>(args.checkpoint);
        schema = loaded.model.conditional()
                     ? cardicat::schema_without_mask_levels(loaded.model.schema)
                     : loaded.model.schema;
        const cardicat::CsvTable data_table = cardicat::read_csv(args.data);
        require_header(schema, data_table.header, "evaluate: " + args.data);
        const auto rows = drop_missing_numeric(schema, data_table.rows);
        for (std::size_t i : loaded.test_indices) {
            if (i >= rows.size())
                throw DataError("evaluate: recorded test index " + std::to_string(i) +
                                " out of range; data file does not match the checkpoint");
            real_rows.push_back(rows[i]);
        }
    } else {
        throw UsageError("evaluate: need --real, or --checkpoint together with --data");
    }
    if (real_rows.empty()) throw DataError("evaluate: no real rows to compare against");

    require_header(schema, synth_table.header, "evaluate: " + args.synthetic);
    const cardicat::FidelityReport report =
        cardicat::evaluate(schema, real_rows, synth_table.rows);

    const std::string summary = cardicat::summary_csv(report);
    write_text_file(args.report_path, cardicat::to_json(report).dump(2) + "\n");
    if (!args.summary_path.empty()) write_text_file(args.summary_path, summary);
    std::cout << summary;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tabular synthetic data: embedding VAE for mixed-type, high-cardinality tables"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "generate the simulated benchmark CSV");
    simulate->add_option("--out", sim.out, "output CSV path")->required();
    simulate->add_option("--config", sim.config_path, "JSON file with sim spec fields");
    sim.rows_opt = simulate->add_option("--rows", sim.rows, "row count (default 100000)");
    sim.seed_opt = simulate->add_option("--seed", sim.seed, "RNG seed");

    FitArgs fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "train a model on a CSV");
    fit_cmd->add_option("--data", fit.data, "input CSV")->required();
    fit_cmd->add_option("--out", fit.out, "checkpoint output path")->required();
    fit_cmd->add_option("--log", fit.log_path, "training-log CSV path (default: <out>.log.csv)");
    fit_cmd->add_option("--config", fit.config_path, "JSON file with training config fields");
    fit_cmd->add_option("--schema", fit.schema_path, "schema JSON (skips inference)");
    fit.set["mode"] = fit_cmd->add_option("--mode", fit.mode, "cardicat | baseline_onehot | conditional");
    fit.set["numeric-head"] = fit_cmd->add_option("--numeric-head", fit.numeric_head, "tanh | linear");
    fit.set["epochs"] = fit_cmd->add_option("--epochs", fit.epochs, "training epochs");
    fit.set["batch-size"] = fit_cmd->add_option("--batch-size", fit.batch_size, "minibatch size");
    fit.set["latent-dim"] = fit_cmd->add_option("--latent-dim", fit.latent_dim, "latent dimension");
    fit.set["hidden-dim"] = fit_cmd->add_option("--hidden-dim", fit.hidden_dim, "hidden layer width");
    fit.set["max-embedding-dim"] =
        fit_cmd->add_option("--max-embedding-dim", fit.max_embedding_dim, "cap on embedding dims");
    fit.set["seed"] = fit_cmd->add_option("--seed", fit.seed, "RNG seed");
    fit.set["lr"] = fit_cmd->add_option("--lr", fit.learning_rate, "Adam learning rate");
    fit.set["loss-factor"] = fit_cmd->add_option("--loss-factor", fit.loss_factor, "reconstruction multiplier");
    fit.set["lambda1"] = fit_cmd->add_option("--lambda1", fit.lambda1, "KL weight");
    fit.set["lambda2"] = fit_cmd->add_option("--lambda2", fit.lambda2, "regularizer weight");
    fit.set["train-fraction"] =
        fit_cmd->add_option("--train-fraction", fit.train_fraction, "train split fraction");

    SampleArgs sample;
    CLI::App* sample_cmd = app.add_subcommand("sample", "generate synthetic rows from a checkpoint");
    sample_cmd->add_option("--checkpoint", sample.checkpoint, "trained checkpoint")->required();
    sample_cmd->add_option("--out", sample.out, "output CSV path")->required();
    sample_cmd->add_option("--rows", sample.rows, "rows to generate (default 1000)");
    sample_cmd->add_option("--seed", sample.seed, "RNG seed");
    sample_cmd->add_option("--condition", sample.condition_json,
                           "JSON object {feature: level} (conditional checkpoints)");
    sample_cmd->add_option("--decode-rule", sample.decode_rule, "nearest | softmax");

    EvaluateArgs eval;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "score synthetic data against held-out rows");
    eval_cmd->add_option("--synthetic", eval.synthetic, "synthetic CSV")->required();
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint (schema + recorded test split)");
    eval_cmd->add_option("--data", eval.data, "original data CSV (test rows via checkpoint indices)");
    eval_cmd->add_option("--real", eval.real, "explicit test CSV (overrides --data)");
    eval_cmd->add_option("--schema", eval.schema_path, "schema JSON for --real");
    eval_cmd->add_option("--report", eval.report_path, "report JSON output path")->required();
    eval_cmd->add_option("--summary", eval.summary_path, "summary CSV output path");

    try {
        app.parse(argc, argv);
        if (simulate->parsed()) return cmd_simulate(sim);
        if (fit_cmd->parsed()) return cmd_fit(fit);
        if (sample_cmd->parsed()) return cmd_sample(sample);
        if (eval_cmd->parsed()) return cmd_evaluate(eval);
        throw UsageError("no subcommand given");
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
