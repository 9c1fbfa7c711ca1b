#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "cardicat/synthesis.hpp"
#include "cardicat/simgen.hpp"

using cardicat::DecodeRule;
using cardicat::Matrix;
using cardicat::Rng;
using cardicat::Schema;
using cardicat::SynthesisRequest;
using cardicat::TrainConfig;

namespace {

Schema tiny_schema() {
    Schema s;
    s.features.push_back({"cat", cardicat::FeatureKind::categorical, {"a", "b", "c", "d"}, 0, 1});
    s.features.push_back({"bin", cardicat::FeatureKind::binary, {"n", "y"}, 0, 1});
    s.features.push_back({"num", cardicat::FeatureKind::numerical, {}, 10.0, 2.0});
    return s;
}

TrainConfig tiny_config() {
    TrainConfig c;
    c.latent_dim = 3;
    c.hidden_dim = 8;
    return c;
}

}  // namespace

TEST_CASE("nearest_row agrees with a brute-force scan, ties to the lowest code") {
    Rng rng(101);
    for (int round = 0; round < 30; ++round) {
        const std::size_t rows = 3 + static_cast<std::size_t>(rng.uniform_int(6));
        const std::size_t cols = 1 + static_cast<std::size_t>(rng.uniform_int(4));
        Matrix<double> table(rows, cols);
        for (double& v : table.data) v = rng.uniform(-1.0, 1.0);
        if (round % 3 == 0)  // force a tie pair
            for (std::size_t j = 0; j < cols; ++j) table(2, j) = table(0, j);
        std::vector<double> query(cols);
        for (double& v : query) v = rng.uniform(-1.0, 1.0);
        if (round % 3 == 0) query.assign(&table.data[0], &table.data[0] + cols);

        std::vector<double> dist(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            double d = 0;
            for (std::size_t j = 0; j < cols; ++j) {
                const double diff = query[j] - table(r, j);
                d += diff * diff;
            }
            dist[r] = d;
        }
        const auto want = static_cast<std::size_t>(
            std::min_element(dist.begin(), dist.end()) - dist.begin());
        REQUIRE(cardicat::nearest_row(table, query.data(), rows) == want);
        if (round % 3 == 0) REQUIRE(want == 0);  // the tie must resolve downward

        // Restricting the candidate set must restrict the argmin the same way.
        const auto want_head = static_cast<std::size_t>(
            std::min_element(dist.begin(), dist.end() - 1) - dist.begin());
        REQUIRE(cardicat::nearest_row(table, query.data(), rows - 1) == want_head);
    }
    Matrix<double> t(2, 2);
    double q[2] = {0, 0};
    REQUIRE_THROWS_AS(cardicat::nearest_row(t, q, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(cardicat::nearest_row(t, q, 3), std::invalid_argument);
}

TEST_CASE("sampling is deterministic in the seed and sized exactly") {
    Rng init(7);
    auto m = cardicat::init_model<float>(tiny_schema(), tiny_config(), init);
    SynthesisRequest req;
    req.n_rows = 25;
    req.seed = 99;
    auto a = cardicat::sample_rows(m, req);
    auto b = cardicat::sample_rows(m, req);
    REQUIRE(a.size() == 25);
    REQUIRE(a == b);
    for (const auto& row : a) REQUIRE(row.size() == 3);

    req.seed = 100;
    auto c = cardicat::sample_rows(m, req);
    REQUIRE(a != c);  // different draw, astronomically unlikely to collide

    req.decode_rule = DecodeRule::softmax;
    auto d = cardicat::sample_rows(m, req);
    auto e = cardicat::sample_rows(m, req);
    REQUIRE(d == e);
}

TEST_CASE("sampled cells always come from the schema catalogs") {
    Rng init(8);
    auto m = cardicat::init_model<float>(tiny_schema(), tiny_config(), init);
    SynthesisRequest req;
    req.n_rows = 200;
    req.seed = 5;
    for (auto rule : {DecodeRule::nearest, DecodeRule::softmax}) {
        req.decode_rule = rule;
        for (const auto& row : cardicat::sample_rows(m, req)) {
            REQUIRE((std::set<std::string>{"a", "b", "c", "d"}.count(row[0]) == 1));
            REQUIRE((row[1] == "n" || row[1] == "y"));
            bool ok = false;
            cardicat::parse_double(row[2], ok);
            REQUIRE(ok);
        }
    }
}

TEST_CASE("conditional sampling never emits the mask level") {
    cardicat::SimSpec spec;
    spec.n_rows = 500;
    spec.seed = 31;
    auto ingested = cardicat::ingest(cardicat::simulate(spec));
    TrainConfig cfg = tiny_config();
    cfg.mode = cardicat::ModelMode::conditional;
    Rng init(9);
    auto m = cardicat::init_model<float>(cardicat::conditional_prepare(ingested.schema), cfg, init);

    SynthesisRequest req;
    req.n_rows = 150;
    req.seed = 6;
    req.condition = {{"C2", "v01"}};
    for (auto rule : {DecodeRule::nearest, DecodeRule::softmax}) {
        req.decode_rule = rule;
        auto rows = cardicat::sample_rows(m, req);
        REQUIRE(rows.size() == 150);
        for (const auto& row : rows)
            for (const auto& cell : row) REQUIRE(cell != cardicat::kMaskLevel);
    }
    req.condition = {{"C2", "not-a-level"}};
    REQUIRE_THROWS_AS(cardicat::sample_rows(m, req), cardicat::DataError);
}

TEST_CASE("baseline categorical heads decode to the softmax mode by default") {
    Rng init(17);
    TrainConfig cfg = tiny_config();
    cfg.mode = cardicat::ModelMode::baseline_onehot;
    auto m = cardicat::init_model<float>(tiny_schema(), cfg, init);
    m.cat_heads[0].W->value.fill(0.0f);
    m.cat_heads[0].b->value.fill(0.0f);
    m.cat_heads[0].b->value(0, 2) = 4.0f;  // p("c") ~ 0.95, still not 1
    SynthesisRequest req;
    req.n_rows = 400;
    req.seed = 18;
    for (const auto& row : cardicat::sample_rows(m, req)) REQUIRE(row[0] == "c");

    req.decode_rule = DecodeRule::softmax;
    std::size_t off_mode = 0;
    for (const auto& row : cardicat::sample_rows(m, req))
        if (row[0] != "c") ++off_mode;
    REQUIRE(off_mode > 0);  // the stochastic rule really draws from the tail
}

TEST_CASE("a forced binary head drives every draw to the certain level") {
    Rng init(10);
    auto m = cardicat::init_model<float>(tiny_schema(), tiny_config(), init);
    m.bin_heads[0].W->value.fill(0.0f);
    m.bin_heads[0].b->value(0, 0) = 50.0f;
    m.bin_heads[0].b->value(0, 1) = -50.0f;
    SynthesisRequest req;
    req.n_rows = 500;
    req.seed = 11;
    for (const auto& row : cardicat::sample_rows(m, req)) REQUIRE(row[1] == "n");
}

TEST_CASE("a forced embedding head lands on its table row for every sample") {
    Rng init(12);
    auto m = cardicat::init_model<float>(tiny_schema(), tiny_config(), init);
    // Spread the table out and aim the head straight at code 2.
    auto& table = m.emb[0]->value;
    REQUIRE(table.cols == 2);
    const float grid[4][2] = {{-0.9f, -0.9f}, {-0.9f, 0.9f}, {0.5f, -0.5f}, {0.9f, 0.9f}};
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 2; ++c) table(r, c) = grid[r][c];
    m.cat_heads[0].W->value.fill(0.0f);
    m.cat_heads[0].b->value(0, 0) = std::atanh(0.5f);
    m.cat_heads[0].b->value(0, 1) = std::atanh(-0.5f);
    SynthesisRequest req;
    req.n_rows = 300;
    req.seed = 13;
    for (const auto& row : cardicat::sample_rows(m, req)) REQUIRE(row[0] == "c");
}

TEST_CASE("tanh numeric heads stay within one sd of the mean after de-standardization") {
    Rng init(14);
    auto m = cardicat::init_model<float>(tiny_schema(), tiny_config(), init);
    SynthesisRequest req;
    req.n_rows = 400;
    req.seed = 15;
    for (const auto& row : cardicat::sample_rows(m, req)) {
        bool ok = false;
        const double v = cardicat::parse_double(row[2], ok);
        REQUIRE(ok);
        REQUIRE(v > 10.0 - 2.0);
        REQUIRE(v < 10.0 + 2.0);
    }
}

TEST_CASE("bad requests are rejected up front") {
    Rng init(16);
    auto m = cardicat::init_model<float>(tiny_schema(), tiny_config(), init);
    SynthesisRequest req;
    req.n_rows = 0;
    REQUIRE_THROWS_AS(cardicat::sample_rows(m, req), cardicat::UsageError);
    req.n_rows = 5;
    req.condition = {{"cat", "a"}};  // not a conditional checkpoint
    REQUIRE_THROWS_AS(cardicat::sample_rows(m, req), cardicat::UsageError);
    REQUIRE_THROWS_AS(cardicat::decode_rule_from_string("argmax"), cardicat::UsageError);
    REQUIRE(cardicat::decode_rule_from_string("softmax") == DecodeRule::softmax);
}
