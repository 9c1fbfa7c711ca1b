#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "cardicat/errors.hpp"
#include "cardicat/schema.hpp"

using cardicat::DataError;
using cardicat::FeatureKind;
using cardicat::Schema;

namespace {

cardicat::CsvTable table_from(const std::string& text) { return cardicat::parse_csv(text); }

}  // namespace

TEST_CASE("ingest classifies kinds and orders levels by frequency then name") {
    // cat: b x3, a x2, c x1 -> b, a, c. two-level column -> binary.
    auto t = table_from(
        "cat,bin,num\n"
        "b,yes,1\n"
        "b,no,2\n"
        "b,no,3\n"
        "a,no,4\n"
        "a,no,5\n"
        "c,no,6\n");
    auto r = cardicat::ingest(t);
    REQUIRE(r.schema.features[0].kind == FeatureKind::categorical);
    REQUIRE(r.schema.features[0].levels == std::vector<std::string>{"b", "a", "c"});
    REQUIRE(r.schema.features[1].kind == FeatureKind::binary);
    REQUIRE(r.schema.features[1].levels == std::vector<std::string>{"no", "yes"});
    REQUIRE(r.schema.features[2].kind == FeatureKind::numerical);
    REQUIRE(r.dropped_rows == 0);
}

TEST_CASE("ingest ties in frequency break lexicographically") {
    auto t = table_from("c,n\nz,1\ny,2\nx,3\nz,4\ny,5\nx,6\n");
    auto r = cardicat::ingest(t);
    REQUIRE(r.schema.features[0].levels == std::vector<std::string>{"x", "y", "z"});
}

TEST_CASE("ingest computes sample standard deviation") {
    auto t = table_from("x,c\n8,a\n8,b\n10,a\n12,b\n12,c\n");
    auto r = cardicat::ingest(t);
    REQUIRE(r.schema.features[0].mean == Catch::Approx(10.0));
    REQUIRE(r.schema.features[0].sd == Catch::Approx(2.0));  // Bessel: ss=16, n-1=4
}

TEST_CASE("ingest drops rows missing numerical values and flags constants") {
    auto t = table_from("x,c\n1,a\n,b\n3,a\n");
    auto r = cardicat::ingest(t);
    REQUIRE(r.dropped_rows == 1);
    REQUIRE(r.rows.size() == 2);
    REQUIRE_THROWS_AS(cardicat::ingest(table_from("x,c\n5,a\n5,b\n")), DataError);
}

TEST_CASE("missing discrete cells become the NA level with true frequency") {
    // missing x3, a x2, b x1: NA level is the modal one and sorts first.
    auto t = table_from("c,n\n,1\n,2\n,3\na,4\na,5\nb,6\n");
    auto r = cardicat::ingest(t);
    REQUIRE(r.schema.features[0].levels ==
            std::vector<std::string>{cardicat::kMissingLevel, "a", "b"});
}

TEST_CASE("literal NA marker colliding with missing cells is rejected") {
    auto text = std::string("c,n\n") + cardicat::kMissingLevel + ",1\n,2\na,3\n";
    REQUIRE_THROWS_AS(cardicat::ingest(table_from(text)), DataError);
}

TEST_CASE("encode standardizes numericals and maps levels to codes") {
    auto t = table_from("x,c\n8,a\n8,b\n10,a\n12,b\n12,c\n");
    auto r = cardicat::ingest(t);
    auto e = cardicat::encode(r.schema, r.rows);
    REQUIRE(e.n_rows == 5);
    REQUIRE(e.reals[0][0] == Catch::Approx(-1.0));  // (8-10)/2
    REQUIRE(e.reals[0][2] == Catch::Approx(0.0));
    // levels: a(2), b(2), c(1) -> a,b,c
    REQUIRE(e.codes[1][0] == 0);
    REQUIRE(e.codes[1][1] == 1);
    REQUIRE(e.codes[1][4] == 2);
}

TEST_CASE("strict encode rejects unknown levels, lenient maps to NA when present") {
    auto t = table_from("c,n\n,1\na,2\na,3\nb,4\n");
    auto r = cardicat::ingest(t);
    std::vector<std::vector<std::string>> unknown{{"zzz", "1"}};
    REQUIRE_THROWS_AS(cardicat::encode(r.schema, unknown), DataError);
    auto e = cardicat::encode(r.schema, unknown, cardicat::EncodeOptions{false});
    const int na_code = r.schema.features[0].code_of(cardicat::kMissingLevel);
    REQUIRE(e.codes[0][0] == na_code);
}

TEST_CASE("decode inverts encode bit for bit on valid rows") {
    auto t = table_from("x,c\n8.25,a\n-8,b\n10.5,a\n12,b\n12.125,c\n");
    auto r = cardicat::ingest(t);
    auto e = cardicat::encode(r.schema, r.rows);
    auto back = cardicat::decode(r.schema, e);
    REQUIRE(back == r.rows);
}

TEST_CASE("decode rejects out-of-range codes") {
    auto t = table_from("c,n\na,1\na,2\nb,3\n");
    auto r = cardicat::ingest(t);
    auto e = cardicat::encode(r.schema, r.rows);
    e.codes[0][0] = 9;
    REQUIRE_THROWS_AS(cardicat::decode(r.schema, e), DataError);
}

TEST_CASE("schema JSON roundtrip preserves everything") {
    auto t = table_from("x,c\n8,a\n9,b\n10,a\n12,b\n12,c\n");
    Schema s = cardicat::infer_schema(t);
    Schema back = cardicat::schema_from_json(cardicat::to_json(s));
    REQUIRE(back.features.size() == s.features.size());
    for (std::size_t j = 0; j < s.features.size(); ++j) {
        REQUIRE(back.features[j].name == s.features[j].name);
        REQUIRE(back.features[j].kind == s.features[j].kind);
        REQUIRE(back.features[j].levels == s.features[j].levels);
        REQUIRE(back.features[j].mean == s.features[j].mean);
        REQUIRE(back.features[j].sd == s.features[j].sd);
    }
}

TEST_CASE("validate rejects malformed schemas") {
    Schema s;
    s.features.push_back({"a", FeatureKind::categorical, {"x", "y"}, 0, 1});
    REQUIRE_THROWS_AS(cardicat::validate(s), DataError);  // categorical needs >= 3 levels
    s.features[0].kind = FeatureKind::binary;
    REQUIRE_NOTHROW(cardicat::validate(s));
    s.features.push_back({"a", FeatureKind::numerical, {}, 0, 1});
    REQUIRE_THROWS_AS(cardicat::validate(s), DataError);  // duplicate name
    s.features[1].name = "b";
    s.features[1].sd = 0.0;
    REQUIRE_THROWS_AS(cardicat::validate(s), DataError);  // sd must be positive
}

TEST_CASE("one_hot basic contract") {
    auto v = cardicat::one_hot(1, 3);
    REQUIRE(v == std::vector<double>{0.0, 1.0, 0.0});
    REQUIRE_THROWS_AS(cardicat::one_hot(3, 3), DataError);
}

TEST_CASE("split is deterministic, disjoint and sized by floor") {
    auto s = cardicat::split_indices(10, 0.8, 99);
    REQUIRE(s.train.size() == 8);
    REQUIRE(s.test.size() == 2);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    REQUIRE(all.size() == 10);
    auto s2 = cardicat::split_indices(10, 0.8, 99);
    REQUIRE(s.train == s2.train);
    auto s3 = cardicat::split_indices(10, 0.8, 100);
    REQUIRE(s.train != s3.train);
    REQUIRE_THROWS_AS(cardicat::split_indices(1, 0.8, 1), DataError);
    REQUIRE_THROWS_AS(cardicat::split_indices(10, 1.5, 1), cardicat::UsageError);
}

TEST_CASE("refit_standardization recomputes stats on the given rows only") {
    auto t = table_from("x,c\n8,a\n8,b\n10,a\n12,b\n12,c\n");
    auto r = cardicat::ingest(t);
    std::vector<std::vector<std::string>> subset{{"1", "a"}, {"3", "b"}};
    cardicat::refit_standardization(r.schema, subset);
    REQUIRE(r.schema.features[0].mean == Catch::Approx(2.0));
    REQUIRE(r.schema.features[0].sd == Catch::Approx(std::sqrt(2.0)));
    REQUIRE(r.schema.features[1].levels.size() == 3);  // catalogs untouched
}
