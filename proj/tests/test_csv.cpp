#include <catch2/catch_amalgamated.hpp>

#include "cardicat/csv.hpp"
#include "cardicat/errors.hpp"

using cardicat::CsvTable;
using cardicat::DataError;

TEST_CASE("parse_csv handles plain rows and CRLF") {
    CsvTable t = cardicat::parse_csv("a,b\r\n1,2\n3,4\n");
    REQUIRE(t.header == std::vector<std::string>{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    REQUIRE(t.rows[1] == std::vector<std::string>{"3", "4"});
}

TEST_CASE("parse_csv handles quoting, escapes and embedded separators") {
    CsvTable t = cardicat::parse_csv("x,y\n\"a,b\",\"say \"\"hi\"\"\"\n\"line\nbreak\",z\n");
    REQUIRE(t.rows[0][0] == "a,b");
    REQUIRE(t.rows[0][1] == "say \"hi\"");
    REQUIRE(t.rows[1][0] == "line\nbreak");
    REQUIRE(t.rows[1][1] == "z");
}

TEST_CASE("parse_csv accepts missing trailing newline and empty cells") {
    CsvTable t = cardicat::parse_csv("x,y\n,2");
    REQUIRE(t.rows.size() == 1);
    REQUIRE(t.rows[0][0].empty());
    REQUIRE(t.rows[0][1] == "2");
}

TEST_CASE("parse_csv rejects ragged rows and bad quoting") {
    REQUIRE_THROWS_AS(cardicat::parse_csv("a,b\n1,2,3\n"), DataError);
    REQUIRE_THROWS_AS(cardicat::parse_csv("a,b\n\"unterminated,2\n"), DataError);
    REQUIRE_THROWS_AS(cardicat::parse_csv("a,b\nva\"l,2\n"), DataError);
    REQUIRE_THROWS_AS(cardicat::parse_csv(""), DataError);
}

TEST_CASE("format then parse roundtrips awkward values") {
    CsvTable t;
    t.header = {"name", "note"};
    t.rows = {{"a,b", "say \"hi\""}, {"line\nbreak", ""}, {"plain", "v"}};
    CsvTable back = cardicat::parse_csv(cardicat::format_csv(t));
    REQUIRE(back.header == t.header);
    REQUIRE(back.rows == t.rows);
}

TEST_CASE("format_double is shortest round-trip") {
    REQUIRE(cardicat::format_double(0.1) == "0.1");
    REQUIRE(cardicat::format_double(-3.0) == "-3");
    bool ok = false;
    const double v = 0.1234567890123456789;
    REQUIRE(cardicat::parse_double(cardicat::format_double(v), ok) == v);
    REQUIRE(ok);
}

TEST_CASE("parse_double rejects partial and non-finite input") {
    bool ok = true;
    cardicat::parse_double("1x", ok);
    REQUIRE_FALSE(ok);
    cardicat::parse_double("", ok);
    REQUIRE_FALSE(ok);
    cardicat::parse_double("nan", ok);
    REQUIRE_FALSE(ok);
    cardicat::parse_double("inf", ok);
    REQUIRE_FALSE(ok);
    const double v = cardicat::parse_double("-2.5e3", ok);
    REQUIRE(ok);
    REQUIRE(v == -2500.0);
}
