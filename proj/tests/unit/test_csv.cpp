#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "pullback/csv.hpp"
#include "pullback/errors.hpp"

using namespace pullback;
namespace fs = std::filesystem;

TEST_CASE("format_double round-trips") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-2.5e-300) == "-2.5e-300");
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    for (double v : {1.0 / 3.0, 0.010000000000000004, 123456.789, 5e-324}) {
        const std::string s = format_double(v);
        double back = 0.0;
        std::from_chars(s.data(), s.data() + s.size(), back);
        CHECK(back == v);
    }
}

TEST_CASE("to_csv and parse_csv round trip") {
    const std::string text = to_csv({"name", "x", "n"}, {{std::string("a"), 0.5, 3LL}, {std::string("b,c"), 1.0 / 3.0, -1LL}});
    CHECK(text.rfind("name,x,n\n", 0) == 0);
    CHECK(text.find("\"b,c\"") != std::string::npos);
    const CsvTable t = parse_csv(text);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][0] == "b,c");
    CHECK(t.numeric_column("x")[1] == 1.0 / 3.0);
    CHECK(t.numeric_column("n") == std::vector<double>{3, -1});
    CHECK(t.has_column("n"));
    CHECK_FALSE(t.has_column("y"));
}

TEST_CASE("quotes inside fields") {
    const std::string text = to_csv({"s"}, {{std::string("say \"hi\"")}, {std::string("two\nlines")}});
    const CsvTable t = parse_csv(text);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "say \"hi\"");
    CHECK(t.rows[1][0] == "two\nlines");
}

TEST_CASE("row width mismatch on write") {
    CHECK_THROWS_AS(to_csv({"a", "b"}, {{1.0}}), ShapeError);
}

TEST_CASE("parse errors carry the line number") {
    try {
        parse_csv("a,b\n1,2\n3\n", "f.csv");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("f.csv") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_csv("", "empty.csv"), ParseError);
    CHECK_THROWS_AS(parse_csv("a\n\"open\n", "q.csv"), ParseError);
    const CsvTable t = parse_csv("a,b\n1,x\n", "n.csv");
    try {
        t.numeric_column("b");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(t.column("zzz"), ParseError);
}

TEST_CASE("blank lines are skipped") {
    const CsvTable t = parse_csv("a\n1\n\n2\n");
    CHECK(t.rows.size() == 2);
}

TEST_CASE("atomic file writes") {
    const fs::path dir = fs::temp_directory_path() / "pullback_test_csv";
    fs::create_directories(dir);
    const fs::path p = dir / "out.csv";
    write_file_atomic(p, "a\n1\n");
    CHECK(read_file(p) == "a\n1\n");
    CHECK_FALSE(fs::exists(dir / "out.csv.tmp"));
    write_file_atomic(p, "a\n2\n");
    CHECK(read_csv(p).rows[0][0] == "2");
    CHECK_THROWS_AS(read_file(dir / "missing.csv"), IoError);
    CHECK_THROWS_AS(write_file_atomic(dir / "no" / "such" / "dir.csv", "x"), IoError);
}
