#include <cmath>

#include "doctest.h"
#include "pullback/errors.hpp"
#include "pullback/svg.hpp"

using namespace pullback;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("line chart is deterministic") {
    const std::vector<Series> s{{"a", {1, 2, 3}, {0.1, 0.4, 0.2}}, {"b", {1, 2, 3}, {1, 1, 1}}};
    const std::string first = line_chart_svg({"t", "x", "y"}, s, true);
    CHECK(first == line_chart_svg({"t", "x", "y"}, s, true));
    CHECK(first.rfind("<svg", 0) == 0);
    CHECK(count(first, "<polyline") == 2);
    CHECK(first.find(">t<") != std::string::npos);
}

TEST_CASE("empty or non-finite data still draws axes") {
    const std::string empty = line_chart_svg({"t", "x", "y"}, {});
    CHECK(count(empty, "<polyline") == 0);
    CHECK(count(empty, "<line") > 0);
    const std::string nan = line_chart_svg({"t", "x", "y"}, {{"a", {1, 2}, {NAN, INFINITY}}});
    CHECK(count(nan, "<polyline") == 0);
    const std::string hist = histogram_svg({"h", "v", "count"}, std::vector<double>{});
    CHECK(count(hist, "<line") > 0);
}

TEST_CASE("histogram counts") {
    double lo = 0, hi = 0;
    const std::vector<double> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, NAN};
    const auto c = histogram_counts(v, 3, lo, hi);
    CHECK(lo == 0.0);
    CHECK(hi == 9.0);
    CHECK(c == std::vector<std::size_t>{3, 3, 4});
    CHECK(histogram_counts(v, 30, lo, hi).size() == 30);
    CHECK_THROWS_AS(histogram_counts(v, 0, lo, hi), InvalidArgument);
}

TEST_CASE("histogram draws one bar per occupied bin") {
    std::vector<double> v;
    for (int i = 0; i < 300; ++i) v.push_back(i * 0.01);
    const std::string svg = histogram_svg({"h", "v", "count"}, v);
    // Background plus 30 bars with the default bin count.
    CHECK(count(svg, "<rect") == 31);
    CHECK(svg == histogram_svg({"h", "v", "count"}, v, 30));
}
