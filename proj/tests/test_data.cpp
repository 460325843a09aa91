#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>
#include <string>

#include "forge/data.hpp"
#include "forge/error.hpp"
#include "forge/rng.hpp"

using namespace forge;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = "/tmp/forge_data_" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

data::TraceSet make_set(std::size_t n) {
    data::TraceSet set;
    for (std::size_t i = 0; i < n; ++i) {
        set.traces.push_back({"t" + std::to_string(i), {100.0, 100.0, 100.0, 100.0}});
    }
    return set;
}

}  // namespace

TEST_CASE("load_traces ingests constant rows") {
    const auto path = write_temp("const.csv", "100,100,100,100\n100,100,100,100\n");
    const auto set = data::load_traces(path, 4);
    REQUIRE(set.size() == 2);
    for (const auto& t : set.traces) {
        REQUIRE(t.values.size() == 4);
        for (double v : t.values) CHECK(v == 100.0);
    }
    CHECK(set.traces[0].id == "row1");
    CHECK(set.traces[1].id == "row2");
}

TEST_CASE("load_traces accepts ids, header and crlf") {
    const auto path =
        write_temp("ids.csv", "id,v0,v1,v2\r\nalpha,100,110,120\r\nbeta,90,95,99\r\n");
    const auto set = data::load_traces(path, 3);
    REQUIRE(set.size() == 2);
    CHECK(set.traces[0].id == "alpha");
    CHECK(set.traces[1].values[2] == doctest::Approx(99.0));
}

TEST_CASE("load_traces rejects out-of-bound values with row index") {
    const auto path = write_temp("low.csv", "39,100,100,100\n");
    CHECK_THROWS_WITH_AS(data::load_traces(path, 4), "value below 40 at row 1", ValidationError);
    const auto path_hi = write_temp("hi.csv", "100,100,100,100\n100,100,401,100\n");
    CHECK_THROWS_WITH_AS(data::load_traces(path_hi, 4), "value above 400 at row 2",
                         ValidationError);
}

TEST_CASE("load_traces rejects arity mismatch and bad numbers") {
    const auto path = write_temp("arity.csv", "100,100,100\n");
    CHECK_THROWS_AS(data::load_traces(path, 4), ValidationError);
    const auto path_bad = write_temp("bad.csv", "100,abc,100,100\n");
    CHECK_THROWS_AS(data::load_traces(path_bad, 4), ValidationError);
    const auto path_dup = write_temp("dup.csv", "a,100,100\na,100,100\n");
    CHECK_THROWS_AS(data::load_traces(path_dup, 2), ValidationError);
    CHECK_THROWS_AS(data::load_traces("/tmp/forge_does_not_exist.csv", 4), IoError);
}

TEST_CASE("normalize endpoints and midpoint") {
    CHECK(data::normalize_value(40.0) == doctest::Approx(0.0));
    CHECK(data::normalize_value(400.0) == doctest::Approx(1.0));
    CHECK(data::normalize_value(220.0) == doctest::Approx(0.5));
}

TEST_CASE("normalize round-trips within 1e-9") {
    data::GlucoseTrace t{"x", {73.2, 310.5}};
    const auto back = data::denormalize(data::normalize(t));
    for (std::size_t k = 0; k < t.values.size(); ++k) {
        CHECK(back.values[k] == doctest::Approx(t.values[k]).epsilon(1e-9));
    }
}

TEST_CASE("normalize preserves order statistics") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> values;
        for (int k = 0; k < 15; ++k) values.push_back(rng.uniform(40.0, 400.0));
        std::vector<double> normalized;
        for (double v : values) normalized.push_back(data::normalize_value(v));
        for (std::size_t a = 0; a < values.size(); ++a) {
            for (std::size_t b = 0; b < values.size(); ++b) {
                CHECK((values[a] < values[b]) == (normalized[a] < normalized[b]));
            }
        }
    }
}

TEST_CASE("split_disjoint cardinality and determinism") {
    const auto set = make_set(10);
    const auto [a, b] = data::split_disjoint(set, 0.5, 7);
    CHECK(a.size() == 5);
    CHECK(b.size() == 5);
    std::set<std::string> ids;
    for (const auto& t : a.traces) ids.insert(t.id);
    for (const auto& t : b.traces) CHECK(ids.count(t.id) == 0);

    const auto [a2, b2] = data::split_disjoint(set, 0.5, 7);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.traces[i].id == a2.traces[i].id);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(b.traces[i].id == b2.traces[i].id);
}

TEST_CASE("split_disjoint rejects degenerate fractions") {
    const auto set = make_set(10);
    CHECK_THROWS_AS(data::split_disjoint(set, 0.05, 1), ValidationError);
    CHECK_THROWS_AS(data::split_disjoint(make_set(1), 0.5, 1), ValidationError);
}

TEST_CASE("split_disjoint partitions the input exactly") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(4, 40));
        const double fraction = rng.uniform(0.2, 0.8);
        const auto set = make_set(n);
        const auto [a, b] = data::split_disjoint(set, fraction, rng.next_u64());
        CHECK(a.size() + b.size() == n);
        std::set<std::string> seen;
        for (const auto& t : a.traces) seen.insert(t.id);
        for (const auto& t : b.traces) seen.insert(t.id);
        CHECK(seen.size() == n);  // union covers the input, no id twice
        CHECK(a.size() == static_cast<std::size_t>(fraction * static_cast<double>(n)));
    }
}

TEST_CASE("write_traces round-trips through load_traces") {
    data::TraceSet set;
    set.traces.push_back({"a", {40.000000001, 123.456789, 400.0, 77.7}});
    set.traces.push_back({"b", {50.5, 60.25, 70.125, 80.0625}});
    const std::string path = "/tmp/forge_data_roundtrip.csv";
    data::write_traces(path, set);
    const auto loaded = data::load_traces(path, 4);
    REQUIRE(loaded.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(loaded.traces[i].id == set.traces[i].id);
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(loaded.traces[i].values[k] == set.traces[i].values[k]);
        }
    }
}
