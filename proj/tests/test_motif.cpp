#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "forge/error.hpp"
#include "forge/motif.hpp"
#include "forge/rng.hpp"

using namespace forge;

namespace {

data::GlucoseTrace trace_of(std::vector<double> values) {
    static int counter = 0;
    return {"m" + std::to_string(counter++), std::move(values)};
}

data::TraceSet random_set(std::size_t n, std::size_t T, uint64_t seed) {
    Rng rng(seed);
    data::TraceSet set;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> values;
        for (std::size_t t = 0; t < T; ++t) values.push_back(rng.uniform(40.0, 400.0));
        set.traces.push_back({"r" + std::to_string(i), std::move(values)});
    }
    return set;
}

}  // namespace

TEST_CASE("chunk splits complete windows and drops remainders") {
    const auto t8 = trace_of({1, 2, 3, 4, 5, 6, 7, 8});
    const auto w8 = motif::chunk(t8, 4);
    REQUIRE(w8.size() == 2);
    CHECK(w8[0] == std::vector<double>{1, 2, 3, 4});
    CHECK(w8[1] == std::vector<double>{5, 6, 7, 8});

    const auto t10 = trace_of({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    const auto w10 = motif::chunk(t10, 4);
    REQUIRE(w10.size() == 2);  // trailing 2 samples dropped
    CHECK(w10[1] == std::vector<double>{5, 6, 7, 8});

    CHECK_THROWS_AS(motif::chunk(t8, 0), ValidationError);
    CHECK_THROWS_AS(motif::chunk(t8, 9), ValidationError);
}

TEST_CASE("matches applies per-coordinate tolerance") {
    CHECK(motif::matches({100, 102}, {101, 101}, 2.0));
    CHECK_FALSE(motif::matches({100, 105}, {100, 102}, 2.0));
    CHECK(motif::matches({100, 105}, {100, 105}, 0.0));
    CHECK_THROWS_AS(motif::matches({1, 2}, {1, 2, 3}, 1.0), ValidationError);
}

TEST_CASE("build dedups matching chunks") {
    data::TraceSet set;
    set.traces.push_back(trace_of({100, 100, 100, 100}));
    const auto ms = motif::build_motif_set(set, 2, 2.0);
    CHECK(ms.size() == 1);
    CHECK(ms.build_counts[0] == 2);

    data::TraceSet two;
    two.traces.push_back(trace_of({100, 100, 104, 104}));
    const auto ms2 = motif::build_motif_set(two, 2, 2.0);
    CHECK(ms2.size() == 2);  // coordinate gap 4 exceeds tolerance 2
}

TEST_CASE("every chunk of the corpus matches some motif of its set") {
    const auto set = random_set(50, 16, 99);
    const auto ms = motif::build_motif_set(set, 4, 2.0);
    for (const auto& trace : set.traces) {
        for (const auto& window : motif::chunk(trace, 4)) {
            bool any = false;
            for (const auto& m : ms.motifs) {
                if (motif::matches(window, m.values, 2.0)) {
                    any = true;
                    break;
                }
            }
            CHECK(any);
        }
    }
}

TEST_CASE("motif set members are pairwise non-matching") {
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto set = random_set(30, 12, seed);
        const auto ms = motif::build_motif_set(set, 4, 2.0);
        for (std::size_t a = 0; a < ms.size(); ++a) {
            for (std::size_t b = a + 1; b < ms.size(); ++b) {
                CHECK_FALSE(motif::matches(ms.motifs[a].values, ms.motifs[b].values, ms.sigma));
            }
        }
    }
}

TEST_CASE("rebuilding a set from its own motifs is the identity") {
    const auto set = random_set(25, 12, 4);
    const auto ms = motif::build_motif_set(set, 4, 2.0);
    data::TraceSet as_traces;
    for (const auto& m : ms.motifs) {
        as_traces.traces.push_back({"mt" + std::to_string(m.index), m.values});
    }
    const auto rebuilt = motif::build_motif_set(as_traces, 4, 2.0);
    REQUIRE(rebuilt.size() == ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) {
        CHECK(rebuilt.motifs[i].values == ms.motifs[i].values);
    }
}

TEST_CASE("encode picks the least-change motif with low-index ties") {
    motif::MotifSet ms;
    ms.tau = 2;
    ms.sigma = 2.0;
    ms.motifs = {{{100, 100}, 0}, {{104, 104}, 1}, {{200, 200}, 2}};

    // Exact match.
    auto seq = motif::encode_values({104, 104}, "a", ms);
    CHECK(seq.indices == std::vector<int>{1});
    CHECK(seq.fallback[0] == 0);

    // Matches both motif 0 (L1 = 3) and motif 1 (L1 = 5): least changes wins.
    seq = motif::encode_values({101, 102}, "b", ms);
    CHECK(seq.indices == std::vector<int>{0});

    // Equidistant between motifs 0 and 1: lowest index wins.
    seq = motif::encode_values({102, 102}, "c", ms);
    CHECK(seq.indices == std::vector<int>{0});

    // Matches nothing: global L1-nearest, flagged.
    seq = motif::encode_values({150, 150}, "d", ms);
    CHECK(seq.indices == std::vector<int>{1});
    CHECK(seq.fallback[0] == 1);
}

TEST_CASE("encode is total over a random corpus") {
    const auto set = random_set(20, 12, 5);
    const auto ms = motif::build_motif_set(set, 4, 2.0);
    for (const auto& trace : set.traces) {
        const auto seq = motif::encode(trace, ms);
        CHECK(seq.indices.size() == 3);
        for (int idx : seq.indices) {
            CHECK(idx >= 0);
            CHECK(static_cast<std::size_t>(idx) < ms.size());
        }
    }
}

TEST_CASE("indicator series is one-hot per step") {
    motif::MotifSequence seq;
    seq.trace_id = "x";
    seq.indices = {0, 2};
    const auto ind = motif::indicator_series(seq, 3);
    REQUIRE(ind.rows() == 2);
    REQUIRE(ind.cols() == 3);
    CHECK(ind(0, 0) == 1.0);
    CHECK(ind(0, 1) == 0.0);
    CHECK(ind(0, 2) == 0.0);
    CHECK(ind(1, 2) == 1.0);
    CHECK(ind.row(0).sum() == 1.0);
    CHECK(ind.row(1).sum() == 1.0);

    motif::MotifSequence bad;
    bad.indices = {3};
    CHECK_THROWS_AS(motif::indicator_series(bad, 3), ValidationError);
}

TEST_CASE("indicator column sums equal occurrence counts") {
    const auto set = random_set(30, 12, 6);
    const auto ms = motif::build_motif_set(set, 4, 2.0);
    std::vector<motif::MotifSequence> seqs;
    std::map<int, long> direct_counts;
    for (const auto& trace : set.traces) {
        seqs.push_back(motif::encode(trace, ms));
        for (int idx : seqs.back().indices) ++direct_counts[idx];
    }
    const auto mats = motif::indicator_series(seqs, ms.size());
    Eigen::RowVectorXd sums = Eigen::RowVectorXd::Zero(static_cast<long>(ms.size()));
    for (const auto& m : mats) sums += m.colwise().sum();
    for (long j = 0; j < sums.size(); ++j) {
        CHECK(sums[j] == doctest::Approx(static_cast<double>(direct_counts[static_cast<int>(j)])));
    }
}

TEST_CASE("max_motifs keeps the most frequent motifs") {
    // Four well-separated levels with controlled frequencies, plus rare ones.
    data::TraceSet set;
    const auto add = [&set](double level, int copies) {
        for (int c = 0; c < copies; ++c) {
            set.traces.push_back(trace_of({level, level, level, level}));
        }
    };
    add(100, 6);
    add(150, 5);
    add(200, 4);
    add(250, 3);
    add(300, 2);
    add(350, 1);

    const auto full = motif::build_motif_set(set, 4, 2.0);
    REQUIRE(full.size() == 6);

    const auto capped = motif::build_motif_set(set, 4, 2.0, 4);
    REQUIRE(capped.size() == 4);
    // Brute-force frequency ranking says levels 100, 150, 200, 250 survive.
    CHECK(capped.motifs[0].values[0] == doctest::Approx(100.0));
    CHECK(capped.motifs[1].values[0] == doctest::Approx(150.0));
    CHECK(capped.motifs[2].values[0] == doctest::Approx(200.0));
    CHECK(capped.motifs[3].values[0] == doctest::Approx(250.0));
    for (std::size_t i = 0; i < capped.size(); ++i) {
        CHECK(capped.motifs[i].index == static_cast<int>(i));
    }
    // Dropped occurrences fold into the nearest survivor (300 and 350 -> 250).
    CHECK(capped.build_counts[3] == 3 + 2 + 1);
}

TEST_CASE("motif set serialization round-trips") {
    const auto set = random_set(10, 12, 8);
    const auto ms = motif::build_motif_set(set, 4, 1.5);
    motif::save_motif_set("/tmp/forge_motifs.csv", "/tmp/forge_motifs.json", ms, "deadbeef");
    const auto loaded = motif::load_motif_set("/tmp/forge_motifs.csv", "/tmp/forge_motifs.json");
    REQUIRE(loaded.size() == ms.size());
    CHECK(loaded.tau == ms.tau);
    CHECK(loaded.sigma == ms.sigma);
    for (std::size_t i = 0; i < ms.size(); ++i) {
        CHECK(loaded.motifs[i].index == ms.motifs[i].index);
        CHECK(loaded.motifs[i].values == ms.motifs[i].values);
    }
}
