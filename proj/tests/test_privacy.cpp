#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "forge/error.hpp"
#include "forge/privacy.hpp"
#include "forge/rng.hpp"

using namespace forge;

namespace {

data::TraceSet make_set(std::size_t n) {
    data::TraceSet set;
    for (std::size_t i = 0; i < n; ++i) {
        set.traces.push_back({"t" + std::to_string(i), {100.0, 100.0}});
    }
    return set;
}

causality::CausalityMatrix constant_matrix(long m, double value) {
    causality::CausalityMatrix out;
    out.entries = Eigen::MatrixXd::Constant(m, m, value);
    return out;
}

// Independent vote-histogram aggregation used as the no-noise oracle.
double brute_force_majority_center(const std::vector<double>& values, std::size_t bins) {
    std::vector<int> votes(bins, 0);
    for (double v : values) {
        double clamped = std::min(1.0, std::max(0.0, v));
        auto b = static_cast<std::size_t>(clamped * static_cast<double>(bins));
        if (b >= bins) b = bins - 1;
        ++votes[b];
    }
    std::size_t best = 0;
    for (std::size_t b = 1; b < bins; ++b) {
        if (votes[b] > votes[best]) best = b;
    }
    return (static_cast<double>(best) + 0.5) / static_cast<double>(bins);
}

}  // namespace

TEST_CASE("partition splits near-equally and disjointly") {
    const auto set = make_set(10);
    const auto parts = privacy::partition(set, 5);
    REQUIRE(parts.size() == 5);
    std::set<std::string> seen;
    for (const auto& p : parts) {
        CHECK(p.size() == 2);
        for (const auto& t : p.traces) CHECK(seen.insert(t.id).second);
    }
    CHECK(seen.size() == 10);

    const auto identity = privacy::partition(set, 1);
    REQUIRE(identity.size() == 1);
    CHECK(identity[0].size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(identity[0].traces[i].id == set.traces[i].id);
    }

    CHECK_THROWS_AS(privacy::partition(set, 11), ValidationError);
    CHECK_THROWS_AS(privacy::partition(set, 0), ValidationError);
}

TEST_CASE("partition is exhaustive for ragged sizes") {
    Rng rng(15);
    for (int trial = 0; trial < 20; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(3, 30));
        const auto k = static_cast<std::size_t>(rng.uniform_int(1, static_cast<int64_t>(n)));
        const auto set = make_set(n);
        const auto parts = privacy::partition(set, k);
        std::size_t total = 0;
        std::set<std::string> seen;
        for (const auto& p : parts) {
            total += p.size();
            for (const auto& t : p.traces) CHECK(seen.insert(t.id).second);
            CHECK(p.size() >= n / k);
            CHECK(p.size() <= n / k + 1);
        }
        CHECK(total == n);
    }
}

TEST_CASE("pate with unlimited budget returns the majority bin center") {
    privacy::PrivacyBudget unlimited;
    privacy::PateConfig cfg;
    cfg.bins = 10;

    const std::vector<causality::CausalityMatrix> agree{constant_matrix(2, 0.5),
                                                        constant_matrix(2, 0.5),
                                                        constant_matrix(2, 0.5)};
    const auto out = privacy::pate_aggregate(agree, unlimited, cfg, 1);
    CHECK(out.entries(0, 0) == doctest::Approx(0.55));  // center of [0.5, 0.6)
    CHECK(out.entries(1, 1) == doctest::Approx(0.55));

    const std::vector<causality::CausalityMatrix> majority{constant_matrix(1, 0.1),
                                                           constant_matrix(1, 0.1),
                                                           constant_matrix(1, 0.9)};
    const auto out2 = privacy::pate_aggregate(majority, unlimited, cfg, 1);
    CHECK(out2.entries(0, 0) == doctest::Approx(0.15));  // center of the 0.1 bin
}

TEST_CASE("pate rejects dimension mismatches") {
    privacy::PrivacyBudget unlimited;
    privacy::PateConfig cfg;
    const std::vector<causality::CausalityMatrix> bad{constant_matrix(2, 0.5),
                                                      constant_matrix(3, 0.5)};
    CHECK_THROWS_AS(privacy::pate_aggregate(bad, unlimited, cfg, 1), ValidationError);
}

TEST_CASE("pate with unlimited budget equals the brute-force oracle") {
    privacy::PrivacyBudget unlimited;
    privacy::PateConfig cfg;
    cfg.bins = 20;
    Rng rng(19);
    for (int trial = 0; trial < 100; ++trial) {
        const long m = 2;
        std::vector<causality::CausalityMatrix> teachers(3);
        for (auto& t : teachers) {
            t.entries.resize(m, m);
            for (long i = 0; i < m; ++i) {
                for (long j = 0; j < m; ++j) t.entries(i, j) = rng.uniform();
            }
        }
        const auto out = privacy::pate_aggregate(teachers, unlimited, cfg, 7);
        for (long i = 0; i < m; ++i) {
            for (long j = 0; j < m; ++j) {
                const std::vector<double> votes{teachers[0].entries(i, j),
                                                teachers[1].entries(i, j),
                                                teachers[2].entries(i, j)};
                CHECK(out.entries(i, j) ==
                      doctest::Approx(brute_force_majority_center(votes, cfg.bins)));
            }
        }
    }
}

TEST_CASE("noisy pate always emits valid bin centers") {
    privacy::PrivacyBudget budget;
    budget.epsilon = 1.0;
    privacy::PateConfig cfg;
    cfg.bins = 20;
    const std::vector<causality::CausalityMatrix> teachers{
        constant_matrix(2, 0.3), constant_matrix(2, 0.35), constant_matrix(2, 0.8)};
    std::set<long> centers_seen;
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        const auto out = privacy::pate_aggregate(teachers, budget, cfg, seed);
        for (long i = 0; i < 2; ++i) {
            for (long j = 0; j < 2; ++j) {
                const double v = out.entries(i, j);
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                // v must be exactly (b + 0.5) / bins for an integer bin b.
                const double scaled = v * static_cast<double>(cfg.bins) - 0.5;
                CHECK(std::fabs(scaled - std::round(scaled)) < 1e-12);
                centers_seen.insert(static_cast<long>(std::round(scaled)));
            }
        }
    }
    // Strong per-entry noise (epsilon/m^2 = 0.25) flips outcomes sometimes.
    CHECK(centers_seen.size() > 1);

    const auto a = privacy::pate_aggregate(teachers, budget, cfg, 42);
    const auto b = privacy::pate_aggregate(teachers, budget, cfg, 42);
    CHECK((a.entries - b.entries).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("clipping rescales to the bound and keeps direction") {
    privacy::DpSgdConfig cfg;
    cfg.clip_norm = 1.0;
    cfg.noise_multiplier = 0.0;

    Eigen::VectorXd g(2);
    g << 6.0, 8.0;  // norm 10
    const auto clipped = privacy::clip_and_noise({g}, cfg, 1);
    CHECK(clipped.norm() == doctest::Approx(1.0));
    CHECK(clipped[0] / clipped[1] == doctest::Approx(6.0 / 8.0));

    // Gradients already inside the bound pass through exactly.
    Eigen::VectorXd a(2), b(2);
    a << 0.3, 0.4;
    b << -0.1, 0.2;
    const auto mean = privacy::clip_and_noise({a, b}, cfg, 1);
    CHECK(mean[0] == doctest::Approx(0.1));
    CHECK(mean[1] == doctest::Approx(0.3));

    CHECK_THROWS_AS(privacy::clip_and_noise({}, cfg, 1), ValidationError);
}

TEST_CASE("noise variance matches the configured scale") {
    privacy::DpSgdConfig cfg;
    cfg.clip_norm = 2.0;
    cfg.noise_multiplier = 1.5;

    const long dim = 8;
    const std::vector<Eigen::VectorXd> grads{Eigen::VectorXd::Zero(dim),
                                             Eigen::VectorXd::Zero(dim)};
    const double expected_sd = cfg.noise_multiplier * cfg.clip_norm / 2.0;

    double sum = 0.0, sum_sq = 0.0;
    long count = 0;
    for (uint64_t seed = 0; seed < 10000; ++seed) {
        const auto noisy = privacy::clip_and_noise(grads, cfg, seed);
        for (long i = 0; i < dim; ++i) {
            sum += noisy[i];
            sum_sq += noisy[i] * noisy[i];
            ++count;
        }
    }
    const double mean = sum / static_cast<double>(count);
    const double variance = sum_sq / static_cast<double>(count) - mean * mean;
    CHECK(variance == doctest::Approx(expected_sd * expected_sd).epsilon(0.10));
    CHECK(std::fabs(mean) < 0.01);
}

TEST_CASE("zero noise multiplier is deterministic") {
    privacy::DpSgdConfig cfg;
    cfg.clip_norm = 1.0;
    cfg.noise_multiplier = 0.0;
    Eigen::VectorXd g(3);
    g << 0.5, -0.25, 0.125;
    const auto a = privacy::clip_and_noise({g}, cfg, 1);
    const auto b = privacy::clip_and_noise({g}, cfg, 999);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("epsilon accounting reports infinity without noise") {
    privacy::DpSgdConfig cfg;
    cfg.noise_multiplier = 0.0;
    CHECK(std::isinf(privacy::epsilon_of(cfg, 5e-4)));
}

TEST_CASE("epsilon accounting matches the single-shot Gaussian bound") {
    privacy::DpSgdConfig cfg;
    cfg.noise_multiplier = 4.0;
    cfg.sample_rate = 1.0;
    cfg.steps = 1;
    const double delta = 5e-4;
    const double eps = privacy::epsilon_of(cfg, delta);

    // Closed-form optimum of alpha/(2 z^2) + log(1/delta)/(alpha - 1).
    const double z = cfg.noise_multiplier;
    const double reference = 1.0 / (2.0 * z * z) + std::sqrt(2.0 * std::log(1.0 / delta)) / z;
    CHECK(eps == doctest::Approx(reference).epsilon(0.05));
}

TEST_CASE("epsilon accounting is monotone in z, steps and q") {
    const double delta = 5e-4;
    const double zs[] = {0.8, 1.2, 2.0, 3.0, 5.0};
    const long steps[] = {1, 10, 100, 500, 2000};
    const double qs[] = {0.05, 0.3, 1.0};

    for (double q : qs) {
        for (long s : steps) {
            double prev = std::numeric_limits<double>::infinity();
            for (double z : zs) {  // larger z, smaller epsilon
                privacy::DpSgdConfig cfg{1.0, z, q, s};
                const double eps = privacy::epsilon_of(cfg, delta);
                CHECK(eps < prev);
                prev = eps;
            }
        }
    }
    for (double q : qs) {
        for (double z : zs) {
            double prev = 0.0;
            for (long s : steps) {  // more steps, larger epsilon
                privacy::DpSgdConfig cfg{1.0, z, q, s};
                const double eps = privacy::epsilon_of(cfg, delta);
                CHECK(eps > prev);
                prev = eps;
            }
        }
    }
    for (double z : zs) {
        for (long s : steps) {
            double prev = 0.0;
            for (double q : qs) {  // larger sampling rate, larger epsilon
                privacy::DpSgdConfig cfg{1.0, z, q, s};
                const double eps = privacy::epsilon_of(cfg, delta);
                CHECK(eps > prev);
                prev = eps;
            }
        }
    }
}

TEST_CASE("doubling steps strictly increases epsilon") {
    privacy::DpSgdConfig cfg{1.0, 1.5, 0.2, 100};
    const double base = privacy::epsilon_of(cfg, 5e-4);
    cfg.steps = 200;
    CHECK(privacy::epsilon_of(cfg, 5e-4) > base);
}

TEST_CASE("budget report writes machine-readable JSON") {
    privacy::write_budget_report("/tmp/forge_budget.json", 1.25, 5e-4, "test-mechanism",
                                 "{\"k\": 3}");
    std::ifstream in("/tmp/forge_budget.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"epsilon\": 1.25") != std::string::npos);
    CHECK(text.find("test-mechanism") != std::string::npos);
}
