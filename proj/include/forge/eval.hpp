#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "forge/data.hpp"

namespace forge::eval {

// Population glycemic metrics, averaged over per-trace values.  p-values are
// two-sided Welch tests of the per-trace samples against a reference set.
struct GlycemicReport {
    double variance = 0;  // mean per-trace sample variance
    double tir = 0;       // % of samples in [70, 180]
    double hypo = 0;      // % below 70
    double hyper = 0;     // % above 180
    double gvi = 0;       // polyline length over straight-line length
    double pgs = 0;       // gvi * mean glucose * (1 - tir/100)
    struct PValues {
        double variance, tir, hypo, hyper, gvi, pgs;
    };
    std::optional<PValues> p;
};

GlycemicReport glycemic_metrics(const data::TraceSet& set,
                                const data::TraceSet* reference = nullptr);

// Per-trace metric samples, exposed for the significance tests.
struct TraceMetrics {
    double variance, tir, hypo, hyper, gvi, pgs, mean;
};
TraceMetrics trace_metrics(const data::GlucoseTrace& trace);

// Two-sided Welch t-test p-value (Welch-Satterthwaite dof, Student-t CDF via
// the regularized incomplete beta).  Throws on degenerate inputs.
double welch_test(const std::vector<double>& a, const std::vector<double>& b);

// Student-t two-sided p for a given statistic and dof; exposed for tests.
double student_t_two_sided_p(double t, double dof);

// Per-trace variance histogram over fixed bin edges; values outside the
// edges fall into the open-ended first/last bins.
std::vector<std::size_t> variance_histogram(const data::TraceSet& set,
                                            const std::vector<double>& edges);

// Projection of each trace onto the top-2 eigenvectors of the trace
// covariance (power iteration with deflation, tolerance 1e-9).
Eigen::MatrixXd pca2(const data::TraceSet& set);

struct BreadthReport {
    double pct_tm = 0;    // share of synthetic motifs matching a real one
    double pct_fm = 0;    // 1 - pct_tm
    double coverage = 0;  // share of real motifs hit by some synthetic motif
    double mse = 0;       // occurrence-frequency gap over the union vocabulary
    std::size_t real_motifs = 0;
    std::size_t synth_motifs = 0;
};

BreadthReport motif_coverage(const data::TraceSet& real, const data::TraceSet& synth,
                             std::size_t tau, double sigma);

enum class ClarkeZone { A, B, C, D, E };

// Canonical five-zone classification of a (reference, prediction) pair in
// mg/dL, rules evaluated in order A, E, C, D, else B.
ClarkeZone clarke_zone(double reference, double prediction);
char clarke_zone_letter(ClarkeZone zone);

struct ClarkeSummary {
    std::array<double, 5> fraction{};  // A..E, sums to 1
};
ClarkeSummary clarke_summary(const std::vector<std::pair<double, double>>& pairs);

struct TstrConfig {
    int window = 12;
    int horizon = 6;    // steps ahead of the window end
    int hidden = 32;
    int epochs = 20;
    int stride = 2;     // window start stride over each trace
    std::size_t batch = 64;
    double learning_rate = 0.01;
    int repeats = 3;
    uint64_t seed = 1;
};

struct TstrReport {
    double rmse_mean = 0;  // normalized units
    double rmse_std = 0;
    ClarkeSummary clarke;  // pooled over repeats, denormalized pairs
};

// Trains a small forecaster on `train`, evaluates on sliding windows of
// `test`; repeats with distinct seeds.
TstrReport tstr(const data::TraceSet& train, const data::TraceSet& test, const TstrConfig& cfg);

// Last-value persistence RMSE on `test` windows (normalized units).
double persistence_rmse(const data::TraceSet& test, const TstrConfig& cfg);

}  // namespace forge::eval
