#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace forge::data {

// Glucose display bounds in mg/dL; normalization is pinned to these rather
// than per-dataset extremes so synthetic output always denormalizes into the
// physiological range.
constexpr double kGlucoseMin = 40.0;
constexpr double kGlucoseMax = 400.0;

// One single-day trace, values in mg/dL, fixed length T.
struct GlucoseTrace {
    std::string id;
    std::vector<double> values;
};

// Same trace mapped onto [0, 1].
struct NormalizedTrace {
    std::string id;
    std::vector<double> values;
};

enum class Provenance { Unspecified, CausalityTrain, GanTrain, Holdout };

struct TraceSet {
    std::vector<GlucoseTrace> traces;
    Provenance tag = Provenance::Unspecified;

    std::size_t size() const { return traces.size(); }
    bool empty() const { return traces.empty(); }
};

// Checks length, bounds and finiteness; throws ValidationError with the
// 1-based row index used in file error messages.
void validate_trace(const GlucoseTrace& trace, std::size_t expected_length, std::size_t row);

// CSV ingestion, one trace per row: either `id,v0,...,v{T-1}` or T bare
// numeric columns.  A single literal `id,v0,...` header line is skipped.
// Accepts LF and CRLF.  Ids must be unique; bare rows get `row<k>` ids.
TraceSet load_traces(const std::string& path, std::size_t T);

// Writes the same format load_traces reads, with a header line.
void write_traces(const std::string& path, const TraceSet& set);

NormalizedTrace normalize(const GlucoseTrace& trace);
GlucoseTrace denormalize(const NormalizedTrace& trace);

double normalize_value(double mgdl);
double denormalize_value(double unit);

// Seeded shuffle split into (floor(fraction*n), rest); ids stay disjoint.
// Throws ValidationError when either side would be empty.
std::pair<TraceSet, TraceSet> split_disjoint(const TraceSet& set, double fraction, uint64_t seed);

}  // namespace forge::data
