#include "forge/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "forge/error.hpp"
#include "forge/rng.hpp"

namespace forge::data {

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

bool parse_double(const std::string& field, double& out) {
    const char* begin = field.data();
    const char* end = begin + field.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(end[-1]))) --end;
    if (begin == end) return false;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

bool is_header_row(const std::vector<std::string>& fields) {
    if (fields.size() < 2) return false;
    if (fields[0] != "id") return false;
    return fields[1] == "v0";
}

}  // namespace

void validate_trace(const GlucoseTrace& trace, std::size_t expected_length, std::size_t row) {
    if (trace.values.size() != expected_length) {
        throw ValidationError("arity mismatch at row " + std::to_string(row) + ": expected " +
                              std::to_string(expected_length) + " values, got " +
                              std::to_string(trace.values.size()));
    }
    for (std::size_t k = 0; k < trace.values.size(); ++k) {
        const double v = trace.values[k];
        if (!std::isfinite(v)) {
            throw ValidationError("non-finite value at row " + std::to_string(row) + ", column " +
                                  std::to_string(k));
        }
        if (v < kGlucoseMin) {
            throw ValidationError("value below " + std::to_string(static_cast<int>(kGlucoseMin)) +
                                  " at row " + std::to_string(row));
        }
        if (v > kGlucoseMax) {
            throw ValidationError("value above " + std::to_string(static_cast<int>(kGlucoseMax)) +
                                  " at row " + std::to_string(row));
        }
    }
}

TraceSet load_traces(const std::string& path, std::size_t T) {
    if (T == 0) throw ValidationError("trace length must be positive");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    TraceSet set;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t row = 0;
    bool first_line = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_row(line);
        if (first_line && is_header_row(fields)) {
            first_line = false;
            continue;
        }
        first_line = false;
        ++row;

        GlucoseTrace trace;
        std::size_t value_start = 0;
        if (fields.size() == T + 1) {
            trace.id = fields[0];
            value_start = 1;
            if (trace.id.empty()) {
                throw ValidationError("empty id at row " + std::to_string(row));
            }
        } else if (fields.size() == T) {
            trace.id = "row" + std::to_string(row);
        } else {
            throw ValidationError("arity mismatch at row " + std::to_string(row) + ": expected " +
                                  std::to_string(T) + " values, got " +
                                  std::to_string(fields.size() - value_start));
        }

        trace.values.reserve(T);
        for (std::size_t k = value_start; k < fields.size(); ++k) {
            double v;
            if (!parse_double(fields[k], v)) {
                throw ValidationError("non-numeric value '" + fields[k] + "' at row " +
                                      std::to_string(row));
            }
            trace.values.push_back(v);
        }
        validate_trace(trace, T, row);
        if (!seen_ids.insert(trace.id).second) {
            throw ValidationError("duplicate id '" + trace.id + "' at row " + std::to_string(row));
        }
        set.traces.push_back(std::move(trace));
    }
    return set;
}

void write_traces(const std::string& path, const TraceSet& set) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    const std::size_t T = set.empty() ? 0 : set.traces.front().values.size();
    out << "id";
    for (std::size_t k = 0; k < T; ++k) out << ",v" << k;
    out << "\n";
    char buf[64];
    for (const auto& trace : set.traces) {
        out << trace.id;
        for (double v : trace.values) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

double normalize_value(double mgdl) {
    return (mgdl - kGlucoseMin) / (kGlucoseMax - kGlucoseMin);
}

double denormalize_value(double unit) {
    return kGlucoseMin + unit * (kGlucoseMax - kGlucoseMin);
}

NormalizedTrace normalize(const GlucoseTrace& trace) {
    NormalizedTrace out;
    out.id = trace.id;
    out.values.reserve(trace.values.size());
    for (double v : trace.values) out.values.push_back(normalize_value(v));
    return out;
}

GlucoseTrace denormalize(const NormalizedTrace& trace) {
    GlucoseTrace out;
    out.id = trace.id;
    out.values.reserve(trace.values.size());
    for (double v : trace.values) out.values.push_back(denormalize_value(v));
    return out;
}

std::pair<TraceSet, TraceSet> split_disjoint(const TraceSet& set, double fraction, uint64_t seed) {
    if (set.size() < 2) throw ValidationError("split needs at least 2 traces");
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ValidationError("split fraction must lie in (0, 1)");
    }
    const auto n = set.size();
    const auto first_count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (first_count == 0 || first_count == n) {
        throw ValidationError("split fraction " + std::to_string(fraction) +
                              " leaves an empty side for " + std::to_string(n) + " traces");
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0x73706c6974ULL));  // stream tag: "split"
    rng.shuffle(order);

    TraceSet first, second;
    first.tag = Provenance::CausalityTrain;
    second.tag = Provenance::GanTrain;
    first.traces.reserve(first_count);
    second.traces.reserve(n - first_count);
    for (std::size_t i = 0; i < n; ++i) {
        if (i < first_count) {
            first.traces.push_back(set.traces[order[i]]);
        } else {
            second.traces.push_back(set.traces[order[i]]);
        }
    }
    return {std::move(first), std::move(second)};
}

}  // namespace forge::data
