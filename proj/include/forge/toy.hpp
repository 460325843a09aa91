#pragma once

#include <cstdint>
#include <vector>

#include "forge/data.hpp"

namespace forge::toy {

// Seeded glucose-like benchmark corpus: traces are chains of jittered copies
// of six fixed plateau templates, with one planted transition rule
// (template 2 at one motif step forces template 0 at the next).  The first
// trace walks the templates in order so a first-fit vocabulary build indexes
// them 0..5.
struct ToyConfig {
    std::size_t traces = 400;
    std::size_t T = 48;
    std::size_t tau = 8;
    double jitter = 4.0;  // uniform, well inside the benchmark tolerance
    uint64_t seed = 2024;
};

constexpr int kRuleSource = 2;  // template 2 ...
constexpr int kRuleTarget = 0;  // ... forces template 0 next

// Matching tolerance of the benchmark protocol, proportioned to the 30+
// mg/dL spacing of the plateau templates (the production default tolerance
// accompanies real sensor data and much denser vocabularies).
constexpr double kSigma = 20.0;

const std::vector<std::vector<double>>& templates();

data::TraceSet make_corpus(const ToyConfig& cfg);

}  // namespace forge::toy
