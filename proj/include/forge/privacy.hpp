#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "forge/causality.hpp"
#include "forge/data.hpp"

namespace forge::privacy {

struct PrivacyBudget {
    double epsilon = std::numeric_limits<double>::infinity();
    double delta = 5e-4;

    bool unlimited() const { return std::isinf(epsilon); }
};

struct PateConfig {
    std::size_t n_partitions = 5;
    std::size_t bins = 20;  // quantization levels over [0, 1]
};

struct DpSgdConfig {
    double clip_norm = 1.0;        // C
    double noise_multiplier = 0.0; // z
    double sample_rate = 1.0;      // q
    long steps = 1;
};

// Deterministic near-equal split by round-robin; pairwise disjoint and
// exhaustive.  Throws when n exceeds the set size.
std::vector<data::TraceSet> partition(const data::TraceSet& set, std::size_t n);

// Per-entry PATE vote: each teacher's value is quantized into equal-width
// bins over [0, 1]; Laplace noise of scale 2/eps_entry (eps_entry = eps/m^2)
// perturbs every bin count; the output is the center of the noisiest bin.
// Unlimited budgets add no noise and resolve ties toward the lower bin.
causality::CausalityMatrix pate_aggregate(const std::vector<causality::CausalityMatrix>& teachers,
                                          const PrivacyBudget& budget, const PateConfig& cfg,
                                          uint64_t seed);

// DP-SGD sanitization: rescale each per-example gradient to norm <= C, take
// the ordered mean, then add per-coordinate Gaussian noise with standard
// deviation z*C/B.  z = 0 draws nothing and returns the plain clipped mean.
Eigen::VectorXd clip_and_noise(const std::vector<Eigen::VectorXd>& per_example_grads,
                               const DpSgdConfig& cfg, uint64_t seed);

// Renyi-DP accounting of the subsampled Gaussian mechanism over a fixed grid
// of orders, converted to (epsilon, delta).  z = 0 reports infinity.
double epsilon_of(const DpSgdConfig& cfg, double delta);

// {epsilon, delta, mechanism, parameters} report.
void write_budget_report(const std::string& path, double epsilon, double delta,
                         const std::string& mechanism, const std::string& parameters_json);

}  // namespace forge::privacy
