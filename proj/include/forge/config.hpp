#pragma once

#include <cstdint>
#include <string>

#include "forge/causality.hpp"
#include "forge/eval.hpp"
#include "forge/gan.hpp"
#include "forge/privacy.hpp"

namespace forge::config {

struct DataConfig {
    std::string path;
    std::size_t trace_length = 288;
    double causality_fraction = 0.5;  // split between causality and GAN sides
};

struct MotifConfig {
    std::size_t tau = 48;
    double sigma = 2.0;
    std::size_t max_motifs = 512;  // desk-scale vocabulary cap; 0 disables
};

struct PrivacyConfig {
    privacy::PrivacyBudget budget;  // epsilon governs PATE and gates DP-SGD
    privacy::PateConfig pate;
    double dpsgd_clip_norm = 1.0;
    double dpsgd_noise_multiplier = 0.0;
};

struct EvalConfig {
    std::string synthetic_path;  // defaults to <out>/synthetic.csv
    double variance_bin_width = 100.0;
    double variance_max = 5000.0;
    eval::TstrConfig tstr;
};

struct PipelineConfig {
    DataConfig data;
    MotifConfig motif;
    causality::CausalityTrainConfig causality;
    PrivacyConfig privacy;
    gan::GanConfig gan;
    EvalConfig eval;
    std::size_t generate_count = 100;
    uint64_t seed = 7;
    std::string out_dir = "out";
};

// Parses and validates; throws ConfigError on any malformed or out-of-range
// field.  Unknown keys are rejected to catch typos.
PipelineConfig load_config(const std::string& path);
PipelineConfig parse_config(const std::string& json_text);

// FNV-1a hash of the canonical serialized form; stamped into artifacts.
std::string config_hash(const PipelineConfig& cfg);

std::string canonical_json(const PipelineConfig& cfg);

// Thread cap for parallel sections: FORGE_THREADS, else hardware concurrency.
unsigned thread_budget();

}  // namespace forge::config
