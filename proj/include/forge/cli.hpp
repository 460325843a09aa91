#pragma once

#include <string>

#include "forge/config.hpp"

namespace forge::cli {

// Pipeline subcommands.  Each reads prior artifacts from cfg.out_dir and
// writes its own there; run them in order (motifs, train-causality,
// train-gan, generate, evaluate) for a full pass.  All throw the error types
// in error.hpp; the binary maps those to exit codes.
void run_motifs(const config::PipelineConfig& cfg);
void run_train_causality(const config::PipelineConfig& cfg);
void run_train_gan(const config::PipelineConfig& cfg);
void run_generate(const config::PipelineConfig& cfg);
void run_evaluate(const config::PipelineConfig& cfg);

// Artifact locations under the run directory.
std::string motif_csv_path(const config::PipelineConfig& cfg);
std::string motif_sidecar_path(const config::PipelineConfig& cfg);
std::string causality_csv_path(const config::PipelineConfig& cfg);
std::string causality_sidecar_path(const config::PipelineConfig& cfg);
std::string causality_budget_path(const config::PipelineConfig& cfg);
std::string checkpoint_path(const config::PipelineConfig& cfg);
std::string loss_log_path(const config::PipelineConfig& cfg);
std::string gan_budget_path(const config::PipelineConfig& cfg);
std::string synthetic_path(const config::PipelineConfig& cfg);
std::string evaluation_path(const config::PipelineConfig& cfg);

}  // namespace forge::cli
