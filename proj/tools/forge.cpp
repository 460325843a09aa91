#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "forge/cli.hpp"
#include "forge/error.hpp"

namespace {

// Exit codes: 0 success, 2 config error, 3 numeric divergence, 4 I/O or data
// error.
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    std::string synthetic;
    std::string checkpoint;
    long seed = -1;
    long count = -1;
};

forge::config::PipelineConfig resolve(const CommonOptions& opts) {
    auto cfg = forge::config::load_config(opts.config_path);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed >= 0) {
        cfg.seed = static_cast<uint64_t>(opts.seed);
        cfg.causality.seed = cfg.seed;
        cfg.gan.seed = cfg.seed;
        cfg.gan.estimator.seed = cfg.seed;
        cfg.eval.tstr.seed = cfg.seed;
    }
    if (opts.count > 0) cfg.generate_count = static_cast<std::size_t>(opts.count);
    if (!opts.synthetic.empty()) cfg.eval.synthetic_path = opts.synthetic;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "pipeline config file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_dir, "output directory override");
    cmd->add_option("--seed", opts.seed, "seed override");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"forge: differentially private synthetic glucose-trace generation"};
    app.require_subcommand(1);

    CommonOptions opts;
    auto* motifs = app.add_subcommand("motifs", "build the motif vocabulary artifact");
    add_common(motifs, opts);
    auto* causality = app.add_subcommand("train-causality",
                                         "train per-partition motif networks and aggregate");
    add_common(causality, opts);
    auto* gan = app.add_subcommand("train-gan", "train the four-network model");
    add_common(gan, opts);
    auto* generate = app.add_subcommand("generate", "sample synthetic traces from a checkpoint");
    add_common(generate, opts);
    generate->add_option("--count", opts.count, "number of traces to generate");
    auto* evaluate = app.add_subcommand("evaluate", "fidelity, breadth and utility reports");
    add_common(evaluate, opts);
    evaluate->add_option("--synthetic", opts.synthetic, "synthetic CSV override");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = resolve(opts);
        if (motifs->parsed()) {
            forge::cli::run_motifs(cfg);
            std::printf("motif artifact written to %s\n", forge::cli::motif_csv_path(cfg).c_str());
        } else if (causality->parsed()) {
            forge::cli::run_train_causality(cfg);
            std::printf("causality matrix written to %s\n",
                        forge::cli::causality_csv_path(cfg).c_str());
        } else if (gan->parsed()) {
            forge::cli::run_train_gan(cfg);
            std::printf("checkpoint written to %s\n", forge::cli::checkpoint_path(cfg).c_str());
        } else if (generate->parsed()) {
            forge::cli::run_generate(cfg);
            std::printf("synthetic traces written to %s\n",
                        forge::cli::synthetic_path(cfg).c_str());
        } else if (evaluate->parsed()) {
            forge::cli::run_evaluate(cfg);
            std::printf("evaluation written to %s\n", forge::cli::evaluation_path(cfg).c_str());
        }
    } catch (const forge::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const forge::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitNumeric;
    } catch (const forge::ValidationError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitIo;
    } catch (const forge::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
