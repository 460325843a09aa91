#include "forge/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <nlohmann/json.hpp>
#include <thread>
#include <vector>

#include "forge/error.hpp"
#include "forge/eval.hpp"
#include "forge/gan.hpp"
#include "forge/privacy.hpp"
#include "forge/rng.hpp"

namespace forge::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void ensure_out_dir(const config::PipelineConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out_dir);
}

std::string join(const config::PipelineConfig& cfg, const char* name) {
    return (fs::path(cfg.out_dir) / name).string();
}

data::TraceSet load_dataset(const config::PipelineConfig& cfg) {
    if (cfg.data.path.empty()) throw ConfigError("data.path is required");
    return data::load_traces(cfg.data.path, cfg.data.trace_length);
}

// The causality block and the GAN must never share training traces.
std::pair<data::TraceSet, data::TraceSet> split_pipeline(const config::PipelineConfig& cfg,
                                                         const data::TraceSet& all) {
    return data::split_disjoint(all, cfg.data.causality_fraction, cfg.seed);
}

motif::MotifSet load_motifs_artifact(const config::PipelineConfig& cfg) {
    const auto csv = motif_csv_path(cfg);
    if (!fs::exists(csv)) {
        throw IoError("motif artifact missing (" + csv + "); run `forge motifs` first");
    }
    return motif::load_motif_set(csv, motif_sidecar_path(cfg));
}

causality::CausalityMatrix load_causality_artifact(const config::PipelineConfig& cfg) {
    const auto csv = causality_csv_path(cfg);
    if (!fs::exists(csv)) {
        throw IoError("causality artifact missing (" + csv +
                      "); run `forge train-causality` first");
    }
    return causality::load_causality(csv);
}

// Index-parallel loop, capped by FORGE_THREADS.  Results must be written to
// per-index slots by fn.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const unsigned budget = std::min<unsigned>(config::thread_budget(),
                                               static_cast<unsigned>(count));
    if (budget <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(budget);
    for (unsigned w = 0; w < budget; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += budget) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

void write_json(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << doc.dump(2) << "\n";
}

json clarke_to_json(const eval::ClarkeSummary& summary) {
    return json{{"A", summary.fraction[0]},
                {"B", summary.fraction[1]},
                {"C", summary.fraction[2]},
                {"D", summary.fraction[3]},
                {"E", summary.fraction[4]}};
}

}  // namespace

std::string motif_csv_path(const config::PipelineConfig& cfg) { return join(cfg, "motifs.csv"); }
std::string motif_sidecar_path(const config::PipelineConfig& cfg) {
    return join(cfg, "motifs.json");
}
std::string causality_csv_path(const config::PipelineConfig& cfg) {
    return join(cfg, "causality.csv");
}
std::string causality_sidecar_path(const config::PipelineConfig& cfg) {
    return join(cfg, "causality.json");
}
std::string causality_budget_path(const config::PipelineConfig& cfg) {
    return join(cfg, "causality_budget.json");
}
std::string checkpoint_path(const config::PipelineConfig& cfg) {
    return join(cfg, "gan_checkpoint.json");
}
std::string loss_log_path(const config::PipelineConfig& cfg) { return join(cfg, "gan_losses.csv"); }
std::string gan_budget_path(const config::PipelineConfig& cfg) {
    return join(cfg, "gan_budget.json");
}
std::string synthetic_path(const config::PipelineConfig& cfg) {
    if (!cfg.eval.synthetic_path.empty()) return cfg.eval.synthetic_path;
    return join(cfg, "synthetic.csv");
}
std::string evaluation_path(const config::PipelineConfig& cfg) {
    return join(cfg, "evaluation.json");
}

void run_motifs(const config::PipelineConfig& cfg) {
    ensure_out_dir(cfg);
    const auto all = load_dataset(cfg);
    const auto [causality_side, gan_side] = split_pipeline(cfg, all);
    (void)gan_side;
    const auto ms = motif::build_motif_set(causality_side, cfg.motif.tau, cfg.motif.sigma,
                                           cfg.motif.max_motifs);
    motif::save_motif_set(motif_csv_path(cfg), motif_sidecar_path(cfg), ms, config_hash(cfg));
}

void run_train_causality(const config::PipelineConfig& cfg) {
    ensure_out_dir(cfg);
    const auto all = load_dataset(cfg);
    const auto [causality_side, gan_side] = split_pipeline(cfg, all);
    (void)gan_side;
    const auto ms = load_motifs_artifact(cfg);

    const auto partitions = privacy::partition(causality_side, cfg.privacy.pate.n_partitions);
    std::vector<causality::CausalityMatrix> teachers(partitions.size());
    parallel_for(partitions.size(), [&](std::size_t i) {
        causality::CausalityTrainConfig tc = cfg.causality;
        tc.seed = mix_seed(cfg.seed, static_cast<uint64_t>(i));
        teachers[i] = causality::partition_causality(partitions[i], ms, tc);
    });

    // A single partition with an unlimited budget has nothing to aggregate;
    // its matrix passes through unquantized.
    const auto aggregated =
        (teachers.size() == 1 && cfg.privacy.budget.unlimited())
            ? teachers.front()
            : privacy::pate_aggregate(teachers, cfg.privacy.budget, cfg.privacy.pate, cfg.seed);
    save_causality(causality_csv_path(cfg), causality_sidecar_path(cfg), aggregated,
                   cfg.motif.tau, cfg.motif.sigma, config_hash(cfg));

    const auto m = static_cast<double>(ms.size());
    const json params{{"partitions", cfg.privacy.pate.n_partitions},
                      {"bins", cfg.privacy.pate.bins},
                      {"entries", m * m},
                      {"epsilon_per_entry", cfg.privacy.budget.unlimited()
                                                ? json("inf")
                                                : json(cfg.privacy.budget.epsilon / (m * m))}};
    privacy::write_budget_report(causality_budget_path(cfg), cfg.privacy.budget.epsilon,
                                 cfg.privacy.budget.delta, "pate-laplace-histogram",
                                 params.dump());
}

void run_train_gan(const config::PipelineConfig& cfg) {
    ensure_out_dir(cfg);
    const auto all = load_dataset(cfg);
    const auto [causality_side, gan_side] = split_pipeline(cfg, all);
    (void)causality_side;
    const auto ms = load_motifs_artifact(cfg);
    const auto m_real = load_causality_artifact(cfg);

    gan::GanConfig gcfg = cfg.gan;
    // An unlimited budget disables gradient sanitization entirely.
    if (!cfg.privacy.budget.unlimited() && cfg.privacy.dpsgd_noise_multiplier > 0.0) {
        privacy::DpSgdConfig dp;
        dp.clip_norm = cfg.privacy.dpsgd_clip_norm;
        dp.noise_multiplier = cfg.privacy.dpsgd_noise_multiplier;
        dp.sample_rate = std::min(1.0, static_cast<double>(cfg.gan.batch) /
                                           static_cast<double>(gan_side.size()));
        const auto batches_per_epoch =
            (gan_side.size() + cfg.gan.batch - 1) / std::max<std::size_t>(1, cfg.gan.batch);
        dp.steps = cfg.gan.epochs * static_cast<long>(batches_per_epoch);
        gcfg.privacy = dp;
    }

    gan::GanState state = gan::init_gan(gcfg, static_cast<long>(cfg.data.trace_length));
    const std::string log = loss_log_path(cfg);
    for (long epoch = 0; epoch < gcfg.epochs; ++epoch) {
        const gan::LossReport report = gan::train_epoch(state, gan_side, m_real, ms, gcfg);
        gan::append_loss_log(log, epoch, report, epoch == 0);
    }
    gan::save_checkpoint(checkpoint_path(cfg), state, config_hash(cfg));

    double reported_eps = std::numeric_limits<double>::infinity();
    json params{{"mechanism", "dp-sgd"}, {"enabled", gcfg.privacy.has_value()}};
    if (gcfg.privacy.has_value()) {
        reported_eps = privacy::epsilon_of(*gcfg.privacy, cfg.privacy.budget.delta);
        params["clip_norm"] = gcfg.privacy->clip_norm;
        params["noise_multiplier"] = gcfg.privacy->noise_multiplier;
        params["sample_rate"] = gcfg.privacy->sample_rate;
        params["steps"] = gcfg.privacy->steps;
    }
    privacy::write_budget_report(gan_budget_path(cfg), reported_eps, cfg.privacy.budget.delta,
                                 "dp-sgd", params.dump());
}

void run_generate(const config::PipelineConfig& cfg) {
    ensure_out_dir(cfg);
    const auto path = checkpoint_path(cfg);
    if (!fs::exists(path)) {
        throw IoError("checkpoint missing (" + path + "); run `forge train-gan` first");
    }
    const gan::GanState state = gan::load_checkpoint(path);
    const auto synth = gan::generate(state, cfg.gan, cfg.generate_count, cfg.seed);
    data::write_traces(synthetic_path(cfg), synth);
}

void run_evaluate(const config::PipelineConfig& cfg) {
    ensure_out_dir(cfg);
    const auto real = load_dataset(cfg);
    const auto synth = data::load_traces(synthetic_path(cfg), cfg.data.trace_length);
    if (synth.empty()) throw ValidationError("synthetic trace set is empty");

    const auto glycemic = eval::glycemic_metrics(synth, &real);
    const auto breadth = eval::motif_coverage(real, synth, cfg.motif.tau, cfg.motif.sigma);
    const auto forecast = eval::tstr(synth, real, cfg.eval.tstr);

    // Plot-ready CSV artifacts.
    std::vector<double> edges;
    for (double e = 0.0; e <= cfg.eval.variance_max + 1e-9; e += cfg.eval.variance_bin_width) {
        edges.push_back(e);
    }
    const auto real_hist = eval::variance_histogram(real, edges);
    const auto synth_hist = eval::variance_histogram(synth, edges);
    {
        std::ofstream out(join(cfg, "variance_hist.csv"));
        if (!out) throw IoError("cannot write variance_hist.csv");
        out << "bin_lo,bin_hi,real,synthetic\n";
        for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
            out << edges[b] << ',' << edges[b + 1] << ',' << real_hist[b] << ','
                << synth_hist[b] << "\n";
        }
    }
    {
        const Eigen::MatrixXd real_proj = eval::pca2(real);
        const Eigen::MatrixXd synth_proj = eval::pca2(synth);
        std::ofstream out(join(cfg, "pca.csv"));
        if (!out) throw IoError("cannot write pca.csv");
        out << "set,pc1,pc2\n";
        for (long i = 0; i < real_proj.rows(); ++i) {
            out << "real," << real_proj(i, 0) << ',' << real_proj(i, 1) << "\n";
        }
        for (long i = 0; i < synth_proj.rows(); ++i) {
            out << "synthetic," << synth_proj(i, 0) << ',' << synth_proj(i, 1) << "\n";
        }
    }
    {
        std::ofstream out(join(cfg, "clarke_zones.csv"));
        if (!out) throw IoError("cannot write clarke_zones.csv");
        out << "zone,fraction\n";
        const char* zones = "ABCDE";
        for (int z = 0; z < 5; ++z) {
            out << zones[z] << ',' << forecast.clarke.fraction[static_cast<std::size_t>(z)]
                << "\n";
        }
    }

    json report{
        {"config_hash", config_hash(cfg)},
        {"glycemic",
         {{"VAR", glycemic.variance},
          {"TIR", glycemic.tir},
          {"Hypo", glycemic.hypo},
          {"Hyper", glycemic.hyper},
          {"GVI", glycemic.gvi},
          {"PGS", glycemic.pgs},
          {"p_values",
           {{"VAR", glycemic.p->variance},
            {"TIR", glycemic.p->tir},
            {"Hypo", glycemic.p->hypo},
            {"Hyper", glycemic.p->hyper},
            {"GVI", glycemic.p->gvi},
            {"PGS", glycemic.p->pgs}}}}},
        {"breadth",
         {{"pct_TM", breadth.pct_tm},
          {"pct_FM", breadth.pct_fm},
          {"coverage", breadth.coverage},
          {"mse", breadth.mse},
          {"real_motifs", breadth.real_motifs},
          {"synthetic_motifs", breadth.synth_motifs}}},
        {"tstr",
         {{"rmse_mean", forecast.rmse_mean},
          {"rmse_std", forecast.rmse_std},
          {"clarke", clarke_to_json(forecast.clarke)}}}};
    write_json(evaluation_path(cfg), report);
}

}  // namespace forge::cli
