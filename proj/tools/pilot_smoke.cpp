// Pilot sweep behind the smoke-training thresholds: trains the model on the
// benchmark corpus for a configurable number of epochs and prints the loss
// trajectory plus the breadth numbers of the generated output.  Used to pick
// the shipped smoke configuration and to document the true-motif threshold.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <exception>

#include "forge/causality.hpp"
#include "forge/data.hpp"
#include "forge/eval.hpp"
#include "forge/gan.hpp"
#include "forge/motif.hpp"
#include "forge/privacy.hpp"
#include "forge/rng.hpp"
#include "forge/toy.hpp"

int main(int argc, char** argv) {
    CLI::App app{"pilot_smoke: smoke-training threshold sweep"};
    uint64_t corpus_seed = 2024;
    uint64_t train_seed = 1;
    long epochs = 200;
    int embed_dim = 4;
    int hidden = 12;
    int hidden_g = 0;
    int hidden_d = 0;
    int hidden_r = 0;
    int noise_dim = 0;
    std::size_t batch = 64;
    double lr = 0.01;
    double lr_ae = 0.0;
    double lr_g = 0.0;
    double lr_d = 0.0;
    int spsa_probes = 2;
    double spsa_step = 0.05;
    bool g_sgd = false;
    bool anchored = false;
    int report_every = 20;
    int est_inner = 2;
    std::size_t generate_count = 200;
    app.add_option("--corpus-seed", corpus_seed);
    app.add_option("--seed", train_seed);
    app.add_option("--epochs", epochs);
    app.add_option("--embed-dim", embed_dim);
    app.add_option("--hidden", hidden);
    app.add_option("--hidden-g", hidden_g);
    app.add_option("--hidden-d", hidden_d);
    app.add_option("--hidden-r", hidden_r);
    app.add_option("--noise-dim", noise_dim);
    app.add_option("--batch", batch);
    app.add_option("--lr", lr);
    app.add_option("--lr-ae", lr_ae);
    app.add_option("--lr-g", lr_g);
    app.add_option("--lr-d", lr_d);
    app.add_option("--spsa-probes", spsa_probes);
    app.add_option("--spsa-step", spsa_step);
    app.add_flag("--g-sgd", g_sgd);
    app.add_flag("--anchored", anchored);
    app.add_option("--report-every", report_every);
    app.add_option("--est-inner", est_inner);
    app.add_option("--generate", generate_count);
    CLI11_PARSE(app, argc, argv);

    try {
        using namespace forge;
        toy::ToyConfig toy_cfg;
        toy_cfg.seed = corpus_seed;
        const auto corpus = toy::make_corpus(toy_cfg);
        const auto [causality_side, gan_side] = data::split_disjoint(corpus, 0.5, train_seed);

        const auto ms = motif::build_motif_set(causality_side, toy_cfg.tau, toy::kSigma, 64);
        std::printf("motifs: %zu\n", ms.size());

        causality::CausalityTrainConfig ccfg;
        ccfg.hidden = 8;
        ccfg.epochs = 150;
        ccfg.inner_steps = 2;
        ccfg.seed = train_seed;
        const auto parts = privacy::partition(causality_side, 2);
        std::vector<causality::CausalityMatrix> teachers;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            auto tc = ccfg;
            tc.seed = mix_seed(train_seed, i);
            teachers.push_back(causality::partition_causality(parts[i], ms, tc));
        }
        privacy::PrivacyBudget unlimited;
        privacy::PateConfig pate;
        const auto m_real = privacy::pate_aggregate(teachers, unlimited, pate, train_seed);

        gan::GanConfig gcfg;
        gcfg.embed_dim = embed_dim;
        gcfg.hidden_embedder = hidden;
        gcfg.hidden_recovery = hidden_r > 0 ? hidden_r : hidden;
        gcfg.hidden_generator = hidden_g > 0 ? hidden_g : hidden;
        gcfg.hidden_discriminator = hidden_d > 0 ? hidden_d : hidden;
        gcfg.noise_dim = noise_dim;
        gcfg.batch = batch;
        gcfg.epochs = epochs;
        gcfg.lr_autoencoder = lr_ae > 0 ? lr_ae : lr;
        gcfg.lr_generator = lr_g > 0 ? lr_g : lr;
        gcfg.lr_discriminator = lr_d > 0 ? lr_d : lr;
        gcfg.optimizer = gan::Optimizer::Adam;
        if (g_sgd) gcfg.optimizer_generator = gan::Optimizer::Sgd;
        gcfg.anchored_noise = anchored;
        gcfg.spsa.probes = spsa_probes;
        gcfg.spsa.step = spsa_step;
        gcfg.estimator.hidden = 6;
        gcfg.estimator.inner_steps = est_inner;
        gcfg.estimator.seed = train_seed;
        gcfg.seed = train_seed;

        gan::GanState state = gan::init_gan(gcfg, static_cast<long>(toy_cfg.T));
        double first_l_r = 0.0;
        for (long epoch = 0; epoch < epochs; ++epoch) {
            const auto report = gan::train_epoch(state, gan_side, m_real, ms, gcfg);
            if (epoch == 0) first_l_r = report.l_r;
            if (epoch % report_every == 0 || epoch == epochs - 1) {
                std::printf("epoch %4ld  L_R %.5f  L_S %.5f  L_M %.5f  L_D %.5f  L_Ar %.4f  L_Af %.4f\n",
                            epoch, report.l_r, report.l_s, report.l_m, report.l_d, report.l_ar,
                            report.l_af);
            }
        }
        std::printf("L_R first %.6f\n", first_l_r);

        const auto synth = gan::generate(state, gcfg, generate_count, train_seed);
        double lo = 1e9, hi = -1e9;
        for (const auto& t : synth.traces) {
            for (double v : t.values) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        std::printf("generated range [%.2f, %.2f]\n", lo, hi);

        const auto breadth = eval::motif_coverage(corpus, synth, toy_cfg.tau, toy::kSigma);
        std::printf("breadth: pct_TM %.3f pct_FM %.3f coverage %.3f mse %.5f (synth motifs %zu)\n",
                    breadth.pct_tm, breadth.pct_fm, breadth.coverage, breadth.mse,
                    breadth.synth_motifs);

        // Distance diagnostics: per synthetic chunk, the L-infinity gap to the
        // nearest template; and the autoencoder round-trip error on real data.
        std::vector<double> gaps;
        for (const auto& trace : synth.traces) {
            for (const auto& window : motif::chunk(trace, toy_cfg.tau)) {
                double best = 1e18;
                for (const auto& tpl : toy::templates()) {
                    double linf = 0;
                    for (std::size_t k = 0; k < window.size(); ++k) {
                        linf = std::max(linf, std::fabs(window[k] - tpl[k]));
                    }
                    best = std::min(best, linf);
                }
                gaps.push_back(best);
            }
        }
        std::vector<double> spreads;
        for (const auto& trace : synth.traces) {
            for (const auto& window : motif::chunk(trace, toy_cfg.tau)) {
                const auto [lo_it, hi_it] = std::minmax_element(window.begin(), window.end());
                spreads.push_back(*hi_it - *lo_it);
            }
        }
        std::sort(spreads.begin(), spreads.end());
        std::printf("intra-chunk spread mg/dL: p25 %.2f median %.2f p75 %.2f\n",
                    spreads[spreads.size() / 4], spreads[spreads.size() / 2],
                    spreads[3 * spreads.size() / 4]);
        std::sort(gaps.begin(), gaps.end());
        std::printf("chunk-to-template Linf: p25 %.2f median %.2f p75 %.2f (mg/dL), within-2: %.3f\n",
                    gaps[gaps.size() / 4], gaps[gaps.size() / 2], gaps[3 * gaps.size() / 4],
                    static_cast<double>(std::count_if(gaps.begin(), gaps.end(),
                                                      [](double g) { return g <= 2.0; })) /
                        static_cast<double>(gaps.size()));

        gan::Batch real_batch;
        for (std::size_t i = 0; i < std::min<std::size_t>(64, gan_side.size()); ++i) {
            const auto norm = data::normalize(gan_side.traces[i]);
            Eigen::MatrixXd x(static_cast<long>(norm.values.size()), 1);
            for (long t = 0; t < x.rows(); ++t) x(t, 0) = norm.values[static_cast<std::size_t>(t)];
            real_batch.push_back(std::move(x));
        }
        const auto recon = gan::recover(state.recovery, gan::embed(state.embedder, real_batch));
        double worst = 0, total = 0;
        long cells = 0;
        for (std::size_t i = 0; i < real_batch.size(); ++i) {
            const Eigen::MatrixXd diff = (recon[i] - real_batch[i]) * 360.0;
            worst = std::max(worst, diff.cwiseAbs().maxCoeff());
            total += diff.cwiseAbs().sum();
            cells += diff.size();
        }
        std::printf("reconstruction |err| mg/dL: mean %.2f worst %.2f\n",
                    total / static_cast<double>(cells), worst);

        for (int k = 0; k < 3; ++k) {
            std::printf("sample %d:", k);
            for (std::size_t t = 0; t < synth.traces[static_cast<std::size_t>(k)].values.size();
                 t += 4) {
                std::printf(" %.0f", synth.traces[static_cast<std::size_t>(k)].values[t]);
            }
            std::printf("\n");
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
