#include "forge/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "forge/error.hpp"
#include "forge/rng.hpp"

namespace forge::gan {

namespace {

constexpr double kBceClamp = 1e-7;

// Stream tags for derived generators.
constexpr uint64_t kTagShuffle = 0x73687566ULL;
constexpr uint64_t kTagNoiseAe = 0x7a6165ULL;
constexpr uint64_t kTagNoiseG = 0x7a67ULL;
constexpr uint64_t kTagNoiseD = 0x7a64ULL;
constexpr uint64_t kTagRefresh = 0x6d78ULL;
constexpr uint64_t kTagSpsa = 0x73707361ULL;
constexpr uint64_t kTagDp = 0x6470ULL;
constexpr uint64_t kTagGenerate = 0x67656eULL;

double clamp_prob(double p) { return std::clamp(p, kBceClamp, 1.0 - kBceClamp); }

Batch draw_noise(Rng& rng, std::size_t count, long steps, int dim) {
    Batch z;
    z.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Eigen::MatrixXd m(steps, dim);
        for (long t = 0; t < steps; ++t) {
            for (int c = 0; c < dim; ++c) m(t, c) = rng.normal();
        }
        z.push_back(std::move(m));
    }
    return z;
}

// One fixed noise sequence per dataset item, identical across epochs.
Eigen::MatrixXd anchored_noise_for(uint64_t seed, std::size_t item, long steps, int dim) {
    Rng rng(mix_seed(mix_seed(seed, 0x7a666978ULL), item));  // stream tag: "zfix"
    Eigen::MatrixXd m(steps, dim);
    for (long t = 0; t < steps; ++t) {
        for (int c = 0; c < dim; ++c) m(t, c) = rng.normal();
    }
    return m;
}

Batch forward_batch(const nn::RecurrentNet& net, const Batch& inputs) {
    Batch out;
    out.reserve(inputs.size());
    for (const auto& x : inputs) out.push_back(nn::net_forward(net, x).outputs);
    return out;
}

// Per-coordinate batch moments; coordinates are (step, channel) cells.
void batch_moments(const Batch& batch, Eigen::MatrixXd& mean, Eigen::MatrixXd& var) {
    const auto B = static_cast<double>(batch.size());
    mean = Eigen::MatrixXd::Zero(batch.front().rows(), batch.front().cols());
    for (const auto& item : batch) mean += item;
    mean /= B;
    var = Eigen::MatrixXd::Zero(mean.rows(), mean.cols());
    for (const auto& item : batch) {
        const Eigen::MatrixXd centered = item - mean;
        var += centered.cwiseProduct(centered);
    }
    var /= B;
}

void check_same_shape(const Batch& a, const Batch& b, const char* what) {
    if (a.size() != b.size()) throw ValidationError(std::string(what) + ": batch size mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) {
            throw ValidationError(std::string(what) + ": item shape mismatch");
        }
    }
}

std::vector<double> to_mgdl(const Eigen::MatrixXd& normalized) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(normalized.rows()));
    for (long t = 0; t < normalized.rows(); ++t) {
        values.push_back(data::denormalize_value(normalized(t, 0)));
    }
    return values;
}

}  // namespace

GanState init_gan(const GanConfig& cfg, long trace_length) {
    if (trace_length <= 0) throw ValidationError("trace length must be positive");
    if (cfg.embed_dim <= 0 || cfg.embed_dim >= trace_length) {
        throw ValidationError("embed dim must lie in (0, trace length)");
    }
    GanState state;
    state.trace_length = trace_length;
    state.seed = cfg.seed;
    state.embedder = nn::make_net(1, cfg.hidden_embedder, cfg.embed_dim, nn::Squash::None,
                                  mix_seed(cfg.seed, 1));
    state.recovery = nn::make_net(cfg.embed_dim, cfg.hidden_recovery, 1, nn::Squash::Sigmoid,
                                  mix_seed(cfg.seed, 2));
    state.generator = nn::make_net(cfg.effective_noise_dim(), cfg.hidden_generator, cfg.embed_dim,
                                   nn::Squash::None, mix_seed(cfg.seed, 3));
    state.discriminator = nn::make_net(cfg.embed_dim, cfg.hidden_discriminator, 1,
                                       nn::Squash::Sigmoid, mix_seed(cfg.seed, 4));
    if (cfg.optimizer == Optimizer::Adam) {
        state.adam_embedder.emplace();
        state.adam_recovery.emplace();
        state.adam_discriminator.emplace();
    }
    if (cfg.optimizer_generator.value_or(cfg.optimizer) == Optimizer::Adam) {
        state.adam_generator.emplace();
    }
    return state;
}

Batch embed(const nn::RecurrentNet& embedder, const Batch& x) { return forward_batch(embedder, x); }

Batch recover(const nn::RecurrentNet& recovery, const Batch& x_e) {
    return forward_batch(recovery, x_e);
}

Batch discriminate(const nn::RecurrentNet& discriminator, const Batch& x_e) {
    return forward_batch(discriminator, x_e);
}

double loss_reconstruction(const Batch& x, const Batch& x_tilde) {
    check_same_shape(x, x_tilde, "reconstruction loss");
    double sum = 0.0;
    long cells = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum += (x[i] - x_tilde[i]).squaredNorm();
        cells += x[i].size();
    }
    return sum / static_cast<double>(cells);
}

double loss_stepwise(const Batch& x_e, const Batch& x_hat_e) {
    check_same_shape(x_e, x_hat_e, "stepwise loss");
    double sum = 0.0;
    long cells = 0;
    for (std::size_t i = 0; i < x_e.size(); ++i) {
        sum += (x_e[i] - x_hat_e[i]).squaredNorm();
        cells += x_e[i].size();
    }
    return sum / static_cast<double>(cells);
}

double loss_distributional(const Batch& x_e, const Batch& x_hat_e) {
    check_same_shape(x_e, x_hat_e, "distributional loss");
    Eigen::MatrixXd mean_real, var_real, mean_synth, var_synth;
    batch_moments(x_e, mean_real, var_real);
    batch_moments(x_hat_e, mean_synth, var_synth);
    return (mean_real - mean_synth).squaredNorm() + (var_real - var_synth).squaredNorm();
}

double loss_motif(const causality::CausalityMatrix& m_real,
                  const causality::CausalityMatrix& m_synth) {
    if (m_real.entries.rows() != m_synth.entries.rows() ||
        m_real.entries.cols() != m_synth.entries.cols()) {
        throw ValidationError("causality matrix dimension mismatch");
    }
    return (m_real.entries - m_synth.entries).squaredNorm() /
           static_cast<double>(m_real.entries.size());
}

double adversarial_loss(const Batch& probabilities, double label) {
    double sum = 0.0;
    long cells = 0;
    for (const auto& p : probabilities) {
        for (long t = 0; t < p.rows(); ++t) {
            const double q = clamp_prob(p(t, 0));
            sum += -(label * std::log(q) + (1.0 - label) * std::log(1.0 - q));
        }
        cells += p.rows();
    }
    return sum / static_cast<double>(cells);
}

AePhaseResult ae_phase(const nn::RecurrentNet& embedder, const nn::RecurrentNet& recovery,
                       const Batch& x, const Batch& x_hat_e, double alpha) {
    if (x.empty()) throw ValidationError("autoencoder phase needs a batch");
    AePhaseResult result;
    const auto B = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const nn::NetTrace trace_e = nn::net_forward(embedder, x[i]);
        const nn::NetTrace trace_r = nn::net_forward(recovery, trace_e.outputs);
        const auto cells_r = static_cast<double>(x[i].size());
        const auto cells_e = static_cast<double>(trace_e.outputs.size());

        const Eigen::MatrixXd recon_diff = trace_r.outputs - x[i];
        result.l_r += recon_diff.squaredNorm() / (B * cells_r);
        const Eigen::MatrixXd d_recon = 2.0 * recon_diff / (B * cells_r);

        Eigen::MatrixXd d_xe_from_recovery;
        const nn::NetGrads rec_grads =
            nn::net_backward(recovery, trace_r, d_recon, &d_xe_from_recovery);

        const Eigen::MatrixXd step_diff = trace_e.outputs - x_hat_e[i];
        result.l_s += step_diff.squaredNorm() / (B * cells_e);
        const Eigen::MatrixXd d_xe =
            d_xe_from_recovery + alpha * 2.0 * step_diff / (B * cells_e);

        const nn::NetGrads emb_grads = nn::net_backward(embedder, trace_e, d_xe);
        result.embedder_grads.push_back(nn::flatten_grads(emb_grads));
        result.recovery_grads.push_back(nn::flatten_grads(rec_grads));
    }
    result.loss = result.l_r + alpha * result.l_s;
    return result;
}

GeneratorPhaseResult generator_phase(const nn::RecurrentNet& generator,
                                     const nn::RecurrentNet& discriminator,
                                     const nn::RecurrentNet& recovery, const Batch& z,
                                     const Batch& x_e, double eta, const Batch* d_lm_dxhat) {
    if (z.empty()) throw ValidationError("generator phase needs a batch");
    GeneratorPhaseResult result;
    const auto B = static_cast<double>(z.size());

    std::vector<nn::NetTrace> gen_traces, rec_traces;
    gen_traces.reserve(z.size());
    rec_traces.reserve(z.size());
    for (const auto& zi : z) {
        gen_traces.push_back(nn::net_forward(generator, zi));
        result.x_hat_e.push_back(gen_traces.back().outputs);
        rec_traces.push_back(nn::net_forward(recovery, result.x_hat_e.back()));
        result.x_hat.push_back(rec_traces.back().outputs);
    }

    Eigen::MatrixXd mean_real, var_real, mean_synth, var_synth;
    batch_moments(x_e, mean_real, var_real);
    batch_moments(result.x_hat_e, mean_synth, var_synth);
    result.l_d = (mean_real - mean_synth).squaredNorm() + (var_real - var_synth).squaredNorm();

    for (std::size_t i = 0; i < z.size(); ++i) {
        const Eigen::MatrixXd& x_hat_e_i = result.x_hat_e[i];
        const auto cells_e = static_cast<double>(x_hat_e_i.size());
        const long steps = x_hat_e_i.rows();

        // Adversarial term: the phase minimizes (1 - L_Af), so the upstream
        // gradient through the discriminator is the negated BCE gradient.
        const nn::NetTrace trace_d = nn::net_forward(discriminator, x_hat_e_i);
        Eigen::MatrixXd d_prob(steps, 1);
        for (long t = 0; t < steps; ++t) {
            const double p = clamp_prob(trace_d.outputs(t, 0));
            result.l_af += -std::log(p) / (B * static_cast<double>(steps));
            d_prob(t, 0) = 1.0 / (p * B * static_cast<double>(steps));
        }
        Eigen::MatrixXd d_xhat_e;
        nn::net_backward(discriminator, trace_d, d_prob, &d_xhat_e);

        const Eigen::MatrixXd step_diff = x_hat_e_i - x_e[i];
        result.l_s += step_diff.squaredNorm() / (B * cells_e);
        d_xhat_e += eta * 2.0 * step_diff / (B * cells_e);

        d_xhat_e += eta * (2.0 / B) *
                    ((mean_synth - mean_real) +
                     2.0 * (var_synth - var_real).cwiseProduct(x_hat_e_i - mean_synth));

        if (d_lm_dxhat) {
            Eigen::MatrixXd d_from_recovery;
            nn::net_backward(recovery, rec_traces[i], (*d_lm_dxhat)[i], &d_from_recovery);
            d_xhat_e += d_from_recovery;
        }

        const nn::NetGrads gen_grads = nn::net_backward(generator, gen_traces[i], d_xhat_e);
        result.generator_grads.push_back(nn::flatten_grads(gen_grads));
    }
    result.loss = (1.0 - result.l_af) + eta * result.l_s + eta * result.l_d;
    return result;
}

DiscriminatorPhaseResult discriminator_phase(const nn::RecurrentNet& discriminator,
                                             const Batch& x_e, const Batch& x_hat_e) {
    if (x_e.empty() || x_e.size() != x_hat_e.size()) {
        throw ValidationError("discriminator phase needs matched real/fake batches");
    }
    DiscriminatorPhaseResult result;
    const auto B = static_cast<double>(x_e.size());
    for (std::size_t i = 0; i < x_e.size(); ++i) {
        // Real guesses score against a zero label, fake against ones.
        const nn::NetTrace trace_real = nn::net_forward(discriminator, x_e[i]);
        const long steps_r = trace_real.outputs.rows();
        Eigen::MatrixXd d_prob_real(steps_r, 1);
        for (long t = 0; t < steps_r; ++t) {
            const double p = clamp_prob(trace_real.outputs(t, 0));
            result.l_ar += -std::log(1.0 - p) / (B * static_cast<double>(steps_r));
            d_prob_real(t, 0) = 1.0 / ((1.0 - p) * B * static_cast<double>(steps_r));
        }
        nn::NetGrads grads = nn::net_backward(discriminator, trace_real, d_prob_real);

        const nn::NetTrace trace_fake = nn::net_forward(discriminator, x_hat_e[i]);
        const long steps_f = trace_fake.outputs.rows();
        Eigen::MatrixXd d_prob_fake(steps_f, 1);
        for (long t = 0; t < steps_f; ++t) {
            const double p = clamp_prob(trace_fake.outputs(t, 0));
            result.l_af += -std::log(p) / (B * static_cast<double>(steps_f));
            d_prob_fake(t, 0) = -1.0 / (p * B * static_cast<double>(steps_f));
        }
        const nn::NetGrads grads_fake = nn::net_backward(discriminator, trace_fake, d_prob_fake);
        nn::accumulate(grads, grads_fake);
        result.discriminator_grads.push_back(nn::flatten_grads(grads));
    }
    result.loss = result.l_af + result.l_ar;
    return result;
}

Batch spsa_gradient(const std::function<double(const Batch&)>& f, const Batch& x, double step,
                    int probes, uint64_t seed) {
    if (step <= 0.0) throw ValidationError("spsa perturbation size must be positive");
    if (probes <= 0) throw ValidationError("spsa needs at least one probe");
    Rng rng(mix_seed(seed, kTagSpsa));

    Batch grad;
    grad.reserve(x.size());
    for (const auto& item : x) grad.push_back(Eigen::MatrixXd::Zero(item.rows(), item.cols()));

    Batch plus = x, minus = x, delta = x;
    for (int probe = 0; probe < probes; ++probe) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (long t = 0; t < x[i].rows(); ++t) {
                for (long c = 0; c < x[i].cols(); ++c) {
                    const double d = static_cast<double>(rng.rademacher());
                    delta[i](t, c) = d;
                    plus[i](t, c) = x[i](t, c) + step * d;
                    minus[i](t, c) = x[i](t, c) - step * d;
                }
            }
        }
        const double scale = (f(plus) - f(minus)) / (2.0 * step);
        for (std::size_t i = 0; i < x.size(); ++i) {
            grad[i] += scale * delta[i];  // delta entries are +-1, so 1/d == d
        }
    }
    for (auto& g : grad) g /= static_cast<double>(probes);
    return grad;
}

Batch spsa_gradient_lm(const Batch& x_hat, const causality::CausalityMatrix& m_real,
                       const motif::MotifSet& ms, const causality::CausalityTrainConfig& cfg,
                       const causality::BatchCausalityState* warm, double step, int probes,
                       uint64_t seed) {
    const auto objective = [&](const Batch& batch) {
        std::vector<std::vector<double>> values;
        values.reserve(batch.size());
        for (const auto& item : batch) values.push_back(to_mgdl(item));
        const auto est = causality::estimate_batch_causality(values, ms, cfg, warm);
        return loss_motif(m_real, est.matrix);
    };
    return spsa_gradient(objective, x_hat, step, probes, seed);
}

namespace {

uint64_t dp_seed(uint64_t base, uint64_t epoch, uint64_t mb, uint64_t net) {
    return mix_seed(mix_seed(mix_seed(mix_seed(base, kTagDp), epoch), mb), net);
}

// Ordered mean without sanitization; bitwise identical to the DP path when
// the clip bound is infinite and the noise multiplier is zero.
Eigen::VectorXd plain_mean(const std::vector<Eigen::VectorXd>& per_example) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(per_example.front().size());
    for (const auto& g : per_example) sum += g;
    return sum / static_cast<double>(per_example.size());
}

void step_net(nn::RecurrentNet& net, std::optional<nn::AdamState>& adam,
              const std::vector<Eigen::VectorXd>& per_example, double lr, const GanConfig& cfg,
              uint64_t noise_seed, const char* phase) {
    Eigen::VectorXd grad;
    if (cfg.privacy.has_value()) {
        grad = privacy::clip_and_noise(per_example, *cfg.privacy, noise_seed);
    } else {
        grad = plain_mean(per_example);
    }
    if (!grad.allFinite()) {
        throw NumericError(std::string("non-finite gradient in ") + phase + " phase");
    }
    nn::apply_update(net, grad, lr, adam);
}

}  // namespace

LossReport train_epoch(GanState& state, const data::TraceSet& real,
                       const causality::CausalityMatrix& m_real, const motif::MotifSet& ms,
                       const GanConfig& cfg, const PhaseObserver& observer) {
    if (real.empty()) throw ValidationError("training needs traces");
    if (m_real.size() != ms.size()) {
        throw ValidationError("causality matrix size does not match motif set");
    }
    const long T = state.trace_length;
    Batch xs;
    xs.reserve(real.size());
    for (const auto& trace : real.traces) {
        if (static_cast<long>(trace.values.size()) != T) {
            throw ValidationError("trace length mismatch against state");
        }
        Eigen::MatrixXd x(T, 1);
        const auto norm = data::normalize(trace);
        for (long t = 0; t < T; ++t) x(t, 0) = norm.values[static_cast<std::size_t>(t)];
        xs.push_back(std::move(x));
    }

    const auto N = xs.size();
    const std::size_t batch_size = std::min<std::size_t>(cfg.batch, N);
    const int noise_dim = cfg.effective_noise_dim();
    const auto epoch_key = static_cast<uint64_t>(state.epoch);

    // Refresh the synthetic causality estimate at the configured cadence.
    if (!state.mx.valid || state.epoch % std::max<long>(1, cfg.refresh_every) == 0) {
        Rng noise_rng = Rng(mix_seed(state.seed, kTagRefresh)).fork({epoch_key});
        const Batch z = draw_noise(noise_rng, batch_size, T, noise_dim);
        const Batch x_hat_e = forward_batch(state.generator, z);
        const Batch x_hat = forward_batch(state.recovery, x_hat_e);
        std::vector<std::vector<double>> values;
        values.reserve(x_hat.size());
        for (const auto& item : x_hat) values.push_back(to_mgdl(item));
        state.mx = causality::estimate_batch_causality(values, ms, cfg.estimator,
                                                       state.mx.valid ? &state.mx : nullptr);
    }

    LossReport report;
    report.l_m = loss_motif(m_real, state.mx.matrix);

    std::vector<std::size_t> perm(N);
    for (std::size_t i = 0; i < N; ++i) perm[i] = i;
    Rng shuffle_rng = Rng(mix_seed(state.seed, kTagShuffle)).fork({epoch_key});
    shuffle_rng.shuffle(perm);

    const std::size_t num_batches = (N + batch_size - 1) / batch_size;
    for (std::size_t mb = 0; mb < num_batches; ++mb) {
        const std::size_t begin = mb * batch_size;
        const std::size_t end = std::min(begin + batch_size, N);
        Batch xs_mb;
        xs_mb.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) xs_mb.push_back(xs[perm[i]]);
        const std::size_t b = xs_mb.size();
        const auto mb_key = static_cast<uint64_t>(mb);

        Batch anchored;
        if (cfg.anchored_noise) {
            anchored.reserve(b);
            for (std::size_t i = begin; i < end; ++i) {
                anchored.push_back(anchored_noise_for(state.seed, perm[i], T, noise_dim));
            }
        }

        // Phase 1: autoencoder.
        {
            Rng z_rng = Rng(mix_seed(state.seed, kTagNoiseAe)).fork({epoch_key, mb_key});
            const Batch z = cfg.anchored_noise ? anchored : draw_noise(z_rng, b, T, noise_dim);
            const Batch x_hat_e = forward_batch(state.generator, z);
            const AePhaseResult ae =
                ae_phase(state.embedder, state.recovery, xs_mb, x_hat_e, cfg.alpha);
            if (!std::isfinite(ae.loss)) throw NumericError("autoencoder phase diverged");
            step_net(state.embedder, state.adam_embedder, ae.embedder_grads, cfg.lr_autoencoder,
                     cfg, dp_seed(state.seed, epoch_key, mb_key, 0),
                     "autoencoder");
            step_net(state.recovery, state.adam_recovery, ae.recovery_grads, cfg.lr_autoencoder,
                     cfg, dp_seed(state.seed, epoch_key, mb_key, 1),
                     "autoencoder");
            report.l_r += ae.l_r / static_cast<double>(num_batches);
            report.l_s += ae.l_s / static_cast<double>(num_batches);
            if (observer) observer(Phase::Autoencoder, state);
        }

        // Phase 2: generator.
        {
            Rng z_rng = Rng(mix_seed(state.seed, kTagNoiseG)).fork({epoch_key, mb_key});
            const Batch z = cfg.anchored_noise ? anchored : draw_noise(z_rng, b, T, noise_dim);
            const Batch x_e = embed(state.embedder, xs_mb);

            Batch d_lm;
            const Batch* d_lm_ptr = nullptr;
            if (cfg.spsa.probes > 0) {
                const Batch x_hat_e = forward_batch(state.generator, z);
                const Batch x_hat = forward_batch(state.recovery, x_hat_e);
                d_lm = spsa_gradient_lm(
                    x_hat, m_real, ms, cfg.estimator, state.mx.valid ? &state.mx : nullptr,
                    cfg.spsa.step, cfg.spsa.probes,
                    mix_seed(mix_seed(state.seed, kTagSpsa), epoch_key * 8191 + mb_key));
                d_lm_ptr = &d_lm;
            }

            const GeneratorPhaseResult gen = generator_phase(
                state.generator, state.discriminator, state.recovery, z, x_e, cfg.eta, d_lm_ptr);
            if (!std::isfinite(gen.loss)) throw NumericError("generator phase diverged");
            step_net(state.generator, state.adam_generator, gen.generator_grads, cfg.lr_generator,
                     cfg, dp_seed(state.seed, epoch_key, mb_key, 2),
                     "generator");
            report.l_d += gen.l_d / static_cast<double>(num_batches);
            if (observer) observer(Phase::Generator, state);
        }

        // Phase 3: discriminator.
        {
            Rng z_rng = Rng(mix_seed(state.seed, kTagNoiseD)).fork({epoch_key, mb_key});
            const Batch z = cfg.anchored_noise ? anchored : draw_noise(z_rng, b, T, noise_dim);
            const Batch x_hat_e = forward_batch(state.generator, z);
            const Batch x_e = embed(state.embedder, xs_mb);
            const DiscriminatorPhaseResult disc =
                discriminator_phase(state.discriminator, x_e, x_hat_e);
            if (!std::isfinite(disc.loss)) throw NumericError("discriminator phase diverged");
            step_net(state.discriminator, state.adam_discriminator, disc.discriminator_grads,
                     cfg.lr_discriminator, cfg,
                     dp_seed(state.seed, epoch_key, mb_key, 3),
                     "discriminator");
            report.l_ar += disc.l_ar / static_cast<double>(num_batches);
            report.l_af += disc.l_af / static_cast<double>(num_batches);
            if (observer) observer(Phase::Discriminator, state);
        }
    }

    for (const nn::RecurrentNet* net :
         {&state.embedder, &state.recovery, &state.generator, &state.discriminator}) {
        if (!nn::flatten_params(*net).allFinite()) {
            throw NumericError("non-finite parameters after epoch " + std::to_string(state.epoch));
        }
    }
    state.epoch += 1;
    return report;
}

data::TraceSet generate(const GanState& state, const GanConfig& cfg, std::size_t count,
                        uint64_t seed) {
    Rng rng(mix_seed(seed, kTagGenerate));
    const int noise_dim = cfg.effective_noise_dim();
    data::TraceSet out;
    out.traces.reserve(count);
    char id_buf[32];
    for (std::size_t k = 0; k < count; ++k) {
        const Batch z = draw_noise(rng, 1, state.trace_length, noise_dim);
        const Eigen::MatrixXd x_hat_e = nn::net_forward(state.generator, z.front()).outputs;
        const Eigen::MatrixXd x_hat = nn::net_forward(state.recovery, x_hat_e).outputs;
        if (!x_hat.allFinite()) throw NumericError("non-finite generated trace");
        data::GlucoseTrace trace;
        std::snprintf(id_buf, sizeof(id_buf), "synth-%06zu", k);
        trace.id = id_buf;
        trace.values = to_mgdl(x_hat);
        out.traces.push_back(std::move(trace));
    }
    return out;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (long i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
    const auto r = rows.size();
    const auto c = r == 0 ? 0 : rows.front().size();
    Eigen::MatrixXd m(static_cast<long>(r), static_cast<long>(c));
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            m(static_cast<long>(i), static_cast<long>(j)) = rows[i][j].get<double>();
        }
    }
    return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (long i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr) {
    Eigen::VectorXd v(static_cast<long>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<long>(i)] = arr[i].get<double>();
    return v;
}

nlohmann::json net_to_json(const nn::RecurrentNet& net) {
    return nlohmann::json{{"input", net.input()},
                          {"hidden", net.hidden()},
                          {"output", net.output()},
                          {"squash", net.squash == nn::Squash::Sigmoid ? "sigmoid" : "none"},
                          {"w_in", matrix_to_json(net.cell.w_in)},
                          {"w_rec", matrix_to_json(net.cell.w_rec)},
                          {"bias", vector_to_json(net.cell.bias)},
                          {"head_w", matrix_to_json(net.head.w)},
                          {"head_b", vector_to_json(net.head.b)}};
}

nn::RecurrentNet net_from_json(const nlohmann::json& j) {
    nn::RecurrentNet net;
    net.squash = j.at("squash").get<std::string>() == "sigmoid" ? nn::Squash::Sigmoid
                                                                : nn::Squash::None;
    net.cell.w_in = matrix_from_json(j.at("w_in"));
    net.cell.w_rec = matrix_from_json(j.at("w_rec"));
    net.cell.bias = vector_from_json(j.at("bias"));
    net.head.w = matrix_from_json(j.at("head_w"));
    net.head.b = vector_from_json(j.at("head_b"));
    return net;
}

nlohmann::json adam_to_json(const std::optional<nn::AdamState>& adam) {
    if (!adam.has_value()) return nullptr;
    return nlohmann::json{{"m", vector_to_json(adam->m)}, {"v", vector_to_json(adam->v)},
                          {"t", adam->t}};
}

std::optional<nn::AdamState> adam_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    nn::AdamState st;
    st.m = vector_from_json(j.at("m"));
    st.v = vector_from_json(j.at("v"));
    st.t = j.at("t").get<long>();
    return st;
}

}  // namespace

void save_checkpoint(const std::string& path, const GanState& state,
                     const std::string& config_hash) {
    nlohmann::json mx_nets = nlohmann::json::array();
    for (const auto& net : state.mx.nets) {
        mx_nets.push_back(
            nlohmann::json{{"target", net.target_motif}, {"net", net_to_json(net.net)}});
    }
    nlohmann::json doc{
        {"format", "forge-gan-checkpoint"},
        {"version", 1},
        {"config_hash", config_hash},
        {"epoch", state.epoch},
        {"trace_length", state.trace_length},
        {"seed", state.seed},
        {"networks",
         nlohmann::json{{"embedder", net_to_json(state.embedder)},
                        {"recovery", net_to_json(state.recovery)},
                        {"generator", net_to_json(state.generator)},
                        {"discriminator", net_to_json(state.discriminator)}}},
        {"adam",
         nlohmann::json{{"embedder", adam_to_json(state.adam_embedder)},
                        {"recovery", adam_to_json(state.adam_recovery)},
                        {"generator", adam_to_json(state.adam_generator)},
                        {"discriminator", adam_to_json(state.adam_discriminator)}}},
        {"mx", nlohmann::json{{"valid", state.mx.valid},
                              {"matrix", matrix_to_json(state.mx.matrix.entries)},
                              {"nets", std::move(mx_nets)}}}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << doc.dump(1) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

GanState load_checkpoint(const std::string& path, std::string* config_hash) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json doc;
    in >> doc;
    if (doc.at("format").get<std::string>() != "forge-gan-checkpoint") {
        throw ValidationError("not a checkpoint file: " + path);
    }
    if (config_hash) *config_hash = doc.at("config_hash").get<std::string>();

    GanState state;
    state.epoch = doc.at("epoch").get<long>();
    state.trace_length = doc.at("trace_length").get<long>();
    state.seed = doc.at("seed").get<uint64_t>();
    const auto& nets = doc.at("networks");
    state.embedder = net_from_json(nets.at("embedder"));
    state.recovery = net_from_json(nets.at("recovery"));
    state.generator = net_from_json(nets.at("generator"));
    state.discriminator = net_from_json(nets.at("discriminator"));
    const auto& adam = doc.at("adam");
    state.adam_embedder = adam_from_json(adam.at("embedder"));
    state.adam_recovery = adam_from_json(adam.at("recovery"));
    state.adam_generator = adam_from_json(adam.at("generator"));
    state.adam_discriminator = adam_from_json(adam.at("discriminator"));
    const auto& mx = doc.at("mx");
    state.mx.valid = mx.at("valid").get<bool>();
    state.mx.matrix.entries = matrix_from_json(mx.at("matrix"));
    for (const auto& net_json : mx.at("nets")) {
        causality::MotifNetwork net;
        net.target_motif = net_json.at("target").get<int>();
        net.net = net_from_json(net_json.at("net"));
        state.mx.nets.push_back(std::move(net));
    }
    return state;
}

void append_loss_log(const std::string& path, long epoch, const LossReport& report,
                     bool write_header) {
    std::ofstream out(path, write_header ? std::ios::trunc : std::ios::app);
    if (!out) throw IoError("cannot write " + path);
    if (write_header) out << "epoch,L_R,L_S,L_M,L_D,L_Ar,L_Af\n";
    char buf[64];
    out << epoch;
    for (double v : {report.l_r, report.l_s, report.l_m, report.l_d, report.l_ar, report.l_af}) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << ',' << buf;
    }
    out << "\n";
}

}  // namespace forge::gan
