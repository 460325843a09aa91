#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "forge/causality.hpp"
#include "forge/data.hpp"
#include "forge/motif.hpp"
#include "forge/nn.hpp"
#include "forge/privacy.hpp"

namespace forge::gan {

// A batch is one matrix per item, row per time step.
using Batch = std::vector<Eigen::MatrixXd>;

enum class Optimizer { Sgd, Adam };

struct SpsaConfig {
    int probes = 4;     // probe pairs averaged per gradient estimate
    double step = 0.05; // perturbation size in normalized trace units
};

struct GanConfig {
    int embed_dim = 8;
    int hidden_embedder = 16;
    int hidden_recovery = 16;
    int hidden_generator = 16;
    int hidden_discriminator = 16;
    int noise_dim = 0;  // 0 means embed_dim
    double alpha = 0.1;
    double eta = 10.0;
    std::size_t batch = 64;
    long epochs = 200;
    double lr_autoencoder = 0.01;
    double lr_generator = 0.01;
    double lr_discriminator = 0.01;
    Optimizer optimizer = Optimizer::Sgd;
    // Overrides the shared choice for the generator when set; a
    // gradient-proportional step quiets the generator near its optimum.
    std::optional<Optimizer> optimizer_generator;
    SpsaConfig spsa;
    // Anchor one noise sequence to each training trace (stable pairing for
    // the stepwise loss) instead of redrawing noise every minibatch.
    bool anchored_noise = false;
    long refresh_every = 1;  // synthetic causality refresh cadence, epochs
    std::optional<privacy::DpSgdConfig> privacy;
    causality::CausalityTrainConfig estimator;  // synthetic-batch estimator
    uint64_t seed = 1;

    int effective_noise_dim() const { return noise_dim > 0 ? noise_dim : embed_dim; }
};

struct GanState {
    nn::RecurrentNet embedder;       // trace value -> embedded step
    nn::RecurrentNet recovery;       // embedded step -> trace value in [0,1]
    nn::RecurrentNet generator;      // noise step -> embedded step
    nn::RecurrentNet discriminator;  // embedded step -> real/fake probability
    std::optional<nn::AdamState> adam_embedder, adam_recovery, adam_generator,
        adam_discriminator;
    long epoch = 0;
    long trace_length = 0;
    uint64_t seed = 0;
    causality::BatchCausalityState mx;  // warm synthetic-causality estimator
};

struct LossReport {
    double l_r = 0, l_s = 0, l_m = 0, l_d = 0, l_ar = 0, l_af = 0;
};

enum class Phase { Autoencoder, Generator, Discriminator };

// Called after each phase's parameter update within every minibatch.
using PhaseObserver = std::function<void(Phase, const GanState&)>;

GanState init_gan(const GanConfig& cfg, long trace_length);

// Batch forward passes.
Batch embed(const nn::RecurrentNet& embedder, const Batch& x);
Batch recover(const nn::RecurrentNet& recovery, const Batch& x_e);
Batch discriminate(const nn::RecurrentNet& discriminator, const Batch& x_e);

// Losses; every mean runs over batch items and time steps (and embedding
// coordinates where applicable).
double loss_reconstruction(const Batch& x, const Batch& x_tilde);
double loss_stepwise(const Batch& x_e, const Batch& x_hat_e);
// Moments loss: squared gaps of per-coordinate batch means plus variances.
double loss_distributional(const Batch& x_e, const Batch& x_hat_e);
double loss_motif(const causality::CausalityMatrix& m_real,
                  const causality::CausalityMatrix& m_synth);
// Binary cross entropy of per-step probabilities against a constant label,
// probabilities clamped to [1e-7, 1 - 1e-7].
double adversarial_loss(const Batch& probabilities, double label);

// Per-example phase gradients; train_epoch applies them, tests difference
// them against the objective values returned in `loss`.
struct AePhaseResult {
    double loss = 0;  // L_R + alpha * L_S
    double l_r = 0, l_s = 0;
    std::vector<Eigen::VectorXd> embedder_grads, recovery_grads;
};
AePhaseResult ae_phase(const nn::RecurrentNet& embedder, const nn::RecurrentNet& recovery,
                       const Batch& x, const Batch& x_hat_e, double alpha);

struct GeneratorPhaseResult {
    double loss = 0;  // (1 - L_Af) + eta L_S + eta L_D (+ SPSA-driven L_M term)
    double l_s = 0, l_d = 0, l_af = 0;
    Batch x_hat_e;
    Batch x_hat;  // recovered normalized traces
    std::vector<Eigen::VectorXd> generator_grads;
};
// d_lm_dxhat, when non-null, is the upstream gradient of the motif loss with
// respect to the recovered traces; it is chained through the recovery net.
GeneratorPhaseResult generator_phase(const nn::RecurrentNet& generator,
                                     const nn::RecurrentNet& discriminator,
                                     const nn::RecurrentNet& recovery, const Batch& z,
                                     const Batch& x_e, double eta,
                                     const Batch* d_lm_dxhat);

struct DiscriminatorPhaseResult {
    double loss = 0;  // L_Af + L_Ar
    double l_ar = 0, l_af = 0;
    std::vector<Eigen::VectorXd> discriminator_grads;
};
DiscriminatorPhaseResult discriminator_phase(const nn::RecurrentNet& discriminator,
                                             const Batch& x_e, const Batch& x_hat_e);

// Simultaneous-perturbation gradient of a scalar batch functional.
Batch spsa_gradient(const std::function<double(const Batch&)>& f, const Batch& x, double step,
                    int probes, uint64_t seed);

// SPSA estimate of d loss_motif / d x_hat where the synthetic causality
// matrix is re-estimated (warm-started, cfg.inner_steps iterations) on every
// perturbed batch.  x_hat holds normalized traces.
Batch spsa_gradient_lm(const Batch& x_hat, const causality::CausalityMatrix& m_real,
                       const motif::MotifSet& ms, const causality::CausalityTrainConfig& cfg,
                       const causality::BatchCausalityState* warm, double step, int probes,
                       uint64_t seed);

// One epoch of the three-phase schedule (autoencoder, generator,
// discriminator, in that order for every minibatch).  Deterministic per
// (state.seed, state.epoch).  Throws NumericError naming the phase on
// divergence.
LossReport train_epoch(GanState& state, const data::TraceSet& real,
                       const causality::CausalityMatrix& m_real, const motif::MotifSet& ms,
                       const GanConfig& cfg, const PhaseObserver& observer = nullptr);

// Noise -> generator -> recovery -> denormalized traces.
data::TraceSet generate(const GanState& state, const GanConfig& cfg, std::size_t count,
                        uint64_t seed);

void save_checkpoint(const std::string& path, const GanState& state,
                     const std::string& config_hash);
GanState load_checkpoint(const std::string& path, std::string* config_hash = nullptr);

void append_loss_log(const std::string& path, long epoch, const LossReport& report,
                     bool write_header);

}  // namespace forge::gan
