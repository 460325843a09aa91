#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "forge/data.hpp"
#include "forge/motif.hpp"
#include "forge/nn.hpp"

namespace forge::causality {

// Sparse recurrent model for one target motif.  The penalized matrix is the
// input-to-hidden weight block: column j gathers every gate weight fed by
// input channel j, so a zero column makes the prediction provably invariant
// to channel j.  A separate linear head decodes the hidden state into the
// next-step indicator logit for the target motif.
struct MotifNetwork {
    int target_motif = 0;
    nn::RecurrentNet net;  // input = m channels, output = 1
};

// m x m matrix, row i = normalized causal strengths of every motif onto
// motif i.  Entries live in [0, 1].
struct CausalityMatrix {
    Eigen::MatrixXd entries;

    std::size_t size() const { return static_cast<std::size_t>(entries.rows()); }
};

struct CausalityTrainConfig {
    int hidden = 16;
    double learning_rate = 0.05;
    double lambda = 0.05;      // group-lasso weight
    int epochs = 300;          // full-batch proximal iterations per network
    int inner_steps = 25;      // iteration cap for per-batch estimation
    uint64_t seed = 1;
};

// Runs the gate recurrence over one indicator sequence and returns
// (per-step predictions [L x 1], hidden states [L x H]).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> lstm_forward(const MotifNetwork& net,
                                                         const Eigen::MatrixXd& inputs);

// Squared next-step prediction error for the target motif, summed over
// steps 2..L, averaged over sequences, plus lambda * sum_j ||w_in col j||_2.
double local_motif_loss(const MotifNetwork& net, const std::vector<Eigen::MatrixXd>& data,
                        double lambda);

// Gradient of the smooth (un-penalized) part of the loss above.
nn::NetGrads smooth_gradients(const MotifNetwork& net, const std::vector<Eigen::MatrixXd>& data,
                              double* loss_out = nullptr);

// Block soft-threshold on the columns of w_in.
void prox_group_lasso(Eigen::MatrixXd& w_in, double lambda, double step);

// Full-batch gradient steps on the smooth term alternated with the proximal
// map; deterministic per seed.  Throws NumericError on divergence.
MotifNetwork train_motif_network(int target_motif, const std::vector<Eigen::MatrixXd>& data,
                                 const CausalityTrainConfig& cfg);

// m independent networks over one data partition, stacked into a normalized
// causality matrix.  Row i holds the column norms of network i's w_in.
CausalityMatrix partition_causality(const data::TraceSet& partition, const motif::MotifSet& ms,
                                    const CausalityTrainConfig& cfg);

// Row-max normalization into [0, 1]; all-zero rows stay zero; throws on
// negative entries.
CausalityMatrix normalize_causality(const Eigen::MatrixXd& raw);

// Warm-startable estimator used on synthetic batches during GAN training.
struct BatchCausalityState {
    std::vector<MotifNetwork> nets;
    CausalityMatrix matrix;
    bool valid = false;
};

// Same construction as partition_causality but capped at cfg.inner_steps
// proximal iterations per network and warm-started when a previous state is
// given.  Batch rows are raw mg/dL values (bounds not enforced: perturbed
// generator output may stray outside the display range).
BatchCausalityState estimate_batch_causality(const std::vector<std::vector<double>>& batch,
                                             const motif::MotifSet& ms,
                                             const CausalityTrainConfig& cfg,
                                             const BatchCausalityState* warm = nullptr);

// Column norms of each trained network's w_in, stacked row-per-target.
Eigen::MatrixXd stack_column_norms(const std::vector<MotifNetwork>& nets);

void save_causality(const std::string& csv_path, const std::string& sidecar_path,
                    const CausalityMatrix& matrix, std::size_t tau, double sigma,
                    const std::string& config_hash);
CausalityMatrix load_causality(const std::string& csv_path);

}  // namespace forge::causality
