#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

namespace forge::nn {

// Single-layer LSTM parameters.  Gate rows are stacked in the order
// input, forget, cell-candidate, output, so all weight matrices have 4H rows.
// Columns of w_in index input channels; they are the group-lasso groups when
// the penalty is applied.
struct LstmParams {
    Eigen::MatrixXd w_in;   // [4H x in]
    Eigen::MatrixXd w_rec;  // [4H x H]
    Eigen::VectorXd bias;   // [4H]

    int hidden() const { return static_cast<int>(w_rec.cols()); }
    int input() const { return static_cast<int>(w_in.cols()); }
};

struct Linear {
    Eigen::MatrixXd w;  // [out x H]
    Eigen::VectorXd b;  // [out]
};

enum class Squash { None, Sigmoid };

// LSTM + per-step linear head.  Sequences are row-per-step matrices.
struct RecurrentNet {
    LstmParams cell;
    Linear head;
    Squash squash = Squash::None;

    int input() const { return cell.input(); }
    int hidden() const { return cell.hidden(); }
    int output() const { return static_cast<int>(head.w.rows()); }
};

// Per-step activations cached by the forward pass for BPTT.
struct LstmTrace {
    Eigen::MatrixXd x;                         // [L x in]
    Eigen::MatrixXd gate_i, gate_f, gate_g, gate_o;  // [L x H]
    Eigen::MatrixXd cell, cell_tanh, hidden;         // [L x H]
    long steps() const { return x.rows(); }
};

struct LstmGrads {
    Eigen::MatrixXd w_in;
    Eigen::MatrixXd w_rec;
    Eigen::VectorXd bias;
};

struct NetTrace {
    LstmTrace lstm;
    Eigen::MatrixXd outputs;  // [L x out], after squash
};

struct NetGrads {
    LstmGrads cell;
    Eigen::MatrixXd head_w;
    Eigen::VectorXd head_b;
};

// Runs the gate recurrence from zero initial state.  Throws NumericError
// naming the step if any hidden state goes non-finite.
LstmTrace lstm_forward(const LstmParams& p, const Eigen::MatrixXd& inputs);

// Backpropagation through time.  d_hidden holds dLoss/dh_t per step; dx, when
// non-null, receives dLoss/dx_t.
LstmGrads lstm_backward(const LstmParams& p, const LstmTrace& trace,
                        const Eigen::MatrixXd& d_hidden, Eigen::MatrixXd* dx = nullptr);

NetTrace net_forward(const RecurrentNet& net, const Eigen::MatrixXd& inputs);

// d_outputs holds dLoss/d(outputs) per step (after squash).
NetGrads net_backward(const RecurrentNet& net, const NetTrace& trace,
                      const Eigen::MatrixXd& d_outputs, Eigen::MatrixXd* dx = nullptr);

// Small-uniform initialization, deterministic for a given seed.
RecurrentNet make_net(int input, int hidden, int output, Squash squash, uint64_t seed);

RecurrentNet zeros_like(const RecurrentNet& net);
NetGrads zero_grads(const RecurrentNet& net);
void accumulate(NetGrads& into, const NetGrads& grads);
void scale(NetGrads& grads, double factor);

// Flat row-major parameter packing (w_in, w_rec, bias, head_w, head_b);
// used by finite-difference checks, DP sanitization and checkpointing.
long param_count(const RecurrentNet& net);
Eigen::VectorXd flatten_params(const RecurrentNet& net);
void assign_params(RecurrentNet& net, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_grads(const NetGrads& grads);

// Adam moments; disabled optimizers pass std::nullopt and take plain SGD steps.
struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long t = 0;
};

void apply_update(RecurrentNet& net, const Eigen::VectorXd& grad, double lr,
                  std::optional<AdamState>& adam);

double sigmoid(double x);

}  // namespace forge::nn
