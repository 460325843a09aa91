#include "forge/causality.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "forge/error.hpp"
#include "forge/rng.hpp"

namespace forge::causality {

namespace {

constexpr double kDivergenceCeiling = 1e6;

// Indicator matrices for every trace of a partition, all length floor(T/tau).
std::vector<Eigen::MatrixXd> partition_indicators(const data::TraceSet& set,
                                                  const motif::MotifSet& ms) {
    std::vector<motif::MotifSequence> seqs;
    seqs.reserve(set.size());
    for (const auto& trace : set.traces) seqs.push_back(motif::encode(trace, ms));
    return motif::indicator_series(seqs, ms.size());
}

std::vector<Eigen::MatrixXd> batch_indicators(const std::vector<std::vector<double>>& batch,
                                              const motif::MotifSet& ms) {
    std::vector<motif::MotifSequence> seqs;
    seqs.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        seqs.push_back(motif::encode_values(batch[i], "batch" + std::to_string(i), ms));
    }
    return motif::indicator_series(seqs, ms.size());
}

// One proximal-gradient iteration: full-batch smooth step, then the prox map
// with the same step size.
void proximal_step(MotifNetwork& net, const std::vector<Eigen::MatrixXd>& data,
                   const CausalityTrainConfig& cfg, const char* context) {
    double smooth_loss = 0.0;
    const nn::NetGrads grads = smooth_gradients(net, data, &smooth_loss);
    if (!std::isfinite(smooth_loss) || smooth_loss > kDivergenceCeiling) {
        throw NumericError(std::string(context) + " diverged for motif " +
                           std::to_string(net.target_motif) +
                           "; try a smaller learning rate");
    }
    const Eigen::VectorXd flat = nn::flatten_grads(grads);
    std::optional<nn::AdamState> no_adam;
    nn::apply_update(net.net, flat, cfg.learning_rate, no_adam);
    prox_group_lasso(net.net.cell.w_in, cfg.lambda, cfg.learning_rate);
}

MotifNetwork fresh_network(int target_motif, std::size_t m, const CausalityTrainConfig& cfg) {
    MotifNetwork net;
    net.target_motif = target_motif;
    net.net = nn::make_net(static_cast<int>(m), cfg.hidden, 1, nn::Squash::None,
                           mix_seed(cfg.seed, static_cast<uint64_t>(target_motif)));
    return net;
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> lstm_forward(const MotifNetwork& net,
                                                         const Eigen::MatrixXd& inputs) {
    const nn::NetTrace trace = nn::net_forward(net.net, inputs);
    return {trace.outputs, trace.lstm.hidden};
}

double local_motif_loss(const MotifNetwork& net, const std::vector<Eigen::MatrixXd>& data,
                        double lambda) {
    if (data.empty()) throw ValidationError("local motif loss needs data");
    double error_sum = 0.0;
    for (const auto& seq : data) {
        const long L = seq.rows();
        if (L < 2) throw ValidationError("sequence too short for next-step loss");
        // Inputs are steps 1..L-1; prediction k estimates the indicator at k+1.
        const nn::NetTrace trace = nn::net_forward(net.net, seq.topRows(L - 1));
        for (long k = 0; k + 1 < L; ++k) {
            const double target = seq(k + 1, net.target_motif);
            const double diff = target - trace.outputs(k, 0);
            error_sum += diff * diff;
        }
    }
    double penalty = 0.0;
    for (long j = 0; j < net.net.cell.w_in.cols(); ++j) {
        penalty += net.net.cell.w_in.col(j).norm();
    }
    return error_sum / static_cast<double>(data.size()) + lambda * penalty;
}

nn::NetGrads smooth_gradients(const MotifNetwork& net, const std::vector<Eigen::MatrixXd>& data,
                              double* loss_out) {
    if (data.empty()) throw ValidationError("gradient computation needs data");
    nn::NetGrads total = nn::zero_grads(net.net);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(data.size());
    for (const auto& seq : data) {
        const long L = seq.rows();
        if (L < 2) throw ValidationError("sequence too short for next-step loss");
        const nn::NetTrace trace = nn::net_forward(net.net, seq.topRows(L - 1));
        Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(L - 1, 1);
        for (long k = 0; k + 1 < L; ++k) {
            const double target = seq(k + 1, net.target_motif);
            const double diff = trace.outputs(k, 0) - target;
            loss += diff * diff * inv_n;
            d_out(k, 0) = 2.0 * diff * inv_n;
        }
        nn::NetGrads grads = nn::net_backward(net.net, trace, d_out);
        nn::accumulate(total, grads);
    }
    if (loss_out) *loss_out = loss;
    return total;
}

void prox_group_lasso(Eigen::MatrixXd& w_in, double lambda, double step) {
    if (step <= 0.0) throw ValidationError("prox step must be positive");
    const double threshold = step * lambda;
    if (threshold == 0.0) return;
    for (long j = 0; j < w_in.cols(); ++j) {
        const double norm = w_in.col(j).norm();
        if (norm <= threshold) {
            w_in.col(j).setZero();
        } else {
            w_in.col(j) *= 1.0 - threshold / norm;
        }
    }
}

MotifNetwork train_motif_network(int target_motif, const std::vector<Eigen::MatrixXd>& data,
                                 const CausalityTrainConfig& cfg) {
    if (data.empty() || data.front().rows() < 2) {
        throw ValidationError("motif network training needs sequences with at least 2 steps");
    }
    MotifNetwork net = fresh_network(target_motif, static_cast<std::size_t>(data.front().cols()),
                                     cfg);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        proximal_step(net, data, cfg, "motif network training");
    }
    return net;
}

Eigen::MatrixXd stack_column_norms(const std::vector<MotifNetwork>& nets) {
    const auto m = static_cast<long>(nets.size());
    Eigen::MatrixXd raw(m, m);
    for (long i = 0; i < m; ++i) {
        const Eigen::MatrixXd& w_in = nets[static_cast<std::size_t>(i)].net.cell.w_in;
        for (long j = 0; j < m; ++j) raw(i, j) = w_in.col(j).norm();
    }
    return raw;
}

CausalityMatrix normalize_causality(const Eigen::MatrixXd& raw) {
    if ((raw.array() < 0.0).any()) {
        throw ValidationError("causality normalization requires nonnegative entries");
    }
    if (!raw.allFinite()) throw NumericError("non-finite causality entries");
    CausalityMatrix out;
    out.entries = raw;
    for (long i = 0; i < raw.rows(); ++i) {
        const double row_max = raw.row(i).maxCoeff();
        if (row_max > 0.0) out.entries.row(i) /= row_max;
    }
    return out;
}

CausalityMatrix partition_causality(const data::TraceSet& partition, const motif::MotifSet& ms,
                                    const CausalityTrainConfig& cfg) {
    if (partition.empty()) throw ValidationError("partition is empty");
    const auto data = partition_indicators(partition, ms);
    std::vector<MotifNetwork> nets;
    nets.reserve(ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) {
        try {
            nets.push_back(train_motif_network(static_cast<int>(i), data, cfg));
        } catch (const NumericError& e) {
            throw NumericError("motif " + std::to_string(i) + ": " + e.what());
        }
    }
    return normalize_causality(stack_column_norms(nets));
}

BatchCausalityState estimate_batch_causality(const std::vector<std::vector<double>>& batch,
                                             const motif::MotifSet& ms,
                                             const CausalityTrainConfig& cfg,
                                             const BatchCausalityState* warm) {
    if (batch.empty()) throw ValidationError("batch is empty");
    BatchCausalityState state;
    if (warm && warm->valid) {
        if (cfg.inner_steps == 0) return *warm;
        state = *warm;
    } else {
        state.nets.reserve(ms.size());
        for (std::size_t i = 0; i < ms.size(); ++i) {
            state.nets.push_back(fresh_network(static_cast<int>(i), ms.size(), cfg));
        }
    }
    const auto data = batch_indicators(batch, ms);
    for (auto& net : state.nets) {
        for (int step = 0; step < cfg.inner_steps; ++step) {
            proximal_step(net, data, cfg, "batch causality estimation");
        }
    }
    state.matrix = normalize_causality(stack_column_norms(state.nets));
    state.valid = true;
    return state;
}

void save_causality(const std::string& csv_path, const std::string& sidecar_path,
                    const CausalityMatrix& matrix, std::size_t tau, double sigma,
                    const std::string& config_hash) {
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot write " + csv_path);
    char buf[64];
    for (long i = 0; i < matrix.entries.rows(); ++i) {
        for (long j = 0; j < matrix.entries.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", matrix.entries(i, j));
            csv << (j == 0 ? "" : ",") << buf;
        }
        csv << "\n";
    }
    if (!csv) throw IoError("write failed: " + csv_path);
    std::ofstream side(sidecar_path);
    if (!side) throw IoError("cannot write " + sidecar_path);
    side << "{\n  \"m\": " << matrix.entries.rows() << ",\n  \"tau\": " << tau
         << ",\n  \"sigma\": " << sigma << ",\n  \"config_hash\": \"" << config_hash
         << "\"\n}\n";
}

CausalityMatrix load_causality(const std::string& csv_path) {
    std::ifstream csv(csv_path);
    if (!csv) throw IoError("cannot open " + csv_path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(csv, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const auto comma = line.find(',', pos);
            row.push_back(std::stod(
                line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    const auto m = rows.size();
    CausalityMatrix out;
    out.entries.resize(static_cast<long>(m), static_cast<long>(m));
    for (std::size_t i = 0; i < m; ++i) {
        if (rows[i].size() != m) throw ValidationError("causality matrix is not square");
        for (std::size_t j = 0; j < m; ++j) {
            out.entries(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
        }
    }
    return out;
}

}  // namespace forge::causality
