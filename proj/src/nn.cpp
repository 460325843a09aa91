#include "forge/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "forge/error.hpp"
#include "forge/rng.hpp"

namespace forge::nn {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

Eigen::VectorXd sigmoid_vec(const Eigen::VectorXd& x) {
    return x.unaryExpr([](double v) { return sigmoid(v); });
}

Eigen::VectorXd tanh_vec(const Eigen::VectorXd& x) {
    return x.unaryExpr([](double v) { return std::tanh(v); });
}

}  // namespace

LstmTrace lstm_forward(const LstmParams& p, const Eigen::MatrixXd& inputs) {
    const int H = p.hidden();
    const long L = inputs.rows();
    if (inputs.cols() != p.input()) {
        throw ValidationError("lstm input width " + std::to_string(inputs.cols()) +
                              " does not match parameters (" + std::to_string(p.input()) + ")");
    }

    LstmTrace trace;
    trace.x = inputs;
    trace.gate_i.resize(L, H);
    trace.gate_f.resize(L, H);
    trace.gate_g.resize(L, H);
    trace.gate_o.resize(L, H);
    trace.cell.resize(L, H);
    trace.cell_tanh.resize(L, H);
    trace.hidden.resize(L, H);

    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(H);
    for (long t = 0; t < L; ++t) {
        const Eigen::VectorXd pre = p.w_in * inputs.row(t).transpose() + p.w_rec * h_prev + p.bias;
        const Eigen::VectorXd i = sigmoid_vec(pre.segment(0, H));
        const Eigen::VectorXd f = sigmoid_vec(pre.segment(H, H));
        const Eigen::VectorXd g = tanh_vec(pre.segment(2 * H, H));
        const Eigen::VectorXd o = sigmoid_vec(pre.segment(3 * H, H));
        const Eigen::VectorXd c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
        const Eigen::VectorXd ct = tanh_vec(c);
        const Eigen::VectorXd h = o.cwiseProduct(ct);
        if (!h.allFinite() || !c.allFinite()) {
            throw NumericError("non-finite lstm state at step " + std::to_string(t));
        }
        trace.gate_i.row(t) = i.transpose();
        trace.gate_f.row(t) = f.transpose();
        trace.gate_g.row(t) = g.transpose();
        trace.gate_o.row(t) = o.transpose();
        trace.cell.row(t) = c.transpose();
        trace.cell_tanh.row(t) = ct.transpose();
        trace.hidden.row(t) = h.transpose();
        h_prev = h;
        c_prev = c;
    }
    return trace;
}

LstmGrads lstm_backward(const LstmParams& p, const LstmTrace& trace,
                        const Eigen::MatrixXd& d_hidden, Eigen::MatrixXd* dx) {
    const int H = p.hidden();
    const long L = trace.steps();

    LstmGrads grads;
    grads.w_in = Eigen::MatrixXd::Zero(p.w_in.rows(), p.w_in.cols());
    grads.w_rec = Eigen::MatrixXd::Zero(p.w_rec.rows(), p.w_rec.cols());
    grads.bias = Eigen::VectorXd::Zero(p.bias.size());
    if (dx) *dx = Eigen::MatrixXd::Zero(L, p.input());

    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd da(4 * H);
    for (long t = L - 1; t >= 0; --t) {
        const Eigen::VectorXd i = trace.gate_i.row(t).transpose();
        const Eigen::VectorXd f = trace.gate_f.row(t).transpose();
        const Eigen::VectorXd g = trace.gate_g.row(t).transpose();
        const Eigen::VectorXd o = trace.gate_o.row(t).transpose();
        const Eigen::VectorXd ct = trace.cell_tanh.row(t).transpose();
        const Eigen::VectorXd c_prev =
            t > 0 ? Eigen::VectorXd(trace.cell.row(t - 1).transpose()) : Eigen::VectorXd::Zero(H);

        const Eigen::VectorXd dh = d_hidden.row(t).transpose() + dh_next;
        const Eigen::VectorXd dc =
            dh.cwiseProduct(o).cwiseProduct(Eigen::VectorXd::Ones(H) - ct.cwiseProduct(ct)) +
            dc_next;

        const Eigen::VectorXd do_ = dh.cwiseProduct(ct);
        const Eigen::VectorXd di = dc.cwiseProduct(g);
        const Eigen::VectorXd df = dc.cwiseProduct(c_prev);
        const Eigen::VectorXd dg = dc.cwiseProduct(i);

        da.segment(0, H) = di.cwiseProduct(i).cwiseProduct(Eigen::VectorXd::Ones(H) - i);
        da.segment(H, H) = df.cwiseProduct(f).cwiseProduct(Eigen::VectorXd::Ones(H) - f);
        da.segment(2 * H, H) = dg.cwiseProduct(Eigen::VectorXd::Ones(H) - g.cwiseProduct(g));
        da.segment(3 * H, H) = do_.cwiseProduct(o).cwiseProduct(Eigen::VectorXd::Ones(H) - o);

        grads.w_in.noalias() += da * trace.x.row(t);
        if (t > 0) grads.w_rec.noalias() += da * trace.hidden.row(t - 1);
        grads.bias += da;
        if (dx) dx->row(t) = (p.w_in.transpose() * da).transpose();

        dh_next.noalias() = p.w_rec.transpose() * da;
        dc_next = dc.cwiseProduct(f);
    }
    return grads;
}

NetTrace net_forward(const RecurrentNet& net, const Eigen::MatrixXd& inputs) {
    NetTrace trace;
    trace.lstm = lstm_forward(net.cell, inputs);
    const long L = trace.lstm.steps();
    trace.outputs.resize(L, net.output());
    for (long t = 0; t < L; ++t) {
        Eigen::VectorXd y = net.head.w * trace.lstm.hidden.row(t).transpose() + net.head.b;
        if (net.squash == Squash::Sigmoid) y = y.unaryExpr([](double v) { return sigmoid(v); });
        trace.outputs.row(t) = y.transpose();
    }
    return trace;
}

NetGrads net_backward(const RecurrentNet& net, const NetTrace& trace,
                      const Eigen::MatrixXd& d_outputs, Eigen::MatrixXd* dx) {
    const long L = trace.lstm.steps();
    NetGrads grads = zero_grads(net);
    Eigen::MatrixXd d_hidden = Eigen::MatrixXd::Zero(L, net.hidden());
    for (long t = 0; t < L; ++t) {
        Eigen::VectorXd dy = d_outputs.row(t).transpose();
        if (net.squash == Squash::Sigmoid) {
            const Eigen::VectorXd y = trace.outputs.row(t).transpose();
            dy = dy.cwiseProduct(y).cwiseProduct(Eigen::VectorXd::Ones(y.size()) - y);
        }
        grads.head_w.noalias() += dy * trace.lstm.hidden.row(t);
        grads.head_b += dy;
        d_hidden.row(t) = (net.head.w.transpose() * dy).transpose();
    }
    grads.cell = lstm_backward(net.cell, trace.lstm, d_hidden, dx);
    return grads;
}

RecurrentNet make_net(int input, int hidden, int output, Squash squash, uint64_t seed) {
    RecurrentNet net;
    net.squash = squash;
    net.cell.w_in.resize(4 * hidden, input);
    net.cell.w_rec.resize(4 * hidden, hidden);
    net.cell.bias = Eigen::VectorXd::Zero(4 * hidden);
    net.head.w.resize(output, hidden);
    net.head.b = Eigen::VectorXd::Zero(output);

    Rng rng(mix_seed(seed, 0x6e6574ULL));  // stream tag: "net"
    const double r_in = 1.0 / std::sqrt(static_cast<double>(std::max(1, input)));
    const double r_h = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (long i = 0; i < net.cell.w_in.size(); ++i) {
        net.cell.w_in.data()[i] = rng.uniform(-r_in, r_in);
    }
    for (long i = 0; i < net.cell.w_rec.size(); ++i) {
        net.cell.w_rec.data()[i] = rng.uniform(-r_h, r_h);
    }
    for (long i = 0; i < net.head.w.size(); ++i) {
        net.head.w.data()[i] = rng.uniform(-r_h, r_h);
    }
    // Forget-gate bias starts at 1 so early training keeps cell memory.
    net.cell.bias.segment(hidden, hidden).setOnes();
    return net;
}

RecurrentNet zeros_like(const RecurrentNet& net) {
    RecurrentNet out = net;
    out.cell.w_in.setZero();
    out.cell.w_rec.setZero();
    out.cell.bias.setZero();
    out.head.w.setZero();
    out.head.b.setZero();
    return out;
}

NetGrads zero_grads(const RecurrentNet& net) {
    NetGrads grads;
    grads.cell.w_in = Eigen::MatrixXd::Zero(net.cell.w_in.rows(), net.cell.w_in.cols());
    grads.cell.w_rec = Eigen::MatrixXd::Zero(net.cell.w_rec.rows(), net.cell.w_rec.cols());
    grads.cell.bias = Eigen::VectorXd::Zero(net.cell.bias.size());
    grads.head_w = Eigen::MatrixXd::Zero(net.head.w.rows(), net.head.w.cols());
    grads.head_b = Eigen::VectorXd::Zero(net.head.b.size());
    return grads;
}

void accumulate(NetGrads& into, const NetGrads& grads) {
    into.cell.w_in += grads.cell.w_in;
    into.cell.w_rec += grads.cell.w_rec;
    into.cell.bias += grads.cell.bias;
    into.head_w += grads.head_w;
    into.head_b += grads.head_b;
}

void scale(NetGrads& grads, double factor) {
    grads.cell.w_in *= factor;
    grads.cell.w_rec *= factor;
    grads.cell.bias *= factor;
    grads.head_w *= factor;
    grads.head_b *= factor;
}

long param_count(const RecurrentNet& net) {
    return net.cell.w_in.size() + net.cell.w_rec.size() + net.cell.bias.size() +
           net.head.w.size() + net.head.b.size();
}

namespace {

void pack(Eigen::VectorXd& flat, long& offset, const Eigen::MatrixXd& m) {
    flat.segment(offset, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    offset += m.size();
}

void pack(Eigen::VectorXd& flat, long& offset, const Eigen::VectorXd& v) {
    flat.segment(offset, v.size()) = v;
    offset += v.size();
}

void unpack(const Eigen::VectorXd& flat, long& offset, Eigen::MatrixXd& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(offset, m.size());
    offset += m.size();
}

void unpack(const Eigen::VectorXd& flat, long& offset, Eigen::VectorXd& v) {
    v = flat.segment(offset, v.size());
    offset += v.size();
}

}  // namespace

Eigen::VectorXd flatten_params(const RecurrentNet& net) {
    Eigen::VectorXd flat(param_count(net));
    long offset = 0;
    pack(flat, offset, net.cell.w_in);
    pack(flat, offset, net.cell.w_rec);
    pack(flat, offset, net.cell.bias);
    pack(flat, offset, net.head.w);
    pack(flat, offset, net.head.b);
    return flat;
}

void assign_params(RecurrentNet& net, const Eigen::VectorXd& flat) {
    if (flat.size() != param_count(net)) {
        throw ValidationError("parameter vector length mismatch");
    }
    long offset = 0;
    unpack(flat, offset, net.cell.w_in);
    unpack(flat, offset, net.cell.w_rec);
    unpack(flat, offset, net.cell.bias);
    unpack(flat, offset, net.head.w);
    unpack(flat, offset, net.head.b);
}

Eigen::VectorXd flatten_grads(const NetGrads& grads) {
    const long total = grads.cell.w_in.size() + grads.cell.w_rec.size() + grads.cell.bias.size() +
                       grads.head_w.size() + grads.head_b.size();
    Eigen::VectorXd flat(total);
    long offset = 0;
    pack(flat, offset, grads.cell.w_in);
    pack(flat, offset, grads.cell.w_rec);
    pack(flat, offset, grads.cell.bias);
    pack(flat, offset, grads.head_w);
    pack(flat, offset, grads.head_b);
    return flat;
}

void apply_update(RecurrentNet& net, const Eigen::VectorXd& grad, double lr,
                  std::optional<AdamState>& adam) {
    Eigen::VectorXd params = flatten_params(net);
    if (!adam.has_value()) {
        params -= lr * grad;
    } else {
        constexpr double beta1 = 0.9;
        constexpr double beta2 = 0.999;
        constexpr double eps = 1e-8;
        AdamState& st = *adam;
        if (st.m.size() != grad.size()) {
            st.m = Eigen::VectorXd::Zero(grad.size());
            st.v = Eigen::VectorXd::Zero(grad.size());
            st.t = 0;
        }
        ++st.t;
        st.m = beta1 * st.m + (1.0 - beta1) * grad;
        st.v = beta2 * st.v + (1.0 - beta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
        for (long i = 0; i < params.size(); ++i) {
            const double mhat = st.m[i] / c1;
            const double vhat = st.v[i] / c2;
            params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    assign_params(net, params);
}

}  // namespace forge::nn
