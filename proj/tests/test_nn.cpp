#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "forge/error.hpp"
#include "forge/nn.hpp"
#include "forge/rng.hpp"

using namespace forge;

namespace {

Eigen::MatrixXd random_matrix(long rows, long cols, Rng& rng, double scale = 0.5) {
    Eigen::MatrixXd m(rows, cols);
    for (long i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
    return m;
}

// Scalar objective used by the gradient checks: weighted sum of squared
// outputs, mean over steps.
double objective(const nn::RecurrentNet& net, const Eigen::MatrixXd& inputs) {
    const auto trace = nn::net_forward(net, inputs);
    return trace.outputs.squaredNorm() / static_cast<double>(trace.outputs.rows());
}

double max_relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
    double worst = 0.0;
    for (long i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), 1e-8});
        worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

Eigen::VectorXd finite_difference(nn::RecurrentNet net, const Eigen::MatrixXd& inputs) {
    const Eigen::VectorXd base = nn::flatten_params(net);
    Eigen::VectorXd grad(base.size());
    const double h = 1e-6;
    for (long i = 0; i < base.size(); ++i) {
        Eigen::VectorXd p = base;
        p[i] = base[i] + h;
        nn::assign_params(net, p);
        const double up = objective(net, inputs);
        p[i] = base[i] - h;
        nn::assign_params(net, p);
        const double down = objective(net, inputs);
        grad[i] = (up - down) / (2.0 * h);
    }
    nn::assign_params(net, base);
    return grad;
}

}  // namespace

TEST_CASE("zero network maps any input to zero") {
    nn::RecurrentNet net = nn::make_net(3, 4, 2, nn::Squash::None, 1);
    net = nn::zeros_like(net);
    Rng rng(2);
    const auto inputs = random_matrix(5, 3, rng);
    const auto trace = nn::net_forward(net, inputs);
    CHECK(trace.outputs.cwiseAbs().maxCoeff() == 0.0);
    CHECK(trace.lstm.hidden.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single step matches a hand-unrolled LSTM at H=2") {
    // H = 2, one input channel, fixed small weights.
    nn::RecurrentNet net;
    net.squash = nn::Squash::None;
    net.cell.w_in.resize(8, 1);
    net.cell.w_in << 0.1, -0.2, 0.3, 0.05, -0.15, 0.25, 0.4, -0.1;
    net.cell.w_rec = Eigen::MatrixXd::Zero(8, 2);  // irrelevant at t = 0
    net.cell.bias.resize(8);
    net.cell.bias << 0.01, 0.02, -0.03, 0.04, 0.05, -0.06, 0.07, 0.08;
    net.head.w.resize(1, 2);
    net.head.w << 0.5, -0.7;
    net.head.b.resize(1);
    net.head.b << 0.11;

    const double x = 0.9;
    Eigen::MatrixXd inputs(1, 1);
    inputs << x;

    const auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    // Gate preactivations: w_in * x + bias, rows stacked i, f, g, o.
    const double i0 = sigmoid(0.1 * x + 0.01), i1 = sigmoid(-0.2 * x + 0.02);
    const double f0 = sigmoid(0.3 * x - 0.03), f1 = sigmoid(0.05 * x + 0.04);
    const double g0 = std::tanh(-0.15 * x + 0.05), g1 = std::tanh(0.25 * x - 0.06);
    const double o0 = sigmoid(0.4 * x + 0.07), o1 = sigmoid(-0.1 * x + 0.08);
    (void)f0;
    (void)f1;  // cell state starts at zero, forget path contributes nothing
    const double c0 = i0 * g0, c1 = i1 * g1;
    const double h0 = o0 * std::tanh(c0), h1 = o1 * std::tanh(c1);
    const double y = 0.5 * h0 - 0.7 * h1 + 0.11;

    const auto trace = nn::net_forward(net, inputs);
    CHECK(trace.lstm.hidden(0, 0) == doctest::Approx(h0).epsilon(1e-12));
    CHECK(trace.lstm.hidden(0, 1) == doctest::Approx(h1).epsilon(1e-12));
    CHECK(trace.outputs(0, 0) == doctest::Approx(y).epsilon(1e-12));
}

TEST_CASE("two length-1 runs with the same input give identical state") {
    nn::RecurrentNet net = nn::make_net(3, 4, 1, nn::Squash::None, 7);
    Rng rng(8);
    const auto row = random_matrix(1, 3, rng);
    const auto first = nn::net_forward(net, row);
    const auto second = nn::net_forward(net, row);
    CHECK((first.lstm.hidden - second.lstm.hidden).cwiseAbs().maxCoeff() == 0.0);
    CHECK(first.outputs(0, 0) == second.outputs(0, 0));
}

TEST_CASE("backward matches central finite differences") {
    for (uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        nn::RecurrentNet net = nn::make_net(2, 3, 2, nn::Squash::None, seed);
        Rng rng(seed + 100);
        const auto inputs = random_matrix(4, 2, rng);

        const auto trace = nn::net_forward(net, inputs);
        const Eigen::MatrixXd d_out =
            2.0 * trace.outputs / static_cast<double>(trace.outputs.rows());
        const auto grads = nn::net_backward(net, trace, d_out);

        const auto numeric = finite_difference(net, inputs);
        CHECK(max_relative_error(nn::flatten_grads(grads), numeric) < 1e-4);
    }
}

TEST_CASE("backward matches finite differences through a sigmoid head") {
    nn::RecurrentNet net = nn::make_net(2, 3, 1, nn::Squash::Sigmoid, 21);
    Rng rng(22);
    const auto inputs = random_matrix(4, 2, rng);
    const auto trace = nn::net_forward(net, inputs);
    const Eigen::MatrixXd d_out = 2.0 * trace.outputs / static_cast<double>(trace.outputs.rows());
    const auto grads = nn::net_backward(net, trace, d_out);
    const auto numeric = finite_difference(net, inputs);
    CHECK(max_relative_error(nn::flatten_grads(grads), numeric) < 1e-4);
}

TEST_CASE("input gradients match finite differences") {
    nn::RecurrentNet net = nn::make_net(2, 3, 1, nn::Squash::None, 31);
    Rng rng(32);
    Eigen::MatrixXd inputs = random_matrix(4, 2, rng);
    const auto trace = nn::net_forward(net, inputs);
    const Eigen::MatrixXd d_out = 2.0 * trace.outputs / static_cast<double>(trace.outputs.rows());
    Eigen::MatrixXd dx;
    nn::net_backward(net, trace, d_out, &dx);

    const double h = 1e-6;
    for (long t = 0; t < inputs.rows(); ++t) {
        for (long c = 0; c < inputs.cols(); ++c) {
            Eigen::MatrixXd up = inputs, down = inputs;
            up(t, c) += h;
            down(t, c) -= h;
            const double numeric = (objective(net, up) - objective(net, down)) / (2.0 * h);
            CHECK(dx(t, c) == doctest::Approx(numeric).epsilon(1e-4));
        }
    }
}

TEST_CASE("parameter flattening round-trips") {
    nn::RecurrentNet net = nn::make_net(3, 5, 2, nn::Squash::Sigmoid, 41);
    const auto flat = nn::flatten_params(net);
    nn::RecurrentNet other = nn::zeros_like(net);
    nn::assign_params(other, flat);
    CHECK((nn::flatten_params(other) - flat).cwiseAbs().maxCoeff() == 0.0);
    CHECK(nn::param_count(net) == flat.size());
}

TEST_CASE("adam and sgd updates are deterministic and finite") {
    nn::RecurrentNet net = nn::make_net(2, 3, 1, nn::Squash::None, 51);
    const Eigen::VectorXd grad = Eigen::VectorXd::Constant(nn::param_count(net), 0.1);

    std::optional<nn::AdamState> none;
    nn::RecurrentNet sgd_net = net;
    nn::apply_update(sgd_net, grad, 0.5, none);
    const Eigen::VectorXd expect = nn::flatten_params(net) - 0.5 * grad;
    CHECK((nn::flatten_params(sgd_net) - expect).cwiseAbs().maxCoeff() == 0.0);

    std::optional<nn::AdamState> adam;
    adam.emplace();
    nn::RecurrentNet adam_net = net;
    nn::apply_update(adam_net, grad, 0.01, adam);
    CHECK(nn::flatten_params(adam_net).allFinite());
    CHECK(adam->t == 1);
}

TEST_CASE("divergent input is reported with the step index") {
    nn::RecurrentNet net = nn::make_net(1, 2, 1, nn::Squash::None, 61);
    Eigen::MatrixXd inputs(2, 1);
    inputs << 1.0, std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(nn::net_forward(net, inputs), NumericError);
}
