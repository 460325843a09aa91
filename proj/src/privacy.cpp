#include "forge/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "forge/error.hpp"
#include "forge/rng.hpp"

namespace forge::privacy {

namespace {

std::size_t quantize(double value, std::size_t bins) {
    const double clamped = std::clamp(value, 0.0, 1.0);
    auto bin = static_cast<std::size_t>(clamped * static_cast<double>(bins));
    if (bin >= bins) bin = bins - 1;  // value exactly 1.0
    return bin;
}

double bin_center(std::size_t bin, std::size_t bins) {
    return (static_cast<double>(bin) + 0.5) / static_cast<double>(bins);
}

// log(sum exp(terms)) with max-shift.
double log_sum_exp(const std::vector<double>& terms) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double t : terms) mx = std::max(mx, t);
    if (!std::isfinite(mx)) return mx;
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - mx);
    return mx + std::log(acc);
}

double log_binomial(long n, long k) {
    return std::lgamma(static_cast<double>(n + 1)) - std::lgamma(static_cast<double>(k + 1)) -
           std::lgamma(static_cast<double>(n - k + 1));
}

// Renyi divergence bound of one subsampled Gaussian step at integer order.
double rdp_step(long order, double q, double z) {
    const double sigma2 = z * z;
    if (q >= 1.0) {
        return static_cast<double>(order) / (2.0 * sigma2);
    }
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(order) + 1);
    for (long k = 0; k <= order; ++k) {
        const double log_coeff = log_binomial(order, k) + static_cast<double>(k) * std::log(q) +
                                 static_cast<double>(order - k) * std::log1p(-q);
        const double moment = static_cast<double>(k * (k - 1)) / (2.0 * sigma2);
        terms.push_back(log_coeff + moment);
    }
    return log_sum_exp(terms) / static_cast<double>(order - 1);
}

}  // namespace

std::vector<data::TraceSet> partition(const data::TraceSet& set, std::size_t n) {
    if (n == 0) throw ValidationError("partition count must be positive");
    if (n > set.size()) {
        throw ValidationError("cannot split " + std::to_string(set.size()) + " traces into " +
                              std::to_string(n) + " partitions");
    }
    std::vector<data::TraceSet> out(n);
    for (auto& p : out) p.tag = set.tag;
    for (std::size_t i = 0; i < set.size(); ++i) {
        out[i % n].traces.push_back(set.traces[i]);
    }
    return out;
}

causality::CausalityMatrix pate_aggregate(const std::vector<causality::CausalityMatrix>& teachers,
                                          const PrivacyBudget& budget, const PateConfig& cfg,
                                          uint64_t seed) {
    if (teachers.empty()) throw ValidationError("pate aggregation needs at least one teacher");
    if (cfg.bins < 2) throw ValidationError("pate needs at least 2 bins");
    const long m = teachers.front().entries.rows();
    for (const auto& t : teachers) {
        if (t.entries.rows() != m || t.entries.cols() != m) {
            throw ValidationError("teacher matrix dimension mismatch");
        }
    }

    const double eps_entry =
        budget.unlimited() ? 0.0
                           : budget.epsilon / (static_cast<double>(m) * static_cast<double>(m));
    Rng rng(mix_seed(seed, 0x70617465ULL));  // stream tag: "pate"

    causality::CausalityMatrix out;
    out.entries.resize(m, m);
    std::vector<double> votes(cfg.bins);
    for (long i = 0; i < m; ++i) {
        for (long j = 0; j < m; ++j) {
            std::fill(votes.begin(), votes.end(), 0.0);
            for (const auto& t : teachers) votes[quantize(t.entries(i, j), cfg.bins)] += 1.0;
            if (!budget.unlimited()) {
                const double scale = 2.0 / eps_entry;
                for (auto& v : votes) v += rng.laplace(scale);
            }
            std::size_t best = 0;
            for (std::size_t b = 1; b < cfg.bins; ++b) {
                if (votes[b] > votes[best]) best = b;
            }
            out.entries(i, j) = bin_center(best, cfg.bins);
        }
    }
    return out;
}

Eigen::VectorXd clip_and_noise(const std::vector<Eigen::VectorXd>& per_example_grads,
                               const DpSgdConfig& cfg, uint64_t seed) {
    if (per_example_grads.empty()) throw ValidationError("clip_and_noise needs gradients");
    const long dim = per_example_grads.front().size();
    const auto batch = static_cast<double>(per_example_grads.size());

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    for (const auto& g : per_example_grads) {
        if (g.size() != dim) throw ValidationError("gradient dimension mismatch");
        double factor = 1.0;
        if (std::isfinite(cfg.clip_norm)) {
            const double norm = g.norm();
            if (norm > cfg.clip_norm) factor = cfg.clip_norm / norm;
        }
        sum += g * factor;
    }
    Eigen::VectorXd mean = sum / batch;

    if (cfg.noise_multiplier > 0.0) {
        Rng rng(mix_seed(seed, 0x6470736764ULL));  // stream tag: "dpsgd"
        const double stddev = cfg.noise_multiplier * cfg.clip_norm / batch;
        for (long i = 0; i < dim; ++i) mean[i] += rng.normal(0.0, stddev);
    }
    return mean;
}

double epsilon_of(const DpSgdConfig& cfg, double delta) {
    if (cfg.noise_multiplier <= 0.0) return std::numeric_limits<double>::infinity();
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
    if (!(cfg.sample_rate > 0.0 && cfg.sample_rate <= 1.0)) {
        throw ValidationError("sample rate must lie in (0, 1]");
    }
    if (cfg.steps <= 0) throw ValidationError("step count must be positive");

    const double log_inv_delta = std::log(1.0 / delta);
    double best = std::numeric_limits<double>::infinity();
    for (long order = 2; order <= 256; ++order) {
        const double rdp =
            static_cast<double>(cfg.steps) * rdp_step(order, cfg.sample_rate, cfg.noise_multiplier);
        const double eps = rdp + log_inv_delta / static_cast<double>(order - 1);
        best = std::min(best, eps);
    }
    return best;
}

void write_budget_report(const std::string& path, double epsilon, double delta,
                         const std::string& mechanism, const std::string& parameters_json) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "{\n  \"epsilon\": ";
    if (std::isinf(epsilon)) {
        out << "\"inf\"";
    } else {
        out << epsilon;
    }
    out << ",\n  \"delta\": " << delta << ",\n  \"mechanism\": \"" << mechanism
        << "\",\n  \"parameters\": " << parameters_json << "\n}\n";
}

}  // namespace forge::privacy
