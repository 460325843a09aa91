#include "forge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "forge/error.hpp"
#include "forge/motif.hpp"
#include "forge/nn.hpp"
#include "forge/rng.hpp"

namespace forge::eval {

namespace {

double sample_mean(const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mean = sample_mean(xs);
    double sum = 0.0;
    for (double x : xs) sum += (x - mean) * (x - mean);
    return sum / static_cast<double>(xs.size() - 1);
}

// Continued fraction for the regularized incomplete beta, modified Lentz.
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 3e-14;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front =
        a * std::log(x) + b * std::log(1.0 - x) -
        (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

// Welch p-value with a convention for the all-degenerate case the strict
// test rejects: identical constants are maximally compatible (p = 1),
// different constants maximally incompatible (p = 0).
double p_value_or_degenerate(const std::vector<double>& a, const std::vector<double>& b) {
    constexpr double kTinyVar = 1e-30;
    if (sample_variance(a) <= kTinyVar && sample_variance(b) <= kTinyVar) {
        return std::fabs(sample_mean(a) - sample_mean(b)) <= 1e-12 ? 1.0 : 0.0;
    }
    return welch_test(a, b);
}

struct WindowSample {
    Eigen::MatrixXd input;  // [window x 1]
    double target = 0;      // value `horizon` steps beyond the window end
};

std::vector<WindowSample> make_windows(const data::TraceSet& set, const TstrConfig& cfg) {
    std::vector<WindowSample> out;
    for (const auto& trace : set.traces) {
        const auto norm = data::normalize(trace);
        const long T = static_cast<long>(norm.values.size());
        const long last_start = T - cfg.window - cfg.horizon;
        for (long start = 0; start <= last_start; start += cfg.stride) {
            WindowSample w;
            w.input.resize(cfg.window, 1);
            for (int k = 0; k < cfg.window; ++k) {
                w.input(k, 0) = norm.values[static_cast<std::size_t>(start + k)];
            }
            w.target = norm.values[static_cast<std::size_t>(start + cfg.window - 1 + cfg.horizon)];
            out.push_back(std::move(w));
        }
    }
    return out;
}

double forecast(const nn::RecurrentNet& net, const Eigen::MatrixXd& window) {
    const nn::NetTrace trace = nn::net_forward(net, window);
    return trace.outputs(trace.outputs.rows() - 1, 0);
}

nn::RecurrentNet train_forecaster(const std::vector<WindowSample>& windows,
                                  const TstrConfig& cfg, uint64_t seed) {
    nn::RecurrentNet net = nn::make_net(1, cfg.hidden, 1, nn::Squash::None, seed);
    std::optional<nn::AdamState> adam;
    adam.emplace();
    std::vector<std::size_t> perm(windows.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng = Rng(seed).fork({0x747374ULL, static_cast<uint64_t>(epoch)});
        rng.shuffle(perm);
        const std::size_t batch = std::min(cfg.batch, windows.size());
        for (std::size_t begin = 0; begin < windows.size(); begin += batch) {
            const std::size_t end = std::min(begin + batch, windows.size());
            const auto b = static_cast<double>(end - begin);
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(nn::param_count(net));
            double loss = 0.0;
            for (std::size_t k = begin; k < end; ++k) {
                const WindowSample& w = windows[perm[k]];
                const nn::NetTrace trace = nn::net_forward(net, w.input);
                const long last = trace.outputs.rows() - 1;
                const double diff = trace.outputs(last, 0) - w.target;
                loss += diff * diff / b;
                Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(trace.outputs.rows(), 1);
                d_out(last, 0) = 2.0 * diff / b;
                grad += nn::flatten_grads(nn::net_backward(net, trace, d_out));
            }
            if (!std::isfinite(loss)) throw NumericError("forecaster training diverged");
            nn::apply_update(net, grad, cfg.learning_rate, adam);
        }
    }
    return net;
}

}  // namespace

TraceMetrics trace_metrics(const data::GlucoseTrace& trace) {
    const auto& v = trace.values;
    const auto T = static_cast<double>(v.size());
    if (v.empty()) throw ValidationError("empty trace");

    TraceMetrics m{};
    m.mean = sample_mean(v);
    m.variance = sample_variance(v);

    std::size_t in_range = 0, below = 0, above = 0;
    for (double x : v) {
        if (x < 70.0) {
            ++below;
        } else if (x > 180.0) {
            ++above;
        } else {
            ++in_range;
        }
    }
    m.tir = 100.0 * static_cast<double>(in_range) / T;
    m.hypo = 100.0 * static_cast<double>(below) / T;
    m.hyper = 100.0 * static_cast<double>(above) / T;

    if (v.size() < 2) {
        m.gvi = 1.0;
    } else {
        double polyline = 0.0;
        for (std::size_t t = 0; t + 1 < v.size(); ++t) {
            const double dv = v[t + 1] - v[t];
            polyline += std::sqrt(1.0 + dv * dv);
        }
        const double span = static_cast<double>(v.size() - 1);
        const double rise = v.back() - v.front();
        m.gvi = polyline / std::sqrt(span * span + rise * rise);
    }
    m.pgs = m.gvi * m.mean * (1.0 - m.tir / 100.0);
    return m;
}

GlycemicReport glycemic_metrics(const data::TraceSet& set, const data::TraceSet* reference) {
    if (set.empty()) throw ValidationError("glycemic metrics need a nonempty trace set");

    const auto collect = [](const data::TraceSet& s) {
        std::array<std::vector<double>, 6> cols;  // variance,tir,hypo,hyper,gvi,pgs
        for (const auto& trace : s.traces) {
            const TraceMetrics m = trace_metrics(trace);
            cols[0].push_back(m.variance);
            cols[1].push_back(m.tir);
            cols[2].push_back(m.hypo);
            cols[3].push_back(m.hyper);
            cols[4].push_back(m.gvi);
            cols[5].push_back(m.pgs);
        }
        return cols;
    };

    const auto cols = collect(set);
    GlycemicReport report;
    report.variance = sample_mean(cols[0]);
    report.tir = sample_mean(cols[1]);
    report.hypo = sample_mean(cols[2]);
    report.hyper = sample_mean(cols[3]);
    report.gvi = sample_mean(cols[4]);
    report.pgs = sample_mean(cols[5]);

    if (reference) {
        if (reference->empty()) throw ValidationError("reference trace set is empty");
        const auto ref_cols = collect(*reference);
        GlycemicReport::PValues p{};
        p.variance = p_value_or_degenerate(cols[0], ref_cols[0]);
        p.tir = p_value_or_degenerate(cols[1], ref_cols[1]);
        p.hypo = p_value_or_degenerate(cols[2], ref_cols[2]);
        p.hyper = p_value_or_degenerate(cols[3], ref_cols[3]);
        p.gvi = p_value_or_degenerate(cols[4], ref_cols[4]);
        p.pgs = p_value_or_degenerate(cols[5], ref_cols[5]);
        report.p = p;
    }
    return report;
}

double student_t_two_sided_p(double t, double dof) {
    if (dof <= 0.0) throw ValidationError("degrees of freedom must be positive");
    const double x = dof / (dof + t * t);
    return reg_inc_beta(dof / 2.0, 0.5, x);
}

double welch_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) {
        throw ValidationError("welch test needs at least 2 samples per side");
    }
    const double va = sample_variance(a);
    const double vb = sample_variance(b);
    if (va <= 0.0 && vb <= 0.0) {
        throw ValidationError("welch test needs nonzero variance in at least one sample");
    }
    const auto na = static_cast<double>(a.size());
    const auto nb = static_cast<double>(b.size());
    const double se2 = va / na + vb / nb;
    const double t = (sample_mean(a) - sample_mean(b)) / std::sqrt(se2);
    const double dof =
        se2 * se2 /
        ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    return student_t_two_sided_p(t, dof);
}

std::vector<std::size_t> variance_histogram(const data::TraceSet& set,
                                            const std::vector<double>& edges) {
    if (edges.size() < 2) throw ValidationError("histogram needs at least 2 edges");
    std::vector<std::size_t> counts(edges.size() - 1, 0);
    for (const auto& trace : set.traces) {
        const double v = trace_metrics(trace).variance;
        std::size_t bin = 0;
        while (bin + 2 < edges.size() && v >= edges[bin + 1]) ++bin;
        ++counts[bin];
    }
    return counts;
}

Eigen::MatrixXd pca2(const data::TraceSet& set) {
    if (set.empty()) throw ValidationError("pca needs traces");
    const auto n = static_cast<long>(set.size());
    const auto T = static_cast<long>(set.traces.front().values.size());

    Eigen::MatrixXd x(n, T);
    for (long i = 0; i < n; ++i) {
        const auto& v = set.traces[static_cast<std::size_t>(i)].values;
        if (static_cast<long>(v.size()) != T) throw ValidationError("trace length mismatch");
        for (long t = 0; t < T; ++t) x(i, t) = v[static_cast<std::size_t>(t)];
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);

    constexpr double kTol = 1e-9;
    constexpr int kMaxIter = 20000;
    Eigen::MatrixXd axes(T, 2);
    for (int comp = 0; comp < 2; ++comp) {
        // Deterministic pseudo-random start to avoid orthogonal stalls.
        Rng rng(0x50ca2ULL + static_cast<uint64_t>(comp));
        Eigen::VectorXd v(T);
        for (long t = 0; t < T; ++t) v[t] = rng.uniform(-1.0, 1.0);
        v.normalize();

        for (int it = 0; it < kMaxIter; ++it) {
            Eigen::VectorXd w = cov * v;
            const double norm = w.norm();
            if (norm < 1e-300) break;  // zero covariance; keep current direction
            w /= norm;
            if ((w - v).norm() < kTol || (w + v).norm() < kTol) {
                v = w;
                break;
            }
            v = w;
        }
        // Canonical sign: the largest-magnitude coordinate is positive.
        long arg_max = 0;
        v.cwiseAbs().maxCoeff(&arg_max);
        if (v[arg_max] < 0.0) v = -v;
        axes.col(comp) = v;

        const double eigenvalue = v.dot(cov * v);
        cov -= eigenvalue * v * v.transpose();
    }
    return centered * axes;
}

BreadthReport motif_coverage(const data::TraceSet& real, const data::TraceSet& synth,
                             std::size_t tau, double sigma) {
    if (real.empty() || synth.empty()) throw ValidationError("motif coverage needs both sets");
    const motif::MotifSet real_set = motif::build_motif_set(real, tau, sigma);
    const motif::MotifSet synth_set = motif::build_motif_set(synth, tau, sigma);

    BreadthReport report;
    report.real_motifs = real_set.size();
    report.synth_motifs = synth_set.size();

    // Map each synthetic motif onto the nearest real motif it matches, or a
    // private fake bin when it matches none.
    std::vector<long> mapping(synth_set.size(), -1);
    std::vector<bool> real_hit(real_set.size(), false);
    std::size_t true_motifs = 0;
    for (std::size_t j = 0; j < synth_set.size(); ++j) {
        double best = std::numeric_limits<double>::infinity();
        long best_idx = -1;
        for (std::size_t r = 0; r < real_set.size(); ++r) {
            if (!motif::matches(synth_set.motifs[j].values, real_set.motifs[r].values, sigma)) {
                continue;
            }
            const double d =
                motif::l1_distance(synth_set.motifs[j].values, real_set.motifs[r].values);
            if (d < best) {
                best = d;
                best_idx = static_cast<long>(r);
            }
            real_hit[r] = true;
        }
        mapping[j] = best_idx;
        if (best_idx >= 0) ++true_motifs;
    }

    report.pct_tm = static_cast<double>(true_motifs) / static_cast<double>(synth_set.size());
    report.pct_fm = 1.0 - report.pct_tm;
    std::size_t covered = 0;
    for (bool hit : real_hit) covered += hit ? 1 : 0;
    report.coverage = static_cast<double>(covered) / static_cast<double>(real_set.size());

    // Occurrence distributions over the union vocabulary: real motifs first,
    // then one bin per unmatched synthetic motif.
    std::size_t fake_bins = 0;
    std::vector<std::size_t> fake_bin_of(synth_set.size(), 0);
    for (std::size_t j = 0; j < synth_set.size(); ++j) {
        if (mapping[j] < 0) fake_bin_of[j] = real_set.size() + fake_bins++;
    }
    const std::size_t vocab = real_set.size() + fake_bins;
    std::vector<double> real_freq(vocab, 0.0), synth_freq(vocab, 0.0);

    std::size_t real_total = 0;
    for (const auto& trace : real.traces) {
        for (int idx : motif::encode(trace, real_set).indices) {
            real_freq[static_cast<std::size_t>(idx)] += 1.0;
            ++real_total;
        }
    }
    std::size_t synth_total = 0;
    for (const auto& trace : synth.traces) {
        for (int idx : motif::encode(trace, synth_set).indices) {
            const auto j = static_cast<std::size_t>(idx);
            const std::size_t bin =
                mapping[j] >= 0 ? static_cast<std::size_t>(mapping[j]) : fake_bin_of[j];
            synth_freq[bin] += 1.0;
            ++synth_total;
        }
    }
    for (auto& f : real_freq) f /= static_cast<double>(real_total);
    for (auto& f : synth_freq) f /= static_cast<double>(synth_total);

    double mse = 0.0;
    for (std::size_t k = 0; k < vocab; ++k) {
        const double d = real_freq[k] - synth_freq[k];
        mse += d * d;
    }
    report.mse = mse / static_cast<double>(vocab);
    return report;
}

ClarkeZone clarke_zone(double reference, double prediction) {
    if (!(reference > 0.0 && reference < 1000.0 && prediction > 0.0 && prediction < 1000.0)) {
        throw ValidationError("clarke zone inputs must lie in (0, 1000) mg/dL");
    }
    const double ref = reference;
    const double pred = prediction;
    if (std::fabs(ref - pred) <= 0.2 * ref || (ref < 70.0 && pred < 70.0)) {
        return ClarkeZone::A;
    }
    if ((ref >= 180.0 && pred <= 70.0) || (ref <= 70.0 && pred >= 180.0)) {
        return ClarkeZone::E;
    }
    if ((ref >= 70.0 && ref <= 290.0 && pred >= ref + 110.0) ||
        (ref >= 130.0 && ref <= 180.0 && pred <= (7.0 / 5.0) * ref - 182.0)) {
        return ClarkeZone::C;
    }
    if ((ref >= 240.0 && pred >= 70.0 && pred <= 180.0) ||
        (ref <= 175.0 / 3.0 && pred >= 70.0 && pred <= 180.0) ||
        (ref >= 175.0 / 3.0 && ref <= 70.0 && pred >= (6.0 / 5.0) * ref)) {
        return ClarkeZone::D;
    }
    return ClarkeZone::B;
}

char clarke_zone_letter(ClarkeZone zone) {
    switch (zone) {
        case ClarkeZone::A: return 'A';
        case ClarkeZone::B: return 'B';
        case ClarkeZone::C: return 'C';
        case ClarkeZone::D: return 'D';
        case ClarkeZone::E: return 'E';
    }
    return '?';
}

ClarkeSummary clarke_summary(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.empty()) throw ValidationError("clarke summary needs pairs");
    ClarkeSummary summary;
    for (const auto& [ref, pred] : pairs) {
        summary.fraction[static_cast<std::size_t>(clarke_zone(ref, pred))] += 1.0;
    }
    for (auto& f : summary.fraction) f /= static_cast<double>(pairs.size());
    return summary;
}

double persistence_rmse(const data::TraceSet& test, const TstrConfig& cfg) {
    const auto windows = make_windows(test, cfg);
    if (windows.empty()) throw ValidationError("no evaluation windows; check window/horizon");
    double sum = 0.0;
    for (const auto& w : windows) {
        const double pred = w.input(w.input.rows() - 1, 0);
        sum += (pred - w.target) * (pred - w.target);
    }
    return std::sqrt(sum / static_cast<double>(windows.size()));
}

TstrReport tstr(const data::TraceSet& train, const data::TraceSet& test, const TstrConfig& cfg) {
    if (train.empty() || test.empty()) throw ValidationError("tstr needs both trace sets");
    const long T = static_cast<long>(train.traces.front().values.size());
    if (cfg.window + cfg.horizon >= T) {
        throw ValidationError("window plus horizon must be smaller than the trace length");
    }
    const auto train_windows = make_windows(train, cfg);
    const auto test_windows = make_windows(test, cfg);
    if (train_windows.empty() || test_windows.empty()) {
        throw ValidationError("no training or evaluation windows");
    }

    std::vector<double> rmses;
    std::vector<std::pair<double, double>> pairs;
    for (int repeat = 0; repeat < cfg.repeats; ++repeat) {
        const uint64_t seed = mix_seed(cfg.seed, 0x72657065ULL + static_cast<uint64_t>(repeat));
        const nn::RecurrentNet net = train_forecaster(train_windows, cfg, seed);
        double sum = 0.0;
        for (const auto& w : test_windows) {
            const double pred = forecast(net, w.input);
            sum += (pred - w.target) * (pred - w.target);
            const double ref_mgdl = data::denormalize_value(w.target);
            const double pred_mgdl =
                std::clamp(data::denormalize_value(pred), data::kGlucoseMin, data::kGlucoseMax);
            pairs.emplace_back(ref_mgdl, pred_mgdl);
        }
        rmses.push_back(std::sqrt(sum / static_cast<double>(test_windows.size())));
    }

    TstrReport report;
    report.rmse_mean = sample_mean(rmses);
    report.rmse_std = rmses.size() > 1 ? std::sqrt(sample_variance(rmses)) : 0.0;
    report.clarke = clarke_summary(pairs);
    return report;
}

}  // namespace forge::eval
