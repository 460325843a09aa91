#include "forge/motif.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "forge/error.hpp"

namespace forge::motif {

namespace {

// Given per-motif counts, indices of the top `keep` motifs by count, ties
// resolved toward lower index, result sorted ascending (stable order).
std::vector<std::size_t> most_frequent(const std::vector<std::size_t>& counts, std::size_t keep) {
    std::vector<std::size_t> order(counts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (counts[a] != counts[b]) return counts[a] > counts[b];
        return a < b;
    });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace

std::vector<std::vector<double>> chunk(const data::GlucoseTrace& trace, std::size_t tau) {
    if (tau == 0) throw ValidationError("chunk length must be positive");
    const std::size_t T = trace.values.size();
    if (tau > T) {
        throw ValidationError("chunk length " + std::to_string(tau) + " exceeds trace length " +
                              std::to_string(T));
    }
    const std::size_t windows = T / tau;
    std::vector<std::vector<double>> out;
    out.reserve(windows);
    for (std::size_t w = 0; w < windows; ++w) {
        out.emplace_back(trace.values.begin() + static_cast<long>(w * tau),
                         trace.values.begin() + static_cast<long>((w + 1) * tau));
    }
    return out;
}

bool matches(const std::vector<double>& a, const std::vector<double>& b, double sigma) {
    if (a.size() != b.size()) {
        throw ValidationError("match length mismatch: " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (std::fabs(a[k] - b[k]) > sigma) return false;
    }
    return true;
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d += std::fabs(a[k] - b[k]);
    return d;
}

MotifSet build_motif_set(const data::TraceSet& set, std::size_t tau, double sigma,
                         std::size_t max_motifs) {
    if (set.empty()) throw ValidationError("cannot build a motif set from an empty trace set");
    MotifSet ms;
    ms.tau = tau;
    ms.sigma = sigma;
    for (const auto& trace : set.traces) {
        for (auto& window : chunk(trace, tau)) {
            bool found = false;
            for (std::size_t j = 0; j < ms.motifs.size(); ++j) {
                if (matches(window, ms.motifs[j].values, sigma)) {
                    ++ms.build_counts[j];
                    found = true;
                    break;
                }
            }
            if (!found) {
                Motif m;
                m.values = std::move(window);
                m.index = static_cast<int>(ms.motifs.size());
                ms.motifs.push_back(std::move(m));
                ms.build_counts.push_back(1);
            }
        }
    }

    if (max_motifs > 0 && ms.motifs.size() > max_motifs) {
        const auto kept = most_frequent(ms.build_counts, max_motifs);
        std::vector<Motif> survivors;
        std::vector<std::size_t> counts;
        survivors.reserve(kept.size());
        counts.reserve(kept.size());
        for (std::size_t idx : kept) {
            Motif m = ms.motifs[idx];
            m.index = static_cast<int>(survivors.size());
            survivors.push_back(std::move(m));
            counts.push_back(ms.build_counts[idx]);
        }
        // Fold dropped occurrence counts into the nearest survivor.
        std::vector<bool> is_kept(ms.motifs.size(), false);
        for (std::size_t idx : kept) is_kept[idx] = true;
        for (std::size_t j = 0; j < ms.motifs.size(); ++j) {
            if (is_kept[j]) continue;
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_idx = 0;
            for (std::size_t s = 0; s < survivors.size(); ++s) {
                const double d = l1_distance(ms.motifs[j].values, survivors[s].values);
                if (d < best) {
                    best = d;
                    best_idx = s;
                }
            }
            counts[best_idx] += ms.build_counts[j];
        }
        ms.motifs = std::move(survivors);
        ms.build_counts = std::move(counts);
    }
    return ms;
}

MotifSequence encode_values(const std::vector<double>& values, const std::string& id,
                            const MotifSet& set) {
    if (set.motifs.empty()) throw ValidationError("cannot encode against an empty motif set");
    data::GlucoseTrace tmp{id, values};
    MotifSequence seq;
    seq.trace_id = id;
    for (const auto& window : chunk(tmp, set.tau)) {
        double best_matching = std::numeric_limits<double>::infinity();
        int best_matching_idx = -1;
        double best_any = std::numeric_limits<double>::infinity();
        int best_any_idx = 0;
        for (const auto& m : set.motifs) {
            const double d = l1_distance(window, m.values);
            if (d < best_any) {
                best_any = d;
                best_any_idx = m.index;
            }
            if (matches(window, m.values, set.sigma) && d < best_matching) {
                best_matching = d;
                best_matching_idx = m.index;
            }
        }
        if (best_matching_idx >= 0) {
            seq.indices.push_back(best_matching_idx);
            seq.fallback.push_back(0);
        } else {
            seq.indices.push_back(best_any_idx);
            seq.fallback.push_back(1);
        }
    }
    return seq;
}

MotifSequence encode(const data::GlucoseTrace& trace, const MotifSet& set) {
    return encode_values(trace.values, trace.id, set);
}

Eigen::MatrixXd indicator_series(const MotifSequence& seq, std::size_t m) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<long>(seq.indices.size()),
                                                static_cast<long>(m));
    for (std::size_t t = 0; t < seq.indices.size(); ++t) {
        const int j = seq.indices[t];
        if (j < 0 || static_cast<std::size_t>(j) >= m) {
            throw ValidationError("motif index " + std::to_string(j) + " out of range at step " +
                                  std::to_string(t));
        }
        out(static_cast<long>(t), j) = 1.0;
    }
    return out;
}

std::vector<Eigen::MatrixXd> indicator_series(const std::vector<MotifSequence>& seqs,
                                              std::size_t m) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(seqs.size());
    for (const auto& s : seqs) {
        if (!out.empty() && s.indices.size() != seqs.front().indices.size()) {
            throw ValidationError("motif sequences differ in length");
        }
        out.push_back(indicator_series(s, m));
    }
    return out;
}

void save_motif_set(const std::string& csv_path, const std::string& sidecar_path,
                    const MotifSet& set, const std::string& config_hash) {
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot write " + csv_path);
    char buf[64];
    for (const auto& m : set.motifs) {
        csv << m.index;
        for (double v : m.values) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            csv << ',' << buf;
        }
        csv << "\n";
    }
    if (!csv) throw IoError("write failed: " + csv_path);

    nlohmann::json sidecar{{"tau", set.tau},
                           {"sigma", set.sigma},
                           {"m", set.motifs.size()},
                           {"config_hash", config_hash}};
    std::ofstream side(sidecar_path);
    if (!side) throw IoError("cannot write " + sidecar_path);
    side << sidecar.dump(2) << "\n";
}

MotifSet load_motif_set(const std::string& csv_path, const std::string& sidecar_path) {
    std::ifstream side(sidecar_path);
    if (!side) throw IoError("cannot open " + sidecar_path);
    nlohmann::json sidecar;
    side >> sidecar;

    MotifSet set;
    set.tau = sidecar.at("tau").get<std::size_t>();
    set.sigma = sidecar.at("sigma").get<double>();
    const auto expected_m = sidecar.at("m").get<std::size_t>();

    std::ifstream csv(csv_path);
    if (!csv) throw IoError("cannot open " + csv_path);
    std::string line;
    while (std::getline(csv, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Motif m;
        std::size_t pos = 0;
        std::size_t field = 0;
        while (pos <= line.size()) {
            const auto comma = line.find(',', pos);
            const std::string token =
                line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            if (field == 0) {
                m.index = std::stoi(token);
            } else {
                m.values.push_back(std::stod(token));
            }
            ++field;
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (m.values.size() != set.tau) {
            throw ValidationError("motif row length " + std::to_string(m.values.size()) +
                                  " does not match tau " + std::to_string(set.tau));
        }
        set.motifs.push_back(std::move(m));
    }
    if (set.motifs.size() != expected_m) {
        throw ValidationError("motif count mismatch: sidecar says " + std::to_string(expected_m) +
                              ", csv has " + std::to_string(set.motifs.size()));
    }
    return set;
}

}  // namespace forge::motif
