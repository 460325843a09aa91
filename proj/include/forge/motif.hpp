#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "forge/data.hpp"

namespace forge::motif {

// A tau-length chunk of trace values (mg/dL).  Two chunks match when every
// coordinate differs by at most the tolerance sigma.
struct Motif {
    std::vector<double> values;
    int index = 0;
};

struct MotifSet {
    std::vector<Motif> motifs;
    std::size_t tau = 0;
    double sigma = 0.0;
    // Chunk counts absorbed by each motif during the building pass (dropped
    // motifs fold their counts into the nearest kept one).
    std::vector<std::size_t> build_counts;

    std::size_t size() const { return motifs.size(); }
};

// A trace re-expressed as motif indices, one per non-overlapping chunk.
// fallback[k] marks chunks that matched nothing and were assigned the
// globally L1-nearest motif instead.
struct MotifSequence {
    std::string trace_id;
    std::vector<int> indices;
    std::vector<uint8_t> fallback;
};

// Non-overlapping consecutive windows; a trailing remainder shorter than tau
// is dropped.  Throws when tau is zero or exceeds the trace length.
std::vector<std::vector<double>> chunk(const data::GlucoseTrace& trace, std::size_t tau);

// True iff |a_k - b_k| <= sigma for every coordinate.
bool matches(const std::vector<double>& a, const std::vector<double>& b, double sigma);

double l1_distance(const std::vector<double>& a, const std::vector<double>& b);

// Greedy first-fit dedup over all chunks in trace order, then chunk order.
// When max_motifs > 0 and the vocabulary overflows, the most frequent motifs
// are kept (stable order) and dropped ones fold into their nearest survivor.
MotifSet build_motif_set(const data::TraceSet& set, std::size_t tau, double sigma,
                         std::size_t max_motifs = 0);

// Chunk-wise lookup: among motifs matching within sigma pick the least-L1
// one (ties to the lowest index); chunks matching nothing fall back to the
// globally L1-nearest motif and are flagged.
MotifSequence encode(const data::GlucoseTrace& trace, const MotifSet& set);

// Values need not respect glucose bounds here; generator batches drift
// outside them mid-training.
MotifSequence encode_values(const std::vector<double>& values, const std::string& id,
                            const MotifSet& set);

// One-hot series for a single sequence: entry (t, j) = 1 iff motif j occurs
// at motif-step t.  Throws when an index is out of range.
Eigen::MatrixXd indicator_series(const MotifSequence& seq, std::size_t m);
std::vector<Eigen::MatrixXd> indicator_series(const std::vector<MotifSequence>& seqs,
                                              std::size_t m);

// CSV (`index,v0..v{tau-1}`) plus JSON sidecar with tau, sigma, m.
void save_motif_set(const std::string& csv_path, const std::string& sidecar_path,
                    const MotifSet& set, const std::string& config_hash);
MotifSet load_motif_set(const std::string& csv_path, const std::string& sidecar_path);

}  // namespace forge::motif
