#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace forge {

// Deterministic random source.  All sampling routines are hand-rolled on top
// of a fixed generator so that a given seed reproduces the same stream on any
// platform and standard library.  Independent streams are derived from a base
// seed with fork(); forks never share state with the parent.
class Rng {
  public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Uniform integer in [lo, hi] inclusive, rejection sampled.
    int64_t uniform_int(int64_t lo, int64_t hi);
    // Standard normal via Box-Muller (two uniforms per draw, no caching).
    double normal();
    double normal(double mean, double stddev);
    // Laplace with location 0 and the given scale.
    double laplace(double scale);
    // +1 or -1 with equal probability.
    int rademacher();

    // In-place Fisher-Yates shuffle of 0..n-1 index vectors.
    void shuffle(std::vector<std::size_t>& items);

    // Child stream keyed by one or more labels, e.g. fork({epoch, phase}).
    Rng fork(std::initializer_list<uint64_t> keys) const;

  private:
    uint64_t state_;
};

// splitmix64 step; exposed for stable seed derivation elsewhere.
uint64_t mix_seed(uint64_t a, uint64_t b);

}  // namespace forge
