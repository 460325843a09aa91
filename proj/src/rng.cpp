#include "forge/rng.hpp"

#include <cmath>

namespace forge {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(uint64_t seed) : state_(seed) {
    // Warm up so that small consecutive seeds do not yield correlated streams.
    splitmix64(state_);
    splitmix64(state_);
}

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t draw;
    do {
        draw = next_u64();
    } while (draw >= limit);
    return lo + static_cast<int64_t>(draw % span);
}

double Rng::normal() {
    // Box-Muller; u1 is kept away from 0 so the log is finite.
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double Rng::normal(double mean, double stddev) { return mean + stddev * normal(); }

double Rng::laplace(double scale) {
    const double u = uniform() - 0.5;
    const double sign = u < 0.0 ? -1.0 : 1.0;
    return -scale * sign * std::log(1.0 - 2.0 * std::fabs(u));
}

int Rng::rademacher() { return (next_u64() & 1ULL) ? 1 : -1; }

void Rng::shuffle(std::vector<std::size_t>& items) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<int64_t>(i)));
        std::swap(items[i], items[j]);
    }
}

Rng Rng::fork(std::initializer_list<uint64_t> keys) const {
    uint64_t derived = state_;
    for (uint64_t k : keys) derived = mix_seed(derived, k);
    return Rng(derived);
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64(x);
}

}  // namespace forge
