#include "forge/toy.hpp"

#include <cstdio>

#include "forge/error.hpp"
#include "forge/rng.hpp"

namespace forge::toy {

const std::vector<std::vector<double>>& templates() {
    // Plateau vocabulary: six steady glucose states, pairwise 30+ mg/dL apart
    // so jittered copies of different templates never match within the
    // benchmark tolerance.  The chain below visits template 0 twice as often
    // as the others; its level is chosen so the occupancy-weighted corpus
    // mean is itself template 0.
    static const std::vector<std::vector<double>> kTemplates = {
        {160, 160, 160, 160, 160, 160, 160, 160},  // mid range
        {55, 55, 55, 55, 55, 55, 55, 55},          // overnight low
        {95, 95, 95, 95, 95, 95, 95, 95},          // fasting
        {125, 125, 125, 125, 125, 125, 125, 125},  // late post-meal
        {230, 230, 230, 230, 230, 230, 230, 230},  // high
        {295, 295, 295, 295, 295, 295, 295, 295},  // sustained hyper
    };
    return kTemplates;
}

data::TraceSet make_corpus(const ToyConfig& cfg) {
    const auto& temps = templates();
    const auto n_templates = static_cast<int64_t>(temps.size());
    if (cfg.tau != temps.front().size()) {
        throw ValidationError("toy corpus requires tau = " +
                              std::to_string(temps.front().size()));
    }
    if (cfg.T % cfg.tau != 0) throw ValidationError("toy corpus requires tau dividing T");
    const std::size_t steps = cfg.T / cfg.tau;
    if (cfg.traces < 2) throw ValidationError("toy corpus needs at least 2 traces");

    Rng rng(mix_seed(cfg.seed, 0x746f79ULL));  // stream tag: "toy"
    data::TraceSet set;
    set.traces.reserve(cfg.traces);
    char id_buf[32];
    for (std::size_t i = 0; i < cfg.traces; ++i) {
        data::GlucoseTrace trace;
        std::snprintf(id_buf, sizeof(id_buf), "toy-%04zu", i);
        trace.id = id_buf;
        trace.values.reserve(cfg.T);

        int state = -1;
        for (std::size_t s = 0; s < steps; ++s) {
            int pick;
            if (i == 0) {
                // Seed trace walks every template once, in index order.
                pick = static_cast<int>(s % temps.size());
            } else if (state == kRuleSource) {
                pick = kRuleTarget;
            } else {
                pick = static_cast<int>(rng.uniform_int(0, n_templates - 1));
            }
            for (double v : temps[static_cast<std::size_t>(pick)]) {
                trace.values.push_back(v + rng.uniform(-cfg.jitter, cfg.jitter));
            }
            state = pick;
        }
        set.traces.push_back(std::move(trace));
    }
    return set;
}

}  // namespace forge::toy
