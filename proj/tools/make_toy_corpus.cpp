// Writes the seeded benchmark corpus used by the test and acceptance suites.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "forge/data.hpp"
#include "forge/toy.hpp"

int main(int argc, char** argv) {
    CLI::App app{"make_toy_corpus: seeded glucose-like benchmark traces"};
    std::string out = "toy_corpus.csv";
    forge::toy::ToyConfig cfg;
    app.add_option("--out", out, "output CSV path");
    app.add_option("--traces", cfg.traces, "number of traces");
    app.add_option("--seed", cfg.seed, "corpus seed");
    app.add_option("--jitter", cfg.jitter, "uniform jitter amplitude (mg/dL)");
    CLI11_PARSE(app, argc, argv);

    try {
        const auto corpus = forge::toy::make_corpus(cfg);
        forge::data::write_traces(out, corpus);
        std::printf("%zu traces (T=%zu, tau=%zu) written to %s\n", corpus.size(), cfg.T, cfg.tau,
                    out.c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
