#include "forge/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "forge/error.hpp"

namespace forge::config {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& scope) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.contains(key)) {
            throw ConfigError("unknown key '" + key + "' in " + scope);
        }
    }
}

template <typename T>
T field(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

double epsilon_field(const json& obj, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
        throw ConfigError("epsilon must be a number or \"inf\"");
    }
    return v.get<double>();
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown_keys(doc,
                        {"data", "motif", "causality", "privacy", "gan", "eval",
                         "generate_count", "seed", "out"},
                        "config");

    PipelineConfig cfg;
    cfg.seed = field<uint64_t>(doc, "seed", cfg.seed);
    cfg.out_dir = field<std::string>(doc, "out", cfg.out_dir);
    cfg.generate_count = field<std::size_t>(doc, "generate_count", cfg.generate_count);

    if (doc.contains("data")) {
        const auto& d = doc.at("data");
        reject_unknown_keys(d, {"path", "T", "causality_fraction"}, "data");
        cfg.data.path = field<std::string>(d, "path", cfg.data.path);
        cfg.data.trace_length = field<std::size_t>(d, "T", cfg.data.trace_length);
        cfg.data.causality_fraction =
            field<double>(d, "causality_fraction", cfg.data.causality_fraction);
    }
    if (doc.contains("motif")) {
        const auto& m = doc.at("motif");
        reject_unknown_keys(m, {"tau", "sigma", "max_motifs"}, "motif");
        cfg.motif.tau = field<std::size_t>(m, "tau", cfg.motif.tau);
        cfg.motif.sigma = field<double>(m, "sigma", cfg.motif.sigma);
        cfg.motif.max_motifs = field<std::size_t>(m, "max_motifs", cfg.motif.max_motifs);
    }
    if (doc.contains("causality")) {
        const auto& c = doc.at("causality");
        reject_unknown_keys(c, {"hidden", "learning_rate", "lambda", "epochs", "inner_steps"},
                            "causality");
        cfg.causality.hidden = field<int>(c, "hidden", cfg.causality.hidden);
        cfg.causality.learning_rate = field<double>(c, "learning_rate", cfg.causality.learning_rate);
        cfg.causality.lambda = field<double>(c, "lambda", cfg.causality.lambda);
        cfg.causality.epochs = field<int>(c, "epochs", cfg.causality.epochs);
        cfg.causality.inner_steps = field<int>(c, "inner_steps", cfg.causality.inner_steps);
    }
    if (doc.contains("privacy")) {
        const auto& p = doc.at("privacy");
        reject_unknown_keys(p, {"epsilon", "delta", "partitions", "bins", "dpsgd_clip_norm",
                                "dpsgd_noise_multiplier"},
                            "privacy");
        cfg.privacy.budget.epsilon = epsilon_field(p, "epsilon", cfg.privacy.budget.epsilon);
        cfg.privacy.budget.delta = field<double>(p, "delta", cfg.privacy.budget.delta);
        cfg.privacy.pate.n_partitions =
            field<std::size_t>(p, "partitions", cfg.privacy.pate.n_partitions);
        cfg.privacy.pate.bins = field<std::size_t>(p, "bins", cfg.privacy.pate.bins);
        cfg.privacy.dpsgd_clip_norm = field<double>(p, "dpsgd_clip_norm", cfg.privacy.dpsgd_clip_norm);
        cfg.privacy.dpsgd_noise_multiplier =
            field<double>(p, "dpsgd_noise_multiplier", cfg.privacy.dpsgd_noise_multiplier);
    }
    if (doc.contains("gan")) {
        const auto& g = doc.at("gan");
        reject_unknown_keys(
            g, {"embed_dim", "hidden_embedder", "hidden_recovery", "hidden_generator",
                "hidden_discriminator", "noise_dim", "alpha", "eta", "batch", "epochs",
                "lr_autoencoder", "lr_generator", "lr_discriminator", "optimizer", "optimizer_generator", "anchored_noise", "spsa_probes",
                "spsa_step", "refresh_every", "estimator_hidden", "estimator_lr",
                "estimator_lambda", "estimator_inner_steps"},
            "gan");
        cfg.gan.embed_dim = field<int>(g, "embed_dim", cfg.gan.embed_dim);
        cfg.gan.hidden_embedder = field<int>(g, "hidden_embedder", cfg.gan.hidden_embedder);
        cfg.gan.hidden_recovery = field<int>(g, "hidden_recovery", cfg.gan.hidden_recovery);
        cfg.gan.hidden_generator = field<int>(g, "hidden_generator", cfg.gan.hidden_generator);
        cfg.gan.hidden_discriminator =
            field<int>(g, "hidden_discriminator", cfg.gan.hidden_discriminator);
        cfg.gan.noise_dim = field<int>(g, "noise_dim", cfg.gan.noise_dim);
        cfg.gan.alpha = field<double>(g, "alpha", cfg.gan.alpha);
        cfg.gan.eta = field<double>(g, "eta", cfg.gan.eta);
        cfg.gan.batch = field<std::size_t>(g, "batch", cfg.gan.batch);
        cfg.gan.epochs = field<long>(g, "epochs", cfg.gan.epochs);
        cfg.gan.lr_autoencoder = field<double>(g, "lr_autoencoder", cfg.gan.lr_autoencoder);
        cfg.gan.lr_generator = field<double>(g, "lr_generator", cfg.gan.lr_generator);
        cfg.gan.lr_discriminator = field<double>(g, "lr_discriminator", cfg.gan.lr_discriminator);
        const auto opt = field<std::string>(g, "optimizer", "sgd");
        if (opt == "sgd") {
            cfg.gan.optimizer = gan::Optimizer::Sgd;
        } else if (opt == "adam") {
            cfg.gan.optimizer = gan::Optimizer::Adam;
        } else {
            throw ConfigError("optimizer must be \"sgd\" or \"adam\"");
        }
        if (g.contains("optimizer_generator")) {
            const auto opt_g = field<std::string>(g, "optimizer_generator", "sgd");
            if (opt_g == "sgd") {
                cfg.gan.optimizer_generator = gan::Optimizer::Sgd;
            } else if (opt_g == "adam") {
                cfg.gan.optimizer_generator = gan::Optimizer::Adam;
            } else {
                throw ConfigError("optimizer_generator must be \"sgd\" or \"adam\"");
            }
        }
        cfg.gan.anchored_noise = field<bool>(g, "anchored_noise", cfg.gan.anchored_noise);
        cfg.gan.spsa.probes = field<int>(g, "spsa_probes", cfg.gan.spsa.probes);
        cfg.gan.spsa.step = field<double>(g, "spsa_step", cfg.gan.spsa.step);
        cfg.gan.refresh_every = field<long>(g, "refresh_every", cfg.gan.refresh_every);
        cfg.gan.estimator.hidden = field<int>(g, "estimator_hidden", cfg.gan.estimator.hidden);
        cfg.gan.estimator.learning_rate = field<double>(g, "estimator_lr", cfg.gan.estimator.learning_rate);
        cfg.gan.estimator.lambda = field<double>(g, "estimator_lambda", cfg.gan.estimator.lambda);
        cfg.gan.estimator.inner_steps =
            field<int>(g, "estimator_inner_steps", cfg.gan.estimator.inner_steps);
    }
    if (doc.contains("eval")) {
        const auto& e = doc.at("eval");
        reject_unknown_keys(e, {"synthetic_path", "variance_bin_width", "variance_max",
                                "tstr_window", "tstr_horizon", "tstr_hidden", "tstr_epochs",
                                "tstr_stride", "tstr_repeats", "tstr_lr"},
                            "eval");
        cfg.eval.synthetic_path = field<std::string>(e, "synthetic_path", cfg.eval.synthetic_path);
        cfg.eval.variance_bin_width =
            field<double>(e, "variance_bin_width", cfg.eval.variance_bin_width);
        cfg.eval.variance_max = field<double>(e, "variance_max", cfg.eval.variance_max);
        cfg.eval.tstr.window = field<int>(e, "tstr_window", cfg.eval.tstr.window);
        cfg.eval.tstr.horizon = field<int>(e, "tstr_horizon", cfg.eval.tstr.horizon);
        cfg.eval.tstr.hidden = field<int>(e, "tstr_hidden", cfg.eval.tstr.hidden);
        cfg.eval.tstr.epochs = field<int>(e, "tstr_epochs", cfg.eval.tstr.epochs);
        cfg.eval.tstr.stride = field<int>(e, "tstr_stride", cfg.eval.tstr.stride);
        cfg.eval.tstr.repeats = field<int>(e, "tstr_repeats", cfg.eval.tstr.repeats);
        cfg.eval.tstr.learning_rate = field<double>(e, "tstr_lr", cfg.eval.tstr.learning_rate);
    }

    // Seeds for the trainers derive from the pipeline seed.
    cfg.causality.seed = cfg.seed;
    cfg.gan.seed = cfg.seed;
    cfg.gan.estimator.seed = cfg.seed;
    cfg.eval.tstr.seed = cfg.seed;

    require(cfg.data.trace_length > 0, "T must be positive");
    require(cfg.data.causality_fraction > 0.0 && cfg.data.causality_fraction < 1.0,
            "causality_fraction must lie in (0, 1)");
    require(cfg.motif.tau > 0 && cfg.motif.tau <= cfg.data.trace_length,
            "tau must lie in [1, T]");
    require(cfg.motif.sigma >= 0.0, "sigma must be nonnegative");
    require(cfg.causality.hidden > 0 && cfg.causality.epochs > 0 &&
                cfg.causality.learning_rate > 0.0 && cfg.causality.lambda >= 0.0 &&
                cfg.causality.inner_steps >= 0,
            "causality config values must be positive");
    require(cfg.privacy.budget.epsilon >= 0.0, "epsilon must be nonnegative");
    require(cfg.privacy.budget.delta >= 0.0 && cfg.privacy.budget.delta < 1.0,
            "delta must lie in [0, 1)");
    require(cfg.privacy.pate.n_partitions >= 1, "partitions must be at least 1");
    require(cfg.privacy.pate.bins >= 2, "bins must be at least 2");
    require(cfg.privacy.dpsgd_clip_norm > 0.0, "dpsgd_clip_norm must be positive");
    require(cfg.privacy.dpsgd_noise_multiplier >= 0.0,
            "dpsgd_noise_multiplier must be nonnegative");
    require(cfg.gan.alpha > 0.0 && cfg.gan.eta > 0.0, "alpha and eta must be positive");
    require(cfg.gan.embed_dim > 0 &&
                cfg.gan.embed_dim < static_cast<int>(cfg.data.trace_length),
            "embed_dim must lie in (0, T)");
    require(cfg.gan.batch > 0 && cfg.gan.epochs > 0, "gan batch and epochs must be positive");
    require(cfg.gan.spsa.probes >= 0 && cfg.gan.spsa.step > 0.0, "bad spsa settings");
    require(cfg.gan.refresh_every >= 1, "refresh_every must be at least 1");
    require(cfg.eval.tstr.window > 0 && cfg.eval.tstr.horizon > 0 &&
                cfg.eval.tstr.window + cfg.eval.tstr.horizon <
                    static_cast<int>(cfg.data.trace_length),
            "tstr window plus horizon must be smaller than T");
    require(cfg.eval.tstr.repeats >= 1 && cfg.eval.tstr.stride >= 1 && cfg.eval.tstr.hidden > 0,
            "bad tstr settings");
    require(cfg.generate_count > 0, "generate_count must be positive");
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string canonical_json(const PipelineConfig& cfg) {
    json doc;
    doc["seed"] = cfg.seed;
    doc["out"] = cfg.out_dir;
    doc["generate_count"] = cfg.generate_count;
    doc["data"] = {{"path", cfg.data.path},
                   {"T", cfg.data.trace_length},
                   {"causality_fraction", cfg.data.causality_fraction}};
    doc["motif"] = {{"tau", cfg.motif.tau},
                    {"sigma", cfg.motif.sigma},
                    {"max_motifs", cfg.motif.max_motifs}};
    doc["causality"] = {{"hidden", cfg.causality.hidden},
                        {"learning_rate", cfg.causality.learning_rate},
                        {"lambda", cfg.causality.lambda},
                        {"epochs", cfg.causality.epochs},
                        {"inner_steps", cfg.causality.inner_steps}};
    doc["privacy"] = {{"epsilon", std::isinf(cfg.privacy.budget.epsilon)
                                      ? json("inf")
                                      : json(cfg.privacy.budget.epsilon)},
                      {"delta", cfg.privacy.budget.delta},
                      {"partitions", cfg.privacy.pate.n_partitions},
                      {"bins", cfg.privacy.pate.bins},
                      {"dpsgd_clip_norm", cfg.privacy.dpsgd_clip_norm},
                      {"dpsgd_noise_multiplier", cfg.privacy.dpsgd_noise_multiplier}};
    doc["gan"] = {{"embed_dim", cfg.gan.embed_dim},
                  {"hidden_embedder", cfg.gan.hidden_embedder},
                  {"hidden_recovery", cfg.gan.hidden_recovery},
                  {"hidden_generator", cfg.gan.hidden_generator},
                  {"hidden_discriminator", cfg.gan.hidden_discriminator},
                  {"noise_dim", cfg.gan.noise_dim},
                  {"alpha", cfg.gan.alpha},
                  {"eta", cfg.gan.eta},
                  {"batch", cfg.gan.batch},
                  {"epochs", cfg.gan.epochs},
                  {"lr_autoencoder", cfg.gan.lr_autoencoder},
                  {"lr_generator", cfg.gan.lr_generator},
                  {"lr_discriminator", cfg.gan.lr_discriminator},
                  {"optimizer", cfg.gan.optimizer == gan::Optimizer::Adam ? "adam" : "sgd"},
                  {"optimizer_generator",
                   cfg.gan.optimizer_generator.has_value()
                       ? (*cfg.gan.optimizer_generator == gan::Optimizer::Adam ? "adam" : "sgd")
                       : "default"},
                  {"anchored_noise", cfg.gan.anchored_noise},
                  {"spsa_probes", cfg.gan.spsa.probes},
                  {"spsa_step", cfg.gan.spsa.step},
                  {"refresh_every", cfg.gan.refresh_every},
                  {"estimator_hidden", cfg.gan.estimator.hidden},
                  {"estimator_lr", cfg.gan.estimator.learning_rate},
                  {"estimator_lambda", cfg.gan.estimator.lambda},
                  {"estimator_inner_steps", cfg.gan.estimator.inner_steps}};
    doc["eval"] = {{"synthetic_path", cfg.eval.synthetic_path},
                   {"variance_bin_width", cfg.eval.variance_bin_width},
                   {"variance_max", cfg.eval.variance_max},
                   {"tstr_window", cfg.eval.tstr.window},
                   {"tstr_horizon", cfg.eval.tstr.horizon},
                   {"tstr_hidden", cfg.eval.tstr.hidden},
                   {"tstr_epochs", cfg.eval.tstr.epochs},
                   {"tstr_stride", cfg.eval.tstr.stride},
                   {"tstr_repeats", cfg.eval.tstr.repeats},
                   {"tstr_lr", cfg.eval.tstr.learning_rate}};
    return doc.dump();
}

std::string config_hash(const PipelineConfig& cfg) {
    const std::string text = canonical_json(cfg);
    uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

unsigned thread_budget() {
    if (const char* env = std::getenv("FORGE_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace forge::config
