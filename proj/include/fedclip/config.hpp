#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedclip/algorithms.hpp"
#include "fedclip/dataset.hpp"
#include "fedclip/errors.hpp"
#include "fedclip/hyperparams.hpp"
#include "fedclip/objectives.hpp"
#include "fedclip/partition.hpp"

namespace fedclip {

using json = nlohmann::json;

namespace cfg {

/// Strict schema: any key outside `allowed` is an error.
inline void check_keys(const json& j,
                       const std::string& where,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (item.key() == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
}

inline const json& require(const json& j, const std::string& where, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(where + ": missing required key '" + key + "'");
    return *it;
}

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    return j.get<double>();
}

inline std::uint64_t uinteger(const json& j, const std::string& where) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        throw ConfigError(where + ": expected a nonnegative integer");
    return j.get<std::uint64_t>();
}

inline long long integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return j.get<long long>();
}

inline std::string text(const json& j, const std::string& where) {
    if (!j.is_string()) throw ConfigError(where + ": expected a string");
    return j.get<std::string>();
}

inline bool boolean(const json& j, const std::string& where) {
    if (!j.is_boolean()) throw ConfigError(where + ": expected a boolean");
    return j.get<bool>();
}

} // namespace cfg

inline NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "none") return NoiseKind::kNone;
    if (s == "uniform_ball") return NoiseKind::kUniformBall;
    if (s == "uniform_per_coordinate") return NoiseKind::kUniformPerCoordinate;
    throw ConfigError("noise.kind: expected none|uniform_ball|uniform_per_coordinate, got '" + s +
                      "'");
}

inline const char* to_string(NoiseKind k) {
    switch (k) {
    case NoiseKind::kNone: return "none";
    case NoiseKind::kUniformBall: return "uniform_ball";
    case NoiseKind::kUniformPerCoordinate: return "uniform_per_coordinate";
    }
    return "none";
}

/// Which loss family an experiment runs on and its parameters.
struct ObjectiveSpec {
    std::string family; // quartic | quadratic_counterexample | logistic
    double H = 1.0;     // quartic heterogeneity
    double q_gamma = 2.0; // counterexample gamma (> 1)

    // logistic family
    std::size_t samples = 0;
    std::size_t features = 0;
    std::size_t classes = 0;
    double separation = 2.0;
    std::uint64_t dataset_seed = 0;
    int similarity = 100; // partitioner s in [0, 100]
    std::string dataset_csv; // load instead of generating when non-empty

    static ObjectiveSpec from_json(const json& j) {
        const std::string where = "objective";
        ObjectiveSpec spec;
        spec.family = cfg::text(cfg::require(j, where, "family"), where + ".family");
        if (spec.family == "quartic") {
            cfg::check_keys(j, where, {"family", "H"});
            spec.H = cfg::number(cfg::require(j, where, "H"), where + ".H");
        } else if (spec.family == "quadratic_counterexample") {
            cfg::check_keys(j, where, {"family", "gamma"});
            spec.q_gamma = cfg::number(cfg::require(j, where, "gamma"), where + ".gamma");
        } else if (spec.family == "logistic") {
            cfg::check_keys(j, where,
                            {"family", "samples", "features", "classes", "separation",
                             "dataset_seed", "similarity", "dataset_csv"});
            spec.similarity = static_cast<int>(
                cfg::integer(cfg::require(j, where, "similarity"), where + ".similarity"));
            if (j.contains("dataset_csv")) {
                spec.dataset_csv = cfg::text(j.at("dataset_csv"), where + ".dataset_csv");
                for (const char* k : {"samples", "features", "classes", "separation"}) {
                    if (j.contains(k))
                        throw ConfigError(where + ": '" + k + "' conflicts with 'dataset_csv'");
                }
                if (j.contains("dataset_seed"))
                    spec.dataset_seed =
                        cfg::uinteger(j.at("dataset_seed"), where + ".dataset_seed");
            } else {
                spec.samples = static_cast<std::size_t>(
                    cfg::uinteger(cfg::require(j, where, "samples"), where + ".samples"));
                spec.features = static_cast<std::size_t>(
                    cfg::uinteger(cfg::require(j, where, "features"), where + ".features"));
                spec.classes = static_cast<std::size_t>(
                    cfg::uinteger(cfg::require(j, where, "classes"), where + ".classes"));
                if (j.contains("separation"))
                    spec.separation = cfg::number(j.at("separation"), where + ".separation");
                if (j.contains("dataset_seed"))
                    spec.dataset_seed =
                        cfg::uinteger(j.at("dataset_seed"), where + ".dataset_seed");
            }
        } else {
            throw ConfigError(
                "objective.family: expected quartic|quadratic_counterexample|logistic, got '" +
                spec.family + "'");
        }
        return spec;
    }

    json to_json() const {
        json j;
        j["family"] = family;
        if (family == "quartic") {
            j["H"] = H;
        } else if (family == "quadratic_counterexample") {
            j["gamma"] = q_gamma;
        } else if (family == "logistic") {
            j["similarity"] = similarity;
            if (!dataset_csv.empty()) {
                j["dataset_csv"] = dataset_csv;
                j["dataset_seed"] = dataset_seed;
            } else {
                j["samples"] = samples;
                j["features"] = features;
                j["classes"] = classes;
                j["separation"] = separation;
                j["dataset_seed"] = dataset_seed;
            }
        }
        return j;
    }

    /// Builds the per-client objective list (and the dataset behind it for the
    /// logistic family).
    std::vector<ObjectivePtr> make_objectives(std::size_t n_clients) const {
        if (family == "quartic") return make_quartic_clients(H, n_clients);
        if (family == "quadratic_counterexample") {
            if (n_clients != 2)
                throw ConfigError("objective: the quadratic counterexample has exactly 2 clients");
            return make_quadratic_counterexample(q_gamma);
        }
        if (family == "logistic") {
            auto ds = std::make_shared<ClassificationDataset>(
                dataset_csv.empty()
                    ? make_synthetic_classification(samples, features, classes, separation,
                                                    dataset_seed)
                    : load_dataset_csv(dataset_csv));
            PartitionSpec pspec{similarity, n_clients, derive_seed(dataset_seed, 0x70617274ULL)};
            const Partition part = partition_by_similarity(ds->labels, pspec);
            return make_logistic_clients(ds, part.clients);
        }
        throw ConfigError("objective.family: unknown family '" + family + "'");
    }
};

/// The problem-constants sub-schema shared by the theorem block and the
/// monitoring-only constants block. sigma is always taken from the noise
/// model so the two cannot disagree.
inline ProblemConstants problem_constants_from_json(const json& j,
                                                    const std::string& where,
                                                    double sigma,
                                                    const ObjectiveSpec& objective) {
    cfg::check_keys(j, where, {"L0", "L1", "kappa", "rho", "Delta", "epsilon", "C", "constants"});
    ProblemConstants pc;
    pc.L0 = cfg::number(cfg::require(j, where, "L0"), where + ".L0");
    pc.L1 = cfg::number(cfg::require(j, where, "L1"), where + ".L1");
    const json& kap = cfg::require(j, where, "kappa");
    if (kap.is_string()) {
        if (kap.get<std::string>() != "auto")
            throw ConfigError(where + ".kappa: expected a number or 'auto'");
        if (objective.family != "quartic")
            throw ConfigError(where + ".kappa: 'auto' is only defined for the quartic family");
        pc.kappa = kappa_H(objective.H);
    } else {
        pc.kappa = cfg::number(kap, where + ".kappa");
    }
    pc.rho = cfg::number(cfg::require(j, where, "rho"), where + ".rho");
    pc.Delta = cfg::number(cfg::require(j, where, "Delta"), where + ".Delta");
    pc.epsilon = cfg::number(cfg::require(j, where, "epsilon"), where + ".epsilon");
    if (j.contains("C")) pc.C = cfg::number(j.at("C"), where + ".C");
    pc.sigma = sigma;
    pc.validate();
    return pc;
}

inline json problem_constants_to_json(const ProblemConstants& pc) {
    json j;
    j["L0"] = pc.L0;
    j["L1"] = pc.L1;
    j["kappa"] = pc.kappa;
    j["rho"] = pc.rho;
    j["Delta"] = pc.Delta;
    j["epsilon"] = pc.epsilon;
    j["C"] = pc.C;
    return j;
}

/// One experiment, exactly as written in a config file. Exactly one of
/// (explicit eta+gamma) or the theorem block must be present.
struct ExperimentConfig {
    std::string name;
    Algorithm algorithm = Algorithm::kEpisode;
    ObjectiveSpec objective;
    std::size_t clients = 2;
    std::size_t interval = 1;
    long long rounds = 0;
    std::optional<double> eta;
    std::optional<double> gamma;
    bool theorem_mode = false;
    std::optional<ProblemConstants> constants; // theorem block, or monitoring-only block
    TheoremConstants theorem_variant = TheoremConstants::kAppendix;
    NoiseModel noise;
    std::uint64_t seed = 0;
    std::string output_dir;
    bool monitor = false;
    bool timing = false;
    std::vector<double> init;

    static ExperimentConfig from_json(const json& j) {
        const std::string where = "config";
        cfg::check_keys(j, where,
                        {"name", "algorithm", "objective", "clients", "interval", "rounds", "eta",
                         "gamma", "theorem", "constants", "noise", "seed", "output_dir", "monitor",
                         "timing", "init"});
        ExperimentConfig c;
        if (j.contains("name")) c.name = cfg::text(j.at("name"), "config.name");
        c.algorithm =
            algorithm_from_string(cfg::text(cfg::require(j, where, "algorithm"), "config.algorithm"));
        c.objective = ObjectiveSpec::from_json(cfg::require(j, where, "objective"));
        c.clients = static_cast<std::size_t>(
            cfg::uinteger(cfg::require(j, where, "clients"), "config.clients"));
        c.interval = static_cast<std::size_t>(
            cfg::uinteger(cfg::require(j, where, "interval"), "config.interval"));
        c.rounds = cfg::integer(cfg::require(j, where, "rounds"), "config.rounds");

        if (j.contains("noise")) {
            const json& n = j.at("noise");
            cfg::check_keys(n, "noise", {"sigma", "kind"});
            c.noise.sigma = cfg::number(cfg::require(n, "noise", "sigma"), "noise.sigma");
            if (n.contains("kind"))
                c.noise.kind = noise_kind_from_string(cfg::text(n.at("kind"), "noise.kind"));
            else if (c.noise.sigma > 0.0)
                throw ConfigError("noise: sigma > 0 requires 'kind'");
            c.noise.validate();
        }

        const bool has_explicit = j.contains("eta") || j.contains("gamma");
        const bool has_theorem = j.contains("theorem");
        if (has_explicit && has_theorem)
            throw ConfigError("config: 'eta'/'gamma' and 'theorem' are mutually exclusive");
        if (!has_explicit && !has_theorem)
            throw ConfigError("config: either explicit 'eta' and 'gamma' or a 'theorem' block is "
                              "required");
        if (has_explicit) {
            if (!j.contains("eta") || !j.contains("gamma"))
                throw ConfigError("config: 'eta' and 'gamma' must be given together");
            c.eta = cfg::number(j.at("eta"), "config.eta");
            c.gamma = cfg::number(j.at("gamma"), "config.gamma");
            if (j.contains("constants")) {
                c.constants = problem_constants_from_json(j.at("constants"), "constants",
                                                          c.noise.sigma, c.objective);
            }
        } else {
            c.theorem_mode = true;
            const json& t = j.at("theorem");
            c.constants =
                problem_constants_from_json(t, "theorem", c.noise.sigma, c.objective);
            if (t.contains("constants"))
                c.theorem_variant =
                    theorem_constants_from_string(cfg::text(t.at("constants"), "theorem.constants"));
            if (j.contains("constants"))
                throw ConfigError("config: 'constants' is redundant in theorem mode");
        }

        if (j.contains("seed")) c.seed = cfg::uinteger(j.at("seed"), "config.seed");
        if (j.contains("output_dir")) c.output_dir = cfg::text(j.at("output_dir"), "config.output_dir");
        if (j.contains("monitor")) c.monitor = cfg::boolean(j.at("monitor"), "config.monitor");
        if (j.contains("timing")) c.timing = cfg::boolean(j.at("timing"), "config.timing");
        if (j.contains("init")) {
            const json& init = j.at("init");
            if (!init.is_array() || init.empty())
                throw ConfigError("config.init: expected a non-empty array of numbers");
            for (const auto& v : init) c.init.push_back(cfg::number(v, "config.init"));
        }
        return c;
    }

    static ExperimentConfig from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config: " + path.string());
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        try {
            return from_json(j);
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
    }

    /// Round-trippable form with hyperparameters stated explicitly; feeding the
    /// result back through from_json reproduces the identical run.
    json to_json() const {
        json j;
        if (!name.empty()) j["name"] = name;
        j["algorithm"] = to_string(algorithm);
        j["objective"] = objective.to_json();
        j["clients"] = clients;
        j["interval"] = interval;
        j["rounds"] = rounds;
        if (eta) j["eta"] = *eta;
        if (gamma) j["gamma"] = *gamma;
        if (constants) j["constants"] = problem_constants_to_json(*constants);
        json n;
        n["sigma"] = noise.sigma;
        n["kind"] = to_string(noise.kind);
        j["noise"] = n;
        j["seed"] = seed;
        if (!output_dir.empty()) j["output_dir"] = output_dir;
        j["monitor"] = monitor;
        j["timing"] = timing;
        if (!init.empty()) j["init"] = init;
        return j;
    }
};

/// A config turned into runnable pieces.
struct ResolvedExperiment {
    ExperimentConfig config; // explicit eta/gamma filled in
    std::vector<ObjectivePtr> objectives;
    ParameterVector x0;
    HyperParams hp;
    std::optional<ProblemConstants> constants;
    std::optional<ResolvedHyperParams> theorem; // present in theorem mode
};

inline ResolvedExperiment resolve_experiment(const ExperimentConfig& config) {
    ResolvedExperiment r;
    r.config = config;
    r.objectives = config.objective.make_objectives(config.clients);
    const std::size_t dim = r.objectives.front()->dim();

    if (config.init.empty()) {
        r.x0 = ParameterVector::zeros(dim);
    } else {
        if (config.init.size() != dim)
            throw ConfigError("config.init: expected " + std::to_string(dim) +
                              " coordinates, got " + std::to_string(config.init.size()));
        r.x0 = ParameterVector(config.init);
    }

    r.hp.interval = config.interval;
    r.hp.rounds = config.rounds;
    r.hp.n_clients = config.clients;
    if (config.theorem_mode) {
        r.theorem =
            theorem1_hyperparams(*config.constants, config.clients, config.interval,
                                 config.theorem_variant);
        r.hp.eta = r.theorem->eta;
        r.hp.gamma = r.theorem->gamma;
        r.config.eta = r.hp.eta;
        r.config.gamma = r.hp.gamma;
        r.config.theorem_mode = false; // resolved form is explicit
    } else {
        r.hp.eta = *config.eta;
        r.hp.gamma = *config.gamma;
    }
    r.hp.validate();
    r.constants = config.constants;
    return r;
}

} // namespace fedclip
