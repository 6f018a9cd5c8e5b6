#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "experiments.hpp"
#include "policy.hpp"
#include "prefgen.hpp"
#include "rng.hpp"
#include "train.hpp"

namespace prefopt {

// Raised on any malformed config; the message carries a JSON-pointer-style
// location so the CLI can report where parsing failed.
struct ConfigError : std::runtime_error {
    ConfigError(const std::string& where, const std::string& what)
        : std::runtime_error("config error at " + where + ": " + what) {}
};

inline constexpr int kConfigSchemaVersion = 1;

namespace cfgdetail {

inline const json& member(const json& j, const char* key, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(where, std::string("missing field \"") + key + "\"");
    return *it;
}

inline double get_double(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where, "expected a number");
    return j.get<double>();
}

inline std::int64_t get_int(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError(where, "expected an integer");
    return j.get<std::int64_t>();
}

inline std::uint64_t get_u64(const json& j, const std::string& where) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
        throw ConfigError(where, "expected a nonnegative integer");
    }
    return j.get<std::uint64_t>();
}

inline std::string get_string(const json& j, const std::string& where) {
    if (!j.is_string()) throw ConfigError(where, "expected a string");
    return j.get<std::string>();
}

inline std::vector<double> get_double_array(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(get_double(j[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

template <typename T>
inline T get_or(const json& j, const char* key, const std::string& where, T fallback,
                T (*getter)(const json&, const std::string&)) {
    if (!j.is_object()) throw ConfigError(where, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    return getter(*it, where + "." + key);
}

} // namespace cfgdetail

inline void require_schema_version(const json& root) {
    using namespace cfgdetail;
    const json& v = member(root, "schema_version", "$");
    if (get_int(v, "$.schema_version") != kConfigSchemaVersion) {
        throw ConfigError("$.schema_version",
                          "unsupported version (this build reads version " +
                              std::to_string(kConfigSchemaVersion) + ")");
    }
}

inline json load_config_file(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::exception& e) {
        throw ConfigError("$", e.what());
    }
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        // e.what() carries the byte position of the syntax error.
        throw ConfigError(path, e.what());
    }
    require_schema_version(root);
    return root;
}

// Random feature rows draw each coordinate uniformly in [-1/sqrt(d), 1/sqrt(d)],
// which keeps every row inside the unit ball by construction.
inline FeatureMap random_feature_map(int d, int num_states, int num_actions, std::uint64_t seed) {
    if (d < 1 || num_states < 1 || num_actions < 1) {
        throw std::invalid_argument("random_feature_map: dimensions must be positive");
    }
    SplitMix64 rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<Vec> table;
    table.reserve(static_cast<std::size_t>(num_states) * num_actions);
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            Vec v(d);
            for (int k = 0; k < d; ++k) v[k] = rng.uniform(-scale, scale);
            table.push_back(std::move(v));
        }
    }
    return FeatureMap(num_states, num_actions, std::move(table));
}

inline TabularReward random_reward(int num_states, int num_actions, double scale,
                                   std::uint64_t seed) {
    if (!(scale > 0.0)) throw std::invalid_argument("random_reward: scale must be positive");
    SplitMix64 rng(seed);
    std::vector<double> table(static_cast<std::size_t>(num_states) * num_actions);
    for (double& v : table) v = rng.uniform(-scale, scale);
    return TabularReward(num_states, num_actions, std::move(table));
}

// "feature_map" schema: {"kind":"random","d":..,"num_states":..,"num_actions":..}
// | {"kind":"explicit","d":..,"num_states":..,"num_actions":..,"table":[..]}
// | {"kind":"path","path":"fm.json"}  (relative paths resolve against base_dir)
inline FeatureMap feature_map_from_config(const json& j, const std::string& where,
                                          std::uint64_t seed,
                                          const std::filesystem::path& base_dir) {
    using namespace cfgdetail;
    const std::string kind = get_string(member(j, "kind", where), where + ".kind");
    try {
        if (kind == "random") {
            const int d = static_cast<int>(get_int(member(j, "d", where), where + ".d"));
            const int ns = static_cast<int>(
                get_int(member(j, "num_states", where), where + ".num_states"));
            const int na = static_cast<int>(
                get_int(member(j, "num_actions", where), where + ".num_actions"));
            return random_feature_map(d, ns, na, substream_seed(seed, "feature_map"));
        }
        if (kind == "explicit") return feature_map_from_json(j);
        if (kind == "path") {
            std::filesystem::path p = get_string(member(j, "path", where), where + ".path");
            if (p.is_relative()) p = base_dir / p;
            return feature_map_from_json(json::parse(read_text_file(p.string())));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where, e.what());
    }
    throw ConfigError(where + ".kind", "expected \"random\", \"explicit\", or \"path\"");
}

// "prompt_dist": "uniform" | [p_0, ..., p_{S-1}]
inline std::vector<double> prompt_dist_from_config(const json& j, int num_states,
                                                   const std::string& where) {
    using namespace cfgdetail;
    if (j.is_string() && j.get<std::string>() == "uniform") {
        return std::vector<double>(static_cast<std::size_t>(num_states),
                                   1.0 / static_cast<double>(num_states));
    }
    std::vector<double> mu = get_double_array(j, where);
    if (static_cast<int>(mu.size()) != num_states) {
        throw ConfigError(where, "length must equal num_states");
    }
    return mu;
}

// "behavior" / policy schema: "uniform" | {"B":..,"theta":[..]}
inline PolicyParams policy_from_config(const json& j, int dim, const std::string& where) {
    using namespace cfgdetail;
    if (j.is_string() && j.get<std::string>() == "uniform") return uniform_reference(dim, 1.0);
    try {
        PolicyParams p = policy_params_from_json(j);
        if (p.theta.size() != dim) throw ConfigError(where + ".theta", "dimension mismatch");
        return p;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where, e.what());
    }
}

// "reward" schema, by "kind":
//   explicit:   {"table":[..]}                     (full state x action grid)
//   random:     {"scale":1.0}
//   realizable: {"theta_true":[..],"beta":..,"B":..}
//   mixture:    {"mode":"convex"|"geometric","alpha":..,"r1":{..},"r2":{..}}
struct RewardConfig {
    TabularReward reward;
    std::string desc;
    double alpha_o = 0.0;
};

inline RewardConfig reward_from_config(const json& j, const FeatureMap& fm, std::uint64_t seed,
                                       const std::string& where) {
    using namespace cfgdetail;
    const std::string kind = get_string(member(j, "kind", where), where + ".kind");
    try {
        if (kind == "explicit") {
            std::vector<double> table =
                get_double_array(member(j, "table", where), where + ".table");
            return {TabularReward(fm.num_states(), fm.num_actions(), std::move(table)),
                    "explicit", 0.0};
        }
        if (kind == "random") {
            const double scale = get_or(j, "scale", where, 1.0, get_double);
            return {random_reward(fm.num_states(), fm.num_actions(), scale,
                                  substream_seed(seed, "reward")),
                    "random", 0.0};
        }
        if (kind == "realizable") {
            std::vector<double> tt =
                get_double_array(member(j, "theta_true", where), where + ".theta_true");
            const double beta = get_double(member(j, "beta", where), where + ".beta");
            const double B = get_double(member(j, "B", where), where + ".B");
            Vec theta = Eigen::Map<const Vec>(tt.data(), static_cast<Eigen::Index>(tt.size()));
            if (theta.size() != fm.dim()) {
                throw ConfigError(where + ".theta_true", "dimension mismatch");
            }
            const PolicyParams ref = uniform_reference(fm.dim(), B);
            return {realizable_reward(PolicyParams{std::move(theta), B}, ref, beta, fm),
                    "realizable", 0.0};
        }
        if (kind == "mixture") {
            const std::string mode_s = get_string(member(j, "mode", where), where + ".mode");
            MixtureSpec::Mode mode;
            if (mode_s == "convex") {
                mode = MixtureSpec::Mode::convex;
            } else if (mode_s == "geometric") {
                mode = MixtureSpec::Mode::geometric;
            } else {
                throw ConfigError(where + ".mode", "expected \"convex\" or \"geometric\"");
            }
            const double alpha = get_double(member(j, "alpha", where), where + ".alpha");
            RewardConfig r1 = reward_from_config(member(j, "r1", where), fm, seed, where + ".r1");
            RewardConfig r2 = reward_from_config(member(j, "r2", where), fm, seed, where + ".r2");
            return {mixture_reward(r1.reward, r2.reward, MixtureSpec(mode, alpha)),
                    "mixture(" + mode_s + ")", alpha};
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where, e.what());
    }
    throw ConfigError(where + ".kind",
                      "expected \"explicit\", \"random\", \"realizable\", or \"mixture\"");
}

// One training method: {"method":"dpo"|"wdpo"|"kldpo","beta":..,"B":..,"lr":..,
// "epochs":..,"batch":..,"stop_tol":..,"rho_o":..,"tau":..}
inline TrainConfig train_config_from_config(const json& j, const std::string& where) {
    using namespace cfgdetail;
    TrainConfig cfg;
    try {
        cfg.method = method_from_name(get_string(member(j, "method", where), where + ".method"));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where + ".method", e.what());
    }
    cfg.beta = get_double(cfgdetail::member(j, "beta", where), where + ".beta");
    cfg.B = get_double(cfgdetail::member(j, "B", where), where + ".B");
    cfg.lr = get_double(cfgdetail::member(j, "lr", where), where + ".lr");
    cfg.epochs = static_cast<int>(get_int(cfgdetail::member(j, "epochs", where), where + ".epochs"));
    cfg.batch = static_cast<std::size_t>(get_or(j, "batch", where, std::int64_t{0}, get_int));
    cfg.stop_tol = get_or(j, "stop_tol", where, 1e-8, get_double);
    cfg.seed = get_or(j, "seed", where, std::uint64_t{0}, get_u64);
    if (cfg.method == Method::wdpo) {
        cfg.robust.kind = RobustKind::wasserstein_approx;
        cfg.robust.rho_o = get_double(cfgdetail::member(j, "rho_o", where), where + ".rho_o");
    } else if (cfg.method == Method::kldpo) {
        cfg.robust.kind = RobustKind::kl_approx;
        cfg.robust.tau = get_double(cfgdetail::member(j, "tau", where), where + ".tau");
    }
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw ConfigError(where, e.what());
    }
    return cfg;
}

inline std::vector<TrainConfig> methods_from_config(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where, "expected a nonempty array");
    std::vector<TrainConfig> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(train_config_from_config(j[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

// ------------------------------------------------------------------
// Per-command top-level configs.
// ------------------------------------------------------------------

struct GenDataConfig {
    std::uint64_t seed;
    FeatureMap fm;
    std::vector<double> mu;
    PolicyParams behavior;
    std::size_t n;
    TabularReward reward;
    std::string reward_desc;
    double alpha_o;
};

inline GenDataConfig parse_gen_data_config(const json& root, const std::filesystem::path& base_dir) {
    using namespace cfgdetail;
    const std::uint64_t seed = get_u64(member(root, "seed", "$"), "$.seed");
    FeatureMap fm = feature_map_from_config(member(root, "feature_map", "$"), "$.feature_map",
                                            seed, base_dir);
    std::vector<double> mu = prompt_dist_from_config(member(root, "prompt_dist", "$"),
                                                     fm.num_states(), "$.prompt_dist");
    PolicyParams behavior = policy_from_config(member(root, "behavior", "$"), fm.dim(), "$.behavior");
    const std::int64_t n = get_int(member(root, "n", "$"), "$.n");
    if (n < 1) throw ConfigError("$.n", "must be at least 1");
    RewardConfig rc = reward_from_config(member(root, "reward", "$"), fm, seed, "$.reward");
    return GenDataConfig{seed,
                         std::move(fm),
                         std::move(mu),
                         std::move(behavior),
                         static_cast<std::size_t>(n),
                         std::move(rc.reward),
                         std::move(rc.desc),
                         rc.alpha_o};
}

struct TrainCommandConfig {
    TrainConfig cfg;
    FeatureMap fm;
    std::string dataset_path;
    PolicyParams init;
    PolicyParams reference;
};

inline TrainCommandConfig parse_train_config(const json& root, const std::filesystem::path& base_dir) {
    using namespace cfgdetail;
    const std::uint64_t seed = get_or(root, "seed", "$", std::uint64_t{0}, get_u64);
    TrainConfig cfg = train_config_from_config(root, "$");
    FeatureMap fm = feature_map_from_config(member(root, "feature_map", "$"), "$.feature_map",
                                            seed, base_dir);
    std::filesystem::path ds = get_string(member(root, "dataset", "$"), "$.dataset");
    if (ds.is_relative()) ds = base_dir / ds;
    PolicyParams init = root.contains("init")
                            ? policy_from_config(root["init"], fm.dim(), "$.init")
                            : uniform_reference(fm.dim(), cfg.B);
    PolicyParams reference = root.contains("reference")
                                 ? policy_from_config(root["reference"], fm.dim(), "$.reference")
                                 : uniform_reference(fm.dim(), cfg.B);
    init.bound = cfg.B;
    reference.bound = cfg.B;
    return TrainCommandConfig{std::move(cfg), std::move(fm), ds.string(), std::move(init),
                              std::move(reference)};
}

inline ShiftStudySpec parse_shift_config(const json& root, const std::filesystem::path& base_dir) {
    using namespace cfgdetail;
    const std::uint64_t seed = get_or(root, "seed", "$", std::uint64_t{0}, get_u64);
    const json& env = member(root, "env", "$");
    FeatureMap fm = feature_map_from_config(member(env, "feature_map", "$.env"),
                                            "$.env.feature_map", seed, base_dir);
    std::vector<double> mu = prompt_dist_from_config(member(env, "prompt_dist", "$.env"),
                                                     fm.num_states(), "$.env.prompt_dist");
    PolicyParams behavior = policy_from_config(member(env, "behavior", "$.env"), fm.dim(),
                                               "$.env.behavior");
    RewardConfig r1 = reward_from_config(member(env, "r1", "$.env"), fm,
                                         substream_seed(seed, "r1"), "$.env.r1");
    RewardConfig r2 = reward_from_config(member(env, "r2", "$.env"), fm,
                                         substream_seed(seed, "r2"), "$.env.r2");
    const std::int64_t n = get_int(member(env, "n", "$.env"), "$.env.n");
    if (n < 1) throw ConfigError("$.env.n", "must be at least 1");

    ShiftStudySpec spec{
        get_double(member(root, "alpha_train", "$"), "$.alpha_train"),
        get_double_array(member(root, "alpha_grid", "$"), "$.alpha_grid"),
        MixtureSpec::Mode::convex,
        methods_from_config(member(root, "methods", "$"), "$.methods"),
        {},
        StudyEnv{std::move(fm), std::move(mu), std::move(behavior), std::move(r1.reward),
                 std::move(r2.reward), static_cast<std::size_t>(n)}};
    const std::string mode_s = get_string(member(root, "mode", "$"), "$.mode");
    if (mode_s == "convex") {
        spec.mode = MixtureSpec::Mode::convex;
    } else if (mode_s == "geometric") {
        spec.mode = MixtureSpec::Mode::geometric;
    } else {
        throw ConfigError("$.mode", "expected \"convex\" or \"geometric\"");
    }
    const json& seeds = member(root, "seeds", "$");
    if (!seeds.is_array() || seeds.empty()) throw ConfigError("$.seeds", "expected a nonempty array");
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        spec.seeds.push_back(get_u64(seeds[i], "$.seeds[" + std::to_string(i) + "]"));
    }
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw ConfigError("$", e.what());
    }
    return spec;
}

inline RateStudySpec parse_rate_config(const json& root, const std::filesystem::path& base_dir) {
    using namespace cfgdetail;
    const std::uint64_t seed = get_u64(member(root, "seed", "$"), "$.seed");
    FeatureMap fm = feature_map_from_config(member(root, "feature_map", "$"), "$.feature_map",
                                            seed, base_dir);
    std::vector<double> mu = prompt_dist_from_config(member(root, "prompt_dist", "$"),
                                                     fm.num_states(), "$.prompt_dist");
    PolicyParams behavior = policy_from_config(member(root, "behavior", "$"), fm.dim(), "$.behavior");
    PolicyParams theta_true = policy_from_config(member(root, "theta_true", "$"), fm.dim(),
                                                 "$.theta_true");
    const json& ng = member(root, "n_grid", "$");
    if (!ng.is_array() || ng.empty()) throw ConfigError("$.n_grid", "expected a nonempty array");
    std::vector<std::size_t> n_grid;
    for (std::size_t i = 0; i < ng.size(); ++i) {
        const std::int64_t v = get_int(ng[i], "$.n_grid[" + std::to_string(i) + "]");
        if (v < 1) throw ConfigError("$.n_grid[" + std::to_string(i) + "]", "must be at least 1");
        n_grid.push_back(static_cast<std::size_t>(v));
    }
    RateStudySpec spec{std::move(n_grid),
                       static_cast<int>(get_int(member(root, "repetitions", "$"), "$.repetitions")),
                       std::move(theta_true),
                       std::move(fm),
                       std::move(mu),
                       std::move(behavior),
                       static_cast<std::size_t>(get_int(member(root, "reference_n", "$"),
                                                        "$.reference_n")),
                       methods_from_config(member(root, "methods", "$"), "$.methods"),
                       seed};
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw ConfigError("$", e.what());
    }
    return spec;
}

struct DistSimCommandConfig {
    std::string dataset_path;
    FeatureMap fm;
    double tau;
    int workers;
    std::size_t microbatch;
    SyncMode sync;
    PolicyPair pp;
};

inline DistSimCommandConfig parse_dist_sim_config(const json& root,
                                                  const std::filesystem::path& base_dir) {
    using namespace cfgdetail;
    const std::uint64_t seed = get_or(root, "seed", "$", std::uint64_t{0}, get_u64);
    FeatureMap fm = feature_map_from_config(member(root, "feature_map", "$"), "$.feature_map",
                                            seed, base_dir);
    std::filesystem::path ds = get_string(member(root, "dataset", "$"), "$.dataset");
    if (ds.is_relative()) ds = base_dir / ds;
    const json& pol = member(root, "policy", "$");
    const double beta = get_double(member(pol, "beta", "$.policy"), "$.policy.beta");
    PolicyParams current = policy_from_config(member(pol, "current", "$.policy"), fm.dim(),
                                              "$.policy.current");
    PolicyParams reference = policy_from_config(member(pol, "reference", "$.policy"), fm.dim(),
                                                "$.policy.reference");
    const std::string sync_s = get_string(member(root, "sync", "$"), "$.sync");
    SyncMode sync;
    if (sync_s == "local") {
        sync = SyncMode::local;
    } else if (sync_s == "all_gather") {
        sync = SyncMode::all_gather;
    } else {
        throw ConfigError("$.sync", "expected \"local\" or \"all_gather\"");
    }
    const std::int64_t workers = get_int(member(root, "workers", "$"), "$.workers");
    const std::int64_t microbatch = get_int(member(root, "microbatch", "$"), "$.microbatch");
    if (workers < 1) throw ConfigError("$.workers", "must be at least 1");
    if (microbatch < 1) throw ConfigError("$.microbatch", "must be at least 1");
    try {
        return DistSimCommandConfig{ds.string(),
                                    std::move(fm),
                                    get_double(member(root, "tau", "$"), "$.tau"),
                                    static_cast<int>(workers),
                                    static_cast<std::size_t>(microbatch),
                                    sync,
                                    PolicyPair(std::move(current), std::move(reference), beta)};
    } catch (const std::exception& e) {
        throw ConfigError("$.policy", e.what());
    }
}

struct VerifyConfig {
    std::uint64_t seed;
};

inline VerifyConfig parse_verify_config(const json& root) {
    using namespace cfgdetail;
    return VerifyConfig{get_or(root, "seed", "$", std::uint64_t{20260817}, get_u64)};
}

} // namespace prefopt
