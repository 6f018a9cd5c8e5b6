#pragma once

#include <filesystem>
#include <iostream>
#include <string>

#include "checks.hpp"
#include "config.hpp"
#include "core.hpp"
#include "experiments.hpp"
#include "train.hpp"

namespace prefopt {

enum class LogLevel { quiet, info, debug };

inline LogLevel log_level_from_name(const std::string& s) {
    if (s == "quiet") return LogLevel::quiet;
    if (s == "info") return LogLevel::info;
    if (s == "debug") return LogLevel::debug;
    throw std::invalid_argument("log level must be quiet, info, or debug (got \"" + s + "\")");
}

struct RunManifest {
    std::string command;
    std::string config_path;
    std::string out_dir;
    LogLevel log_level = LogLevel::info;
};

namespace clidetail {

struct Logger {
    LogLevel level;
    void info(const std::string& msg) const {
        if (level >= LogLevel::info) std::cerr << "[info] " << msg << "\n";
    }
    void debug(const std::string& msg) const {
        if (level >= LogLevel::debug) std::cerr << "[debug] " << msg << "\n";
    }
};

// First free name in dir: "name.ext", then "name.1.ext", "name.2.ext", ...
// Existing files are never overwritten.
inline std::filesystem::path versioned_path(const std::filesystem::path& dir,
                                            const std::string& name) {
    namespace fs = std::filesystem;
    fs::path p = dir / name;
    if (!fs::exists(p)) return p;
    const std::string stem = fs::path(name).stem().string();
    const std::string ext = fs::path(name).extension().string();
    for (int k = 1;; ++k) {
        fs::path q = dir / (stem + "." + std::to_string(k) + ext);
        if (!fs::exists(q)) return q;
    }
}

inline std::filesystem::path write_artifact(const std::filesystem::path& out_dir,
                                            const std::string& name, const std::string& content,
                                            const Logger& log) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path p = versioned_path(out_dir, name);
    write_text_file(p.string(), content);
    log.info("wrote " + p.string());
    return p;
}

inline std::string pretty(const json& j) { return j.dump(2) + "\n"; }

} // namespace clidetail

inline int execute(const RunManifest& m) {
    using clidetail::pretty;
    using clidetail::write_artifact;
    const clidetail::Logger log{m.log_level};
    std::string stage = "parse-config";
    try {
        const json root = load_config_file(m.config_path);
        const std::filesystem::path base = std::filesystem::path(m.config_path).parent_path();
        const std::filesystem::path out(m.out_dir);

        if (m.command == "gen-data") {
            const GenDataConfig cfg = parse_gen_data_config(root, base);
            stage = "generate-dataset";
            const SamplingSpec sampling(cfg.mu, cfg.behavior, cfg.n,
                                        substream_seed(cfg.seed, "data"));
            const PreferenceDataset ds =
                sample_dataset(cfg.fm, sampling, cfg.reward, cfg.reward_desc, cfg.alpha_o);
            stage = "write-artifacts";
            write_artifact(out, "dataset.txt", dataset_to_string(ds), log);
            write_artifact(out, "feature_map.json", pretty(feature_map_to_json(cfg.fm)), log);
            return 0;
        }

        if (m.command == "train") {
            const TrainCommandConfig cfg = parse_train_config(root, base);
            stage = "load-dataset";
            const PreferenceDataset ds = load_dataset(cfg.dataset_path);
            stage = "train";
            log.debug("training " + method_label(cfg.cfg) + " on " + std::to_string(ds.size()) +
                      " samples");
            const PolicyPair init(cfg.init, cfg.reference, cfg.cfg.beta);
            const TrainReport report = train(cfg.cfg, init, cfg.fm, ds);
            stage = "write-artifacts";
            write_artifact(out, "policy_params.json",
                           pretty(policy_params_to_json(report.final_params)), log);
            write_artifact(out, "train_report.json", pretty(train_report_to_json(report)), log);
            write_artifact(out, "loss_trace.csv", train_trace_to_csv(report), log);
            return 0;
        }

        if (m.command == "eval-shift") {
            const ShiftStudySpec spec = parse_shift_config(root, base);
            stage = "shift-study";
            const ShiftReport report = shift_sweep(spec);
            stage = "write-artifacts";
            write_artifact(out, "shift_cells.csv", shift_report_to_csv(report), log);
            write_artifact(out, "shift_summary.json", pretty(shift_report_to_json(report)), log);
            return 0;
        }

        if (m.command == "rate-exp") {
            const RateStudySpec spec = parse_rate_config(root, base);
            stage = "rate-study";
            const RateReport report = rate_experiment(spec);
            stage = "write-artifacts";
            write_artifact(out, "rate_cells.csv", rate_report_to_csv(report), log);
            write_artifact(out, "rate_summary.json", pretty(rate_report_to_json(report)), log);
            return 0;
        }

        if (m.command == "dist-sim") {
            const DistSimCommandConfig cfg = parse_dist_sim_config(root, base);
            stage = "load-dataset";
            const PreferenceDataset ds = load_dataset(cfg.dataset_path);
            stage = "kernel-simulation";
            const DistSimReport report = distributed_kernel_sim(
                ds, cfg.tau, cfg.workers, cfg.microbatch, cfg.sync, cfg.pp, cfg.fm);
            stage = "write-artifacts";
            write_artifact(out, "dist_sim.csv", dist_sim_report_to_csv(report), log);
            write_artifact(out, "dist_sim_summary.json", pretty(dist_sim_report_to_json(report)),
                           log);
            return 0;
        }

        if (m.command == "verify") {
            const VerifyConfig cfg = parse_verify_config(root);
            stage = "verification";
            const CheckReport report = run_verification_suite(cfg.seed);
            for (const CheckResult& r : report.results) {
                std::cout << (r.passed ? "[pass] " : "[FAIL] ") << r.id << ": " << r.detail
                          << "\n";
            }
            for (const std::string& id : report.uncovered) {
                std::cout << "[FAIL] " << id << ": registered invariant has no executed check\n";
            }
            stage = "write-artifacts";
            write_artifact(out, "verify_report.json", pretty(check_report_to_json(report)), log);
            return report.all_passed ? 0 : 1;
        }

        throw std::invalid_argument("unknown command \"" + m.command + "\"");
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error in stage '" << stage << "': " << e.what() << "\n";
        return 1;
    }
}

} // namespace prefopt
