#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "losses.hpp"
#include "policy.hpp"
#include "prefgen.hpp"
#include "rng.hpp"
#include "robust.hpp"
#include "train.hpp"

namespace prefopt {

// Sampling environment shared by the studies: feature map, prompt
// distribution, behavior policy, the two component rewards, and the per-cell
// training-set size.
struct StudyEnv {
    FeatureMap fm;
    std::vector<double> mu;
    PolicyParams behavior;
    TabularReward r1;
    TabularReward r2;
    std::size_t n;
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::domain_error("median: empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return (v.size() % 2 == 1) ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

// Least-squares slope of y against x; nullopt when fewer than two points.
inline std::optional<double> ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("ls_slope: size mismatch");
    if (x.size() < 2) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) return std::nullopt;
    return sxy / sxx;
}

} // namespace detail

// ------------------------------------------------------------------
// Preference-shift sweep: train each method on data generated under the
// mixture at alpha_train, then evaluate its expected reward under the
// mixture at every alpha in the grid.
// ------------------------------------------------------------------

struct ShiftStudySpec {
    double alpha_train;
    std::vector<double> alpha_grid;
    MixtureSpec::Mode mode;
    std::vector<TrainConfig> methods;
    std::vector<std::uint64_t> seeds;
    StudyEnv env;

    void validate() const {
        if (alpha_grid.empty()) throw std::invalid_argument("ShiftStudySpec: empty alpha grid");
        for (double a : alpha_grid) {
            if (!(a >= 0.0 && a <= 1.0)) {
                throw std::invalid_argument("ShiftStudySpec: alpha values must lie in [0, 1]");
            }
        }
        if (!(alpha_train >= 0.0 && alpha_train <= 1.0)) {
            throw std::invalid_argument("ShiftStudySpec: alpha_train must lie in [0, 1]");
        }
        if (methods.empty()) throw std::invalid_argument("ShiftStudySpec: no methods");
        if (seeds.empty()) throw std::invalid_argument("ShiftStudySpec: no seeds");
        for (const TrainConfig& cfg : methods) cfg.validate();
    }
};

struct ShiftCell {
    std::string method;
    std::uint64_t seed;
    double alpha;
    double value = 0.0;
    std::string status;  // "ok" or "failed: <reason>"
};

struct ShiftSummaryRow {
    std::string method;
    double alpha;
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double max = 0.0;
    int failures = 0;
};

struct ShiftReport {
    double alpha_train = 0.0;
    std::string mode;
    std::vector<ShiftCell> cells;
    std::vector<ShiftSummaryRow> summary;
};

// Cells are emitted in (method, seed, alpha) loop order, so the report is a
// pure function of its input.  Training failures mark every cell of that
// method/seed pair as failed and the sweep continues.
inline ShiftReport shift_sweep(const ShiftStudySpec& spec) {
    spec.validate();
    const StudyEnv& env = spec.env;
    const TabularReward train_reward =
        mixture_reward(env.r1, env.r2, MixtureSpec(spec.mode, spec.alpha_train));

    std::vector<TabularReward> eval_rewards;
    eval_rewards.reserve(spec.alpha_grid.size());
    for (double a : spec.alpha_grid) {
        eval_rewards.push_back(mixture_reward(env.r1, env.r2, MixtureSpec(spec.mode, a)));
    }

    ShiftReport report;
    report.alpha_train = spec.alpha_train;
    report.mode = mixture_mode_name(spec.mode);

    for (const TrainConfig& cfg : spec.methods) {
        const std::string label = method_label(cfg);
        for (std::uint64_t seed : spec.seeds) {
            std::optional<PolicyParams> trained;
            std::string failure;
            try {
                const SamplingSpec sampling(env.mu, env.behavior, env.n, seed);
                const PreferenceDataset ds =
                    sample_dataset(env.fm, sampling, train_reward,
                                   mixture_mode_name(spec.mode), spec.alpha_train);
                const PolicyPair init(uniform_reference(env.fm.dim(), cfg.B),
                                      uniform_reference(env.fm.dim(), cfg.B), cfg.beta);
                trained = train(cfg, init, env.fm, ds).final_params;
            } catch (const std::exception& e) {
                failure = e.what();
            }
            for (std::size_t ai = 0; ai < spec.alpha_grid.size(); ++ai) {
                ShiftCell cell;
                cell.method = label;
                cell.seed = seed;
                cell.alpha = spec.alpha_grid[ai];
                if (trained) {
                    cell.value = expected_policy_reward(*trained, env.fm, env.mu, eval_rewards[ai]);
                    cell.status = "ok";
                } else {
                    cell.status = "failed: " + failure;
                }
                report.cells.push_back(std::move(cell));
            }
        }
    }

    for (const TrainConfig& cfg : spec.methods) {
        const std::string label = method_label(cfg);
        for (double a : spec.alpha_grid) {
            ShiftSummaryRow row;
            row.method = label;
            row.alpha = a;
            std::vector<double> values;
            for (const ShiftCell& c : report.cells) {
                if (c.method != label || c.alpha != a) continue;
                if (c.status == "ok") {
                    values.push_back(c.value);
                } else {
                    ++row.failures;
                }
            }
            if (!values.empty()) {
                double mean = 0.0;
                for (double v : values) mean += v;
                mean /= static_cast<double>(values.size());
                double var = 0.0;
                for (double v : values) var += (v - mean) * (v - mean);
                var /= static_cast<double>(values.size());
                row.mean = mean;
                row.stddev = std::sqrt(var);
                row.min = *std::min_element(values.begin(), values.end());
                row.max = *std::max_element(values.begin(), values.end());
            }
            report.summary.push_back(std::move(row));
        }
    }
    return report;
}

inline std::string shift_report_to_csv(const ShiftReport& r) {
    std::string out = "method,seed,alpha,value,status\n";
    for (const ShiftCell& c : r.cells) {
        out += c.method;
        out.push_back(',');
        out += std::to_string(c.seed);
        out.push_back(',');
        out += json(c.alpha).dump();
        out.push_back(',');
        if (c.status == "ok") out += json(c.value).dump();
        out.push_back(',');
        out += c.status;
        out.push_back('\n');
    }
    return out;
}

inline json shift_report_to_json(const ShiftReport& r) {
    json rows = json::array();
    for (const ShiftSummaryRow& s : r.summary) {
        rows.push_back(json{{"method", s.method},
                            {"alpha", s.alpha},
                            {"mean", s.mean},
                            {"stddev", s.stddev},
                            {"min", s.min},
                            {"max", s.max},
                            {"failures", s.failures}});
    }
    return json{{"alpha_train", r.alpha_train}, {"mode", r.mode}, {"summary", std::move(rows)}};
}

// ------------------------------------------------------------------
// Estimation-error rate study on realizable data.  The non-robust error is
// measured in the (Sigma_D + lambda I) norm against theta_true; robust
// methods are measured in the Euclidean norm against the same method trained
// once on a much larger reference sample, standing in for the population
// minimizer, which has no closed form.
// ------------------------------------------------------------------

inline constexpr double kRateNormLambda = 1e-3;

struct RateStudySpec {
    std::vector<std::size_t> n_grid;
    int repetitions;
    PolicyParams theta_true;
    FeatureMap fm;
    std::vector<double> mu;
    PolicyParams behavior;
    std::size_t reference_n;
    std::vector<TrainConfig> methods;
    std::uint64_t seed;

    void validate() const {
        if (n_grid.empty()) throw std::invalid_argument("RateStudySpec: empty n grid");
        for (std::size_t i = 1; i < n_grid.size(); ++i) {
            if (n_grid[i] <= n_grid[i - 1]) {
                throw std::invalid_argument("RateStudySpec: n grid must be strictly increasing");
            }
        }
        if (repetitions < 3) throw std::invalid_argument("RateStudySpec: need at least 3 repetitions");
        if (methods.empty()) throw std::invalid_argument("RateStudySpec: no methods");
        for (const TrainConfig& cfg : methods) cfg.validate();
        for (std::size_t i = 1; i < methods.size(); ++i) {
            if (methods[i].beta != methods[0].beta || methods[i].B != methods[0].B) {
                throw std::invalid_argument(
                    "RateStudySpec: all methods must share beta and B (the ground-truth reward "
                    "is constructed for one beta)");
            }
        }
        bool robust = false;
        for (const TrainConfig& cfg : methods) robust |= cfg.method != Method::dpo;
        if (robust && reference_n < n_grid.back()) {
            throw std::invalid_argument("RateStudySpec: reference_n must reach past the n grid");
        }
    }
};

struct RateCell {
    std::string method;
    std::size_t n;
    int rep;
    double error = 0.0;
    std::string status;
};

struct RateSummary {
    std::string method;
    std::vector<std::size_t> n;
    std::vector<double> median_error;
    std::optional<double> slope;
};

struct RateReport {
    std::vector<RateCell> cells;
    std::vector<RateSummary> summaries;
};

inline RateReport rate_experiment(const RateStudySpec& spec) {
    spec.validate();
    const double beta = spec.methods[0].beta;
    const PolicyParams ref = uniform_reference(spec.fm.dim(), spec.methods[0].B);
    const TabularReward reward = realizable_reward(spec.theta_true, ref, beta, spec.fm);

    // One reference minimizer per robust method, all trained on the same
    // large-sample dataset.
    std::vector<std::optional<PolicyParams>> reference_params(spec.methods.size());
    {
        bool any_robust = false;
        for (const TrainConfig& cfg : spec.methods) any_robust |= cfg.method != Method::dpo;
        if (any_robust) {
            const SamplingSpec sampling(spec.mu, spec.behavior, spec.reference_n,
                                        substream_seed(spec.seed, "rate:reference"));
            const PreferenceDataset ds_ref = sample_dataset(spec.fm, sampling, reward);
            for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
                if (spec.methods[mi].method == Method::dpo) continue;
                const PolicyPair init(ref, ref, beta);
                reference_params[mi] =
                    train(spec.methods[mi], init, spec.fm, ds_ref).final_params;
            }
        }
    }

    RateReport report;
    std::vector<std::vector<std::vector<double>>> errors(
        spec.methods.size(), std::vector<std::vector<double>>(spec.n_grid.size()));

    for (std::size_t ni = 0; ni < spec.n_grid.size(); ++ni) {
        for (int rep = 0; rep < spec.repetitions; ++rep) {
            const std::uint64_t cell_seed = substream_seed(
                spec.seed, "rate:n=" + std::to_string(spec.n_grid[ni]) + ":rep=" + std::to_string(rep));
            const SamplingSpec sampling(spec.mu, spec.behavior, spec.n_grid[ni], cell_seed);
            const PreferenceDataset ds = sample_dataset(spec.fm, sampling, reward);
            const Mat sigma = empirical_covariance(ds, spec.fm);
            for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
                const TrainConfig& cfg = spec.methods[mi];
                RateCell cell;
                cell.method = method_label(cfg);
                cell.n = spec.n_grid[ni];
                cell.rep = rep;
                try {
                    const PolicyPair init(ref, ref, beta);
                    const PolicyParams fit = train(cfg, init, spec.fm, ds).final_params;
                    if (cfg.method == Method::dpo) {
                        const Vec v = fit.theta - spec.theta_true.theta;
                        cell.error = std::sqrt(v.dot(sigma * v) + kRateNormLambda * v.squaredNorm());
                    } else {
                        cell.error = (fit.theta - reference_params[mi]->theta).norm();
                    }
                    cell.status = "ok";
                    errors[mi][ni].push_back(cell.error);
                } catch (const std::exception& e) {
                    cell.status = std::string("failed: ") + e.what();
                }
                report.cells.push_back(std::move(cell));
            }
        }
    }

    for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        RateSummary summary;
        summary.method = method_label(spec.methods[mi]);
        std::vector<double> log_n, log_err;
        for (std::size_t ni = 0; ni < spec.n_grid.size(); ++ni) {
            if (errors[mi][ni].empty()) continue;
            const double med = detail::median(errors[mi][ni]);
            summary.n.push_back(spec.n_grid[ni]);
            summary.median_error.push_back(med);
            if (med > 0.0) {
                log_n.push_back(std::log(static_cast<double>(spec.n_grid[ni])));
                log_err.push_back(std::log(med));
            }
        }
        summary.slope = detail::ls_slope(log_n, log_err);
        report.summaries.push_back(std::move(summary));
    }
    return report;
}

inline std::string rate_report_to_csv(const RateReport& r) {
    std::string out = "method,n,rep,error,status\n";
    for (const RateCell& c : r.cells) {
        out += c.method;
        out.push_back(',');
        out += std::to_string(c.n);
        out.push_back(',');
        out += std::to_string(c.rep);
        out.push_back(',');
        if (c.status == "ok") out += json(c.error).dump();
        out.push_back(',');
        out += c.status;
        out.push_back('\n');
    }
    return out;
}

inline json rate_report_to_json(const RateReport& r) {
    json summaries = json::array();
    for (const RateSummary& s : r.summaries) {
        json medians = json::array();
        for (std::size_t i = 0; i < s.n.size(); ++i) {
            medians.push_back(json{{"n", s.n[i]}, {"median_error", s.median_error[i]}});
        }
        summaries.push_back(json{{"method", s.method},
                                 {"medians", std::move(medians)},
                                 {"slope", s.slope ? json(*s.slope) : json(nullptr)}});
    }
    return json{{"summaries", std::move(summaries)}};
}

// ------------------------------------------------------------------
// Simulated data-parallel kernel computation.  Workers hold contiguous
// micro-batches.  In local mode each worker builds the tilt kernel from its
// own micro-batch; in all_gather mode the workers first synchronize the
// full per-sample loss vector and each then computes the same global kernel.
// The report always carries both modes so the gap is measurable.
// ------------------------------------------------------------------

enum class SyncMode { local, all_gather };

inline std::string sync_mode_name(SyncMode m) {
    return m == SyncMode::local ? "local" : "all_gather";
}

struct DistSimRow {
    std::size_t index;
    int worker;
    double loss;
    double weight_local;
    double weight_all_gather;
};

struct DistSimReport {
    int workers = 0;
    std::size_t microbatch = 0;
    double tau = 0.0;
    std::string sync;
    std::vector<DistSimRow> rows;
    double variance_local = 0.0;       // across-worker variance of the local mean-loss estimate
    double variance_all_gather = 0.0;  // zero by construction, reported for symmetry
    double l1_gap = 0.0;               // sum_i |w_local_i / workers - w_full_i|
    double max_gap = 0.0;
};

inline DistSimReport distributed_kernel_sim(const PreferenceDataset& ds, double tau, int workers,
                                            std::size_t microbatch, SyncMode sync,
                                            const PolicyPair& pp, const FeatureMap& fm) {
    if (workers < 1) throw std::invalid_argument("distributed_kernel_sim: need at least one worker");
    if (microbatch < 1) throw std::invalid_argument("distributed_kernel_sim: microbatch must be positive");
    if (!(tau > 0.0)) throw std::invalid_argument("distributed_kernel_sim: tau must be positive");
    const std::size_t selected = static_cast<std::size_t>(workers) * microbatch;
    if (selected > ds.size()) {
        throw std::domain_error("distributed_kernel_sim: partition needs more samples than the dataset holds");
    }

    const CompiledDataset cd = CompiledDataset::build(ds, fm);
    const Vec delta = pp.current.theta - pp.reference.theta;
    std::vector<double> losses(selected);
    for (std::size_t i = 0; i < selected; ++i) {
        losses[i] = xy::pointwise_loss(pp.beta, delta.dot(cd.x[i]), cd.y[i]);
    }

    DistSimReport report;
    report.workers = workers;
    report.microbatch = microbatch;
    report.tau = tau;
    report.sync = sync_mode_name(sync);
    report.rows.resize(selected);

    // Per-worker local kernels and mean-loss estimates.
    std::vector<double> local_means(workers);
    for (int w = 0; w < workers; ++w) {
        const std::size_t lo = static_cast<std::size_t>(w) * microbatch;
        std::vector<double> sub(losses.begin() + lo, losses.begin() + lo + microbatch);
        double mean = 0.0;
        for (double l : sub) mean += l;
        local_means[w] = mean / static_cast<double>(microbatch);
        const std::vector<double> base(microbatch, 1.0 / static_cast<double>(microbatch));
        const std::vector<double> w_local = kldpo_worst_kernel(sub, base, tau);
        for (std::size_t k = 0; k < microbatch; ++k) {
            report.rows[lo + k].index = lo + k;
            report.rows[lo + k].worker = w;
            report.rows[lo + k].loss = losses[lo + k];
            report.rows[lo + k].weight_local = w_local[k];
        }
    }

    // All-gather: every worker sees the full loss vector and computes the
    // same global kernel; each fills in the weights of its own samples.
    const std::vector<double> gathered_base(selected, 1.0 / static_cast<double>(selected));
    for (int w = 0; w < workers; ++w) {
        const std::vector<double> w_global = kldpo_worst_kernel(losses, gathered_base, tau);
        const std::size_t lo = static_cast<std::size_t>(w) * microbatch;
        for (std::size_t k = 0; k < microbatch; ++k) {
            report.rows[lo + k].weight_all_gather = w_global[lo + k];
        }
    }

    double gmean = 0.0;
    for (double m : local_means) gmean += m;
    gmean /= static_cast<double>(workers);
    double var = 0.0;
    for (double m : local_means) var += (m - gmean) * (m - gmean);
    report.variance_local = var / static_cast<double>(workers);
    report.variance_all_gather = 0.0;

    for (const DistSimRow& row : report.rows) {
        const double gap = std::abs(row.weight_local / static_cast<double>(workers) -
                                    row.weight_all_gather);
        report.l1_gap += gap;
        report.max_gap = std::max(report.max_gap, gap);
    }
    return report;
}

inline std::string dist_sim_report_to_csv(const DistSimReport& r) {
    std::string out = "index,worker,loss,weight_local,weight_all_gather\n";
    for (const DistSimRow& row : r.rows) {
        out += std::to_string(row.index);
        out.push_back(',');
        out += std::to_string(row.worker);
        out.push_back(',');
        out += json(row.loss).dump();
        out.push_back(',');
        out += json(row.weight_local).dump();
        out.push_back(',');
        out += json(row.weight_all_gather).dump();
        out.push_back('\n');
    }
    return out;
}

inline json dist_sim_report_to_json(const DistSimReport& r) {
    return json{{"workers", r.workers},
                {"microbatch", r.microbatch},
                {"tau", r.tau},
                {"sync", r.sync},
                {"variance_local", r.variance_local},
                {"variance_all_gather", r.variance_all_gather},
                {"l1_gap", r.l1_gap},
                {"max_gap", r.max_gap}};
}

} // namespace prefopt
