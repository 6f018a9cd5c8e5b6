#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "losses.hpp"
#include "policy.hpp"
#include "robust.hpp"

namespace prefopt {

enum class Method { dpo, wdpo, kldpo };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::dpo: return "dpo";
        case Method::wdpo: return "wdpo";
        case Method::kldpo: return "kldpo";
    }
    throw std::logic_error("method_name: unknown method");
}

inline Method method_from_name(const std::string& s) {
    if (s == "dpo") return Method::dpo;
    if (s == "wdpo") return Method::wdpo;
    if (s == "kldpo") return Method::kldpo;
    throw std::invalid_argument("unknown training method: " + s);
}

// Projected gradient-descent configuration.  batch = 0 selects full-batch
// steps; otherwise each epoch walks contiguous chunks of the given size in
// dataset order (no reshuffling), which keeps runs bit-reproducible.
// lr = 0 is allowed and performs null updates, so a one-epoch run returns the
// projected initial parameters unchanged.
struct TrainConfig {
    Method method = Method::dpo;
    double lr = 0.1;
    int epochs = 1;
    std::size_t batch = 0;
    std::uint64_t seed = 0;
    RobustSpec robust;
    double stop_tol = 1e-8;
    double beta = 1.0;
    double B = 1.0;

    void validate() const {
        if (!(lr >= 0.0)) throw std::invalid_argument("TrainConfig: lr must be nonnegative");
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be at least 1");
        if (!(stop_tol >= 0.0)) throw std::invalid_argument("TrainConfig: stop_tol must be nonnegative");
        if (!(beta > 0.0)) throw std::invalid_argument("TrainConfig: beta must be positive");
        if (!(B > 0.0)) throw std::invalid_argument("TrainConfig: B must be positive");
        robust.validate();
    }
};

// Short display label for report rows: the method name plus the
// hyperparameter that distinguishes it.
inline std::string method_label(const TrainConfig& cfg) {
    switch (cfg.method) {
        case Method::dpo: return "dpo";
        case Method::wdpo: return "wdpo(rho_o=" + json(cfg.robust.rho_o).dump() + ")";
        case Method::kldpo: return "kldpo(tau=" + json(cfg.robust.tau).dump() + ")";
    }
    throw std::logic_error("method_label: unknown method");
}

struct TrainReport {
    PolicyParams final_params;
    std::vector<double> loss_trace;
    std::vector<double> grad_norm_trace;
    int epochs_run = 0;
    bool converged = false;
};

namespace xy {

// Loss selected by the method over cd[lo, hi).
inline double method_loss(const TrainConfig& cfg, const CompiledDataset& cd, std::size_t lo,
                          std::size_t hi, const Vec& delta) {
    if (lo >= hi) throw std::domain_error("method_loss: empty batch");
    const double n = static_cast<double>(hi - lo);
    switch (cfg.method) {
        case Method::dpo: {
            double sum = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                sum += pointwise_loss(cfg.beta, delta.dot(cd.x[i]), cd.y[i]);
            }
            return sum / n;
        }
        case Method::wdpo: {
            double sum = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                sum += pointwise_loss(cfg.beta, delta.dot(cd.x[i]), cd.y[i]);
            }
            const double base = sum / n;
            if (cfg.robust.rho_o == 0.0) return base;
            const double delta_norm = delta.norm();
            double sq = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                const double g =
                    input_grad_norm(cfg.beta, delta.dot(cd.x[i]), cd.y[i], delta_norm);
                sq += g * g;
            }
            return base + cfg.robust.rho_o * std::sqrt(sq / n);
        }
        case Method::kldpo: {
            std::vector<double> losses(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) {
                losses[i - lo] = pointwise_loss(cfg.beta, delta.dot(cd.x[i]), cd.y[i]);
            }
            const std::vector<double> base(losses.size(), 1.0 / n);
            const std::vector<double> w = kldpo_worst_kernel(losses, base, cfg.robust.tau);
            double value = 0.0;
            for (std::size_t i = 0; i < losses.size(); ++i) value += w[i] * losses[i];
            return value;
        }
    }
    throw std::logic_error("method_loss: unknown method");
}

// Gradient selected by the method over cd[lo, hi).  The tractable KL kernel
// weights are treated as constants of the step (the kernel is rebuilt each
// step but never differentiated through); the tractable Wasserstein penalty
// is differentiated analytically, with subgradient 0 at the norm kink
// delta = 0.
inline Vec method_gradient(const TrainConfig& cfg, const CompiledDataset& cd, std::size_t lo,
                           std::size_t hi, const Vec& delta) {
    if (lo >= hi) throw std::domain_error("method_gradient: empty batch");
    const double n = static_cast<double>(hi - lo);
    const double beta = cfg.beta;
    switch (cfg.method) {
        case Method::dpo: {
            Vec sum = Vec::Zero(delta.size());
            for (std::size_t i = lo; i < hi; ++i) {
                sum += residual(beta, delta.dot(cd.x[i]), cd.y[i]) * cd.x[i];
            }
            return sum * (-beta / n);
        }
        case Method::wdpo: {
            Vec sum = Vec::Zero(delta.size());
            for (std::size_t i = lo; i < hi; ++i) {
                sum += residual(beta, delta.dot(cd.x[i]), cd.y[i]) * cd.x[i];
            }
            Vec grad = sum * (-beta / n);
            if (cfg.robust.rho_o == 0.0) return grad;
            const double delta_sq = delta.squaredNorm();
            const double delta_norm = std::sqrt(delta_sq);
            // M = (1/n) sum_i beta^2 s_i^2 ||delta||^2 with s_i = sigmoid(u_i),
            // u_i = (1 - 2 y_i) beta h_i.  d sqrt(M) = dM / (2 sqrt(M)).
            double mean_sq = 0.0;
            Vec grad_m = Vec::Zero(delta.size());
            for (std::size_t i = lo; i < hi; ++i) {
                const double h = delta.dot(cd.x[i]);
                const double sign = (cd.y[i] == 1) ? 1.0 : -1.0;
                const double s = sigmoid(-sign * beta * h);
                mean_sq += s * s * delta_sq;
                grad_m += (2.0 * s * s * (1.0 - s) * (-sign) * beta * delta_sq) * cd.x[i];
                grad_m += (2.0 * s * s) * delta;
            }
            mean_sq *= beta * beta / n;
            grad_m *= beta * beta / n;
            if (mean_sq > 0.0 && delta_norm > 0.0) {
                grad += (cfg.robust.rho_o / (2.0 * std::sqrt(mean_sq))) * grad_m;
            }
            return grad;
        }
        case Method::kldpo: {
            std::vector<double> losses(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) {
                losses[i - lo] = pointwise_loss(beta, delta.dot(cd.x[i]), cd.y[i]);
            }
            const std::vector<double> base(losses.size(), 1.0 / n);
            const std::vector<double> w = kldpo_worst_kernel(losses, base, cfg.robust.tau);
            Vec sum = Vec::Zero(delta.size());
            for (std::size_t i = lo; i < hi; ++i) {
                sum += (w[i - lo] * residual(beta, delta.dot(cd.x[i]), cd.y[i])) * cd.x[i];
            }
            return sum * (-beta);
        }
    }
    throw std::logic_error("method_gradient: unknown method");
}

} // namespace xy

// Method-selected gradient over a whole dataset batch; used directly by the
// verification suites and internally by train.
inline Vec robust_gradient(const TrainConfig& cfg, const PolicyPair& pp, const FeatureMap& fm,
                           const PreferenceDataset& batch) {
    if (batch.empty()) throw std::domain_error("robust_gradient: empty batch");
    const CompiledDataset cd = CompiledDataset::build(batch, fm);
    return xy::method_gradient(cfg, cd, 0, cd.size(),
                               Vec(pp.current.theta - pp.reference.theta));
}

// Central finite differences of f at theta, one coordinate at a time.
inline Vec finite_difference_gradient(const std::function<double(const Vec&)>& f,
                                      const Vec& theta, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("finite_difference_gradient: step must be positive");
    Vec g(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        Vec hi = theta, lo = theta;
        hi(j) += step;
        lo(j) -= step;
        g(j) = (f(hi) - f(lo)) / (2.0 * step);
    }
    return g;
}

// Projected gradient descent on the method-selected loss.  Steps follow
// contiguous batches in dataset order; the parameter vector is projected onto
// the radius-B ball after every step.  Per-epoch traces record the
// full-dataset loss and gradient norm after the epoch's updates; the run
// stops early once the full gradient norm falls to stop_tol.  Any non-finite
// loss or gradient aborts with a diagnostic instead of silently continuing.
inline TrainReport train(const TrainConfig& cfg, const PolicyPair& pp_init, const FeatureMap& fm,
                         const PreferenceDataset& ds) {
    cfg.validate();
    if (ds.empty()) throw std::domain_error("train: empty dataset");
    if (pp_init.current.theta.size() != fm.dim()) {
        throw std::invalid_argument("train: initial parameter dimension mismatch");
    }
    if (pp_init.beta != cfg.beta) {
        throw std::invalid_argument("train: cfg.beta differs from the initial policy pair");
    }

    const CompiledDataset cd = CompiledDataset::build(ds, fm);
    const std::size_t n = cd.size();
    const std::size_t batch = (cfg.batch == 0 || cfg.batch > n) ? n : cfg.batch;
    const Vec& theta_ref = pp_init.reference.theta;

    PolicyParams cur = project_params(PolicyParams{pp_init.current.theta, cfg.B});

    TrainReport report;
    report.loss_trace.reserve(cfg.epochs);
    report.grad_norm_trace.reserve(cfg.epochs);

    std::optional<Vec> cached_full_grad;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t lo = 0; lo < n; lo += batch) {
            const std::size_t hi = std::min(lo + batch, n);
            Vec g;
            if (cached_full_grad && lo == 0 && hi == n) {
                g = std::move(*cached_full_grad);
                cached_full_grad.reset();
            } else {
                g = xy::method_gradient(cfg, cd, lo, hi, Vec(cur.theta - theta_ref));
            }
            if (!g.allFinite()) {
                throw std::runtime_error("train: non-finite gradient at epoch " +
                                         std::to_string(epoch) + " (" + method_label(cfg) + ")");
            }
            cur.theta -= cfg.lr * g;
            cur = project_params(cur);
        }
        const Vec delta = cur.theta - theta_ref;
        const double loss = xy::method_loss(cfg, cd, 0, n, delta);
        Vec full_grad = xy::method_gradient(cfg, cd, 0, n, delta);
        if (!std::isfinite(loss) || !full_grad.allFinite()) {
            throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                     " (" + method_label(cfg) + ")");
        }
        const double grad_norm = full_grad.norm();
        report.loss_trace.push_back(loss);
        report.grad_norm_trace.push_back(grad_norm);
        report.epochs_run = epoch;
        if (grad_norm <= cfg.stop_tol) {
            report.converged = true;
            break;
        }
        if (batch == n) cached_full_grad = std::move(full_grad);
    }

    report.final_params = std::move(cur);
    return report;
}

inline json train_report_to_json(const TrainReport& r) {
    json loss = json::array(), grad = json::array();
    for (double v : r.loss_trace) loss.push_back(v);
    for (double v : r.grad_norm_trace) grad.push_back(v);
    return json{{"converged", r.converged},
                {"epochs_run", r.epochs_run},
                {"final_params", policy_params_to_json(r.final_params)},
                {"grad_norm_trace", std::move(grad)},
                {"loss_trace", std::move(loss)}};
}

// CSV trace: one row per epoch with the post-epoch full-dataset loss and
// gradient norm.
inline std::string train_trace_to_csv(const TrainReport& r) {
    std::string out = "epoch,loss,grad_norm\n";
    for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
        out += std::to_string(i + 1);
        out.push_back(',');
        out += json(r.loss_trace[i]).dump();
        out.push_back(',');
        out += json(r.grad_norm_trace[i]).dump();
        out.push_back('\n');
    }
    return out;
}

} // namespace prefopt
