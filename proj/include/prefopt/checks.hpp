#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "core.hpp"
#include "losses.hpp"
#include "policy.hpp"
#include "prefgen.hpp"
#include "rng.hpp"
#include "robust.hpp"
#include "train.hpp"

namespace prefopt {

// ------------------------------------------------------------------
// Verification registry.  Every declared invariant of the loss, robust, and
// training modules is listed in the manifest below; run_verification_suite
// executes one check per entry and fails outright if any manifest entry ends
// up without an executed check, so the coverage rule is mechanical rather
// than reviewed.
// ------------------------------------------------------------------

struct CheckResult {
    std::string id;
    bool passed = false;
    std::string detail;
};

struct CheckReport {
    std::vector<CheckResult> results;
    std::vector<std::string> uncovered;
    bool all_passed = false;
};

inline const std::vector<std::pair<std::string, std::string>>& invariant_manifest() {
    static const std::vector<std::pair<std::string, std::string>> manifest = {
        {"losses.bounded_positive", "pointwise loss lies in (0, K] for in-bound parameters"},
        {"losses.gradient_fd", "analytic gradients match central finite differences"},
        {"losses.hessian_dominates", "Hessian is PSD and dominates gamma * Sigma_D"},
        {"losses.hessian_ref_shift", "Hessian depends on (theta - theta_ref) only"},
        {"losses.input_grad_label", "input-gradient norm peaks at the disfavored label"},
        {"robust.wdpo_zero_rho", "zero-radius tractable Wasserstein loss equals the plain loss bitwise"},
        {"robust.kernel_likelihood_ratio", "tilt kernel orders weights like losses at equal base mass"},
        {"robust.kl_dual_monotone", "KL dual value is nondecreasing in rho and at least the mean loss"},
        {"robust.kl_exact_primal_dual", "exact KL tilt matches the dual value and its multiplier bound"},
        {"robust.wasserstein_dual_bounds", "Wasserstein dual brackets the transport-program optimum"},
        {"robust.tilt_families_coincide", "kernel at temperature tau equals the exact tilt at rho(tau)"},
        {"train.projection", "iterates stay inside the radius-B ball"},
        {"train.descent", "full-batch descent is monotone at a smoothness-bounded step"},
        {"train.method_reductions", "degenerate robust settings reproduce the plain method"},
        {"train.determinism", "identical inputs give bitwise-identical training reports"},
    };
    return manifest;
}

namespace checks {

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

inline std::size_t pick(SplitMix64& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform01() * static_cast<double>(hi - lo + 1)) %
                    (hi - lo + 1);
}

} // namespace detail

// Random instance over a random feature map: parameters inside the radius-B
// ball, arbitrary labels.  Drives the loss-module checks.
struct LossInstance {
    double beta;
    double B;
    FeatureMap fm;
    PreferenceDataset ds;
    PolicyPair pp;
};

inline LossInstance make_loss_instance(SplitMix64& rng, int max_dim, std::size_t max_n) {
    const int d = static_cast<int>(detail::pick(rng, 2, static_cast<std::size_t>(max_dim)));
    const int ns = static_cast<int>(detail::pick(rng, 2, 5));
    const int na = static_cast<int>(detail::pick(rng, 2, 4));
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<Vec> table;
    table.reserve(static_cast<std::size_t>(ns) * na);
    for (int i = 0; i < ns * na; ++i) {
        Vec v(d);
        for (int k = 0; k < d; ++k) v[k] = rng.uniform(-scale, scale);
        table.push_back(std::move(v));
    }
    FeatureMap fm(ns, na, std::move(table));

    const double beta = rng.uniform(0.5, 3.0);
    const double B = rng.uniform(0.5, 2.0);
    const auto draw_params = [&]() {
        Vec t(d);
        for (int k = 0; k < d; ++k) t[k] = rng.uniform(-B * scale, B * scale);
        return PolicyParams{std::move(t), B};
    };
    PolicyParams cur = draw_params();
    PolicyParams ref = draw_params();

    const std::size_t n = detail::pick(rng, 4, max_n);
    std::vector<PreferenceSample> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int s = static_cast<int>(detail::pick(rng, 0, static_cast<std::size_t>(ns - 1)));
        const int a1 = static_cast<int>(detail::pick(rng, 0, static_cast<std::size_t>(na - 1)));
        int a2 = static_cast<int>(detail::pick(rng, 0, static_cast<std::size_t>(na - 2)));
        if (a2 >= a1) ++a2;
        samples.emplace_back(s, a1, a2, rng.bernoulli(0.5) ? 1 : 0);
    }
    DatasetMeta meta;
    meta.n = n;
    meta.reward = "synthetic-check";
    PreferenceDataset ds(std::move(samples), std::move(meta));
    return LossInstance{beta, B, std::move(fm), std::move(ds),
                        PolicyPair(std::move(cur), std::move(ref), beta)};
}

// Random finite distribution with bounded top mass (so the KL ball of radius
// up to 1 stays strictly inside the simplex) and spread-out losses.
struct TiltInstance {
    std::vector<double> losses;
    std::vector<double> base;
};

inline TiltInstance make_tilt_instance(SplitMix64& rng, std::size_t min_atoms,
                                       std::size_t max_atoms, double max_mass) {
    const std::size_t k = detail::pick(rng, min_atoms, max_atoms);
    std::vector<double> base(k);
    while (true) {
        double sum = 0.0;
        for (double& q : base) {
            q = -std::log(1.0 - rng.uniform01());
            sum += q;
        }
        double top = 0.0;
        for (double& q : base) {
            q /= sum;
            top = std::max(top, q);
        }
        if (top <= max_mass) break;
    }
    std::vector<double> losses(k);
    for (double& l : losses) l = rng.uniform(-2.0, 2.0);
    return TiltInstance{std::move(losses), std::move(base)};
}

// ------------------------------------------------------------------
// Loss-module checks.
// ------------------------------------------------------------------

inline CheckResult check_loss_bounds(std::uint64_t seed, int instances) {
    SplitMix64 rng(substream_seed(seed, "check:loss_bounds"));
    double worst_margin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < instances; ++t) {
        const LossInstance inst = make_loss_instance(rng, 12, 32);
        const LossConstants c = loss_constants(inst.beta, inst.B);
        for (const PreferenceSample& z : inst.ds.samples()) {
            const double l = pointwise_dpo_loss(inst.pp, inst.fm, z);
            worst_margin = std::min({worst_margin, l, c.K - l});
        }
    }
    CheckResult r{"losses.bounded_positive", worst_margin > 0.0,
                  "worst margin to the (0, K] bounds: " + detail::fmt(worst_margin)};
    return r;
}

inline CheckResult check_gradient_fd(std::uint64_t seed, int instances, double tol) {
    SplitMix64 rng(substream_seed(seed, "check:gradient_fd"));
    double worst = 0.0;
    const double step = 1e-6;
    for (int t = 0; t < instances; ++t) {
        const LossInstance inst = make_loss_instance(rng, 16, 64);
        const auto pair_at = [&](const Vec& th) {
            return PolicyPair(PolicyParams{th, inst.B}, inst.pp.reference, inst.beta);
        };
        const auto rel = [&](const Vec& a, const Vec& b) {
            return (a - b).norm() / std::max(a.norm(), 1e-6);
        };

        const Vec g_dpo = dpo_gradient(inst.pp, inst.fm, inst.ds);
        const Vec fd_dpo = finite_difference_gradient(
            [&](const Vec& th) { return empirical_dpo_loss(pair_at(th), inst.fm, inst.ds); },
            inst.pp.current.theta, step);
        worst = std::max(worst, rel(g_dpo, fd_dpo));

        TrainConfig dcfg;
        dcfg.method = Method::dpo;
        dcfg.beta = inst.beta;
        dcfg.B = inst.B;
        worst = std::max(worst, rel(robust_gradient(dcfg, inst.pp, inst.fm, inst.ds), fd_dpo));

        TrainConfig wcfg;
        wcfg.method = Method::wdpo;
        wcfg.beta = inst.beta;
        wcfg.B = inst.B;
        wcfg.robust.kind = RobustKind::wasserstein_approx;
        wcfg.robust.rho_o = rng.uniform(0.01, 0.5);
        const Vec g_w = robust_gradient(wcfg, inst.pp, inst.fm, inst.ds);
        const Vec fd_w = finite_difference_gradient(
            [&](const Vec& th) {
                return wdpo_loss_approx(pair_at(th), inst.fm, inst.ds, wcfg.robust.rho_o);
            },
            inst.pp.current.theta, step);
        worst = std::max(worst, rel(g_w, fd_w));

        // The tilt kernel is a constant of the step, so the differenced
        // objective freezes the weights at the center parameters.
        TrainConfig kcfg;
        kcfg.method = Method::kldpo;
        kcfg.beta = inst.beta;
        kcfg.B = inst.B;
        kcfg.robust.kind = RobustKind::kl_approx;
        kcfg.robust.tau = rng.uniform(0.2, 5.0);
        const CompiledDataset cd = CompiledDataset::build(inst.ds, inst.fm);
        const std::vector<double> center_losses =
            xy::pointwise_losses(cd, Vec(inst.pp.current.theta - inst.pp.reference.theta), inst.beta);
        const std::vector<double> base(cd.size(), 1.0 / static_cast<double>(cd.size()));
        const std::vector<double> w = kldpo_worst_kernel(center_losses, base, kcfg.robust.tau);
        const Vec g_k = robust_gradient(kcfg, inst.pp, inst.fm, inst.ds);
        const Vec fd_k = finite_difference_gradient(
            [&](const Vec& th) {
                const Vec delta = th - inst.pp.reference.theta;
                double value = 0.0;
                for (std::size_t i = 0; i < cd.size(); ++i) {
                    value += w[i] * xy::pointwise_loss(inst.beta, delta.dot(cd.x[i]), cd.y[i]);
                }
                return value;
            },
            inst.pp.current.theta, step);
        worst = std::max(worst, rel(g_k, fd_k));

        // Input-space gradient: differentiate the pointwise loss in the
        // feature difference and compare norms.
        const PreferenceSample& z = inst.ds[0];
        const Vec delta = inst.pp.current.theta - inst.pp.reference.theta;
        const Vec x0 = feature_difference(z, inst.fm);
        const Vec fd_x = finite_difference_gradient(
            [&](const Vec& x) { return xy::pointwise_loss(inst.beta, delta.dot(x), z.label); },
            x0, step);
        const double g_in = input_gradient_norm(inst.pp, inst.fm, z);
        worst = std::max(worst, std::abs(fd_x.norm() - g_in) / std::max(g_in, 1e-6));
    }
    return CheckResult{"losses.gradient_fd", worst <= tol,
                       "worst relative error " + detail::fmt(worst) + " over " +
                           std::to_string(instances) + " instances (tolerance " +
                           detail::fmt(tol) + ")"};
}

inline CheckResult check_hessian_domination(std::uint64_t seed, int instances, double slack) {
    SplitMix64 rng(substream_seed(seed, "check:hessian_domination"));
    double worst = std::numeric_limits<double>::infinity();
    for (int t = 0; t < instances; ++t) {
        const LossInstance inst = make_loss_instance(rng, 12, 48);
        const Mat h = dpo_hessian(inst.pp, inst.fm, inst.ds);
        const Mat sigma = empirical_covariance(inst.ds, inst.fm);
        const double gamma = loss_constants(inst.beta, inst.B).gamma;
        worst = std::min(worst, min_eigenvalue(Mat(h - gamma * sigma)));
        worst = std::min(worst, min_eigenvalue(h));
    }
    return CheckResult{"losses.hessian_dominates", worst >= -slack,
                       "smallest eigenvalue of H - gamma Sigma_D across instances: " +
                           detail::fmt(worst)};
}

inline CheckResult check_hessian_ref_shift(std::uint64_t seed, int instances) {
    SplitMix64 rng(substream_seed(seed, "check:hessian_ref_shift"));
    double worst = 0.0;
    for (int t = 0; t < instances; ++t) {
        const LossInstance inst = make_loss_instance(rng, 8, 24);
        // Snap parameters to a dyadic grid so the shifted subtraction is
        // exact and the score values agree bitwise.
        const auto snap = [](Vec v) {
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                v[i] = std::round(v[i] * 65536.0) / 65536.0;
            }
            return v;
        };
        const Vec cur = snap(inst.pp.current.theta);
        const Vec ref = snap(inst.pp.reference.theta);
        Vec shift(cur.size());
        for (Eigen::Index i = 0; i < shift.size(); ++i) {
            shift[i] = std::round(rng.uniform(-4.0, 4.0) * 16.0) / 16.0;
        }
        const PolicyPair a(PolicyParams{cur, inst.B}, PolicyParams{ref, inst.B}, inst.beta);
        const PolicyPair b(PolicyParams{Vec(cur + shift), inst.B},
                           PolicyParams{Vec(ref + shift), inst.B}, inst.beta);
        const Mat ha = dpo_hessian(a, inst.fm, inst.ds);
        const Mat hb = dpo_hessian(b, inst.fm, inst.ds);
        worst = std::max(worst, (ha - hb).cwiseAbs().maxCoeff());
    }
    return CheckResult{"losses.hessian_ref_shift", worst == 0.0,
                       "largest entry difference under equal-difference shifts: " +
                           detail::fmt(worst)};
}

inline CheckResult check_input_grad_label(std::uint64_t seed, int instances) {
    SplitMix64 rng(substream_seed(seed, "check:input_grad_label"));
    bool ok = true;
    double min_gap = std::numeric_limits<double>::infinity();
    for (int t = 0; t < instances && ok; ++t) {
        const LossInstance inst = make_loss_instance(rng, 8, 16);
        for (const PreferenceSample& z : inst.ds.samples()) {
            const double h = preference_score(inst.pp, inst.fm, z);
            if (h == 0.0) continue;
            const PreferenceSample favored(z.state, z.first, z.second, h > 0.0 ? 1 : 0);
            const PreferenceSample disfavored(z.state, z.first, z.second, h > 0.0 ? 0 : 1);
            const double g_fav = input_gradient_norm(inst.pp, inst.fm, favored);
            const double g_dis = input_gradient_norm(inst.pp, inst.fm, disfavored);
            min_gap = std::min(min_gap, g_dis - g_fav);
            if (!(g_dis > g_fav)) {
                ok = false;
                break;
            }
        }
    }
    return CheckResult{"losses.input_grad_label", ok,
                       "smallest disfavored-minus-favored norm gap: " + detail::fmt(min_gap)};
}

// ------------------------------------------------------------------
// Robust-module checks.
// ------------------------------------------------------------------

inline CheckResult check_wdpo_zero_rho(std::uint64_t seed, int instances) {
    SplitMix64 rng(substream_seed(seed, "check:wdpo_zero_rho"));
    bool ok = true;
    for (int t = 0; t < instances && ok; ++t) {
        const LossInstance inst = make_loss_instance(rng, 10, 32);
        const double a = wdpo_loss_approx(inst.pp, inst.fm, inst.ds, 0.0);
        const double b = empirical_dpo_loss(inst.pp, inst.fm, inst.ds);
        ok = (a == b);
    }
    return CheckResult{"robust.wdpo_zero_rho", ok,
                       ok ? "bitwise equal on every instance" : "values diverged"};
}

inline CheckResult check_kernel_ratio_order(std::uint64_t seed, int instances) {
    SplitMix64 rng(substream_seed(seed, "check:kernel_ratio_order"));
    bool ok = true;
    for (int t = 0; t < instances && ok; ++t) {
        const std::size_t k = detail::pick(rng, 2, 12);
        std::vector<double> losses(k);
        for (double& l : losses) l = rng.uniform(-3.0, 3.0);
        const std::vector<double> base(k, 1.0 / static_cast<double>(k));
        const double tau = rng.uniform(0.1, 5.0);
        const std::vector<double> w = kldpo_worst_kernel(losses, base, tau);
        for (std::size_t i = 0; i < k && ok; ++i) {
            for (std::size_t j = 0; j < k && ok; ++j) {
                if (losses[i] > losses[j]) ok = (w[i] > w[j]);
            }
        }
    }
    return CheckResult{"robust.kernel_likelihood_ratio", ok,
                       ok ? "weights follow the loss order at equal base mass"
                          : "an inversion was found"};
}

inline CheckResult check_kl_dual_monotone(std::uint64_t seed, int instances) {
    SplitMix64 rng(substream_seed(seed, "check:kl_dual_monotone"));
    bool ok = true;
    double worst_gap = std::numeric_limits<double>::infinity();
    for (int t = 0; t < instances && ok; ++t) {
        const TiltInstance inst = make_tilt_instance(rng, 4, 10, 0.6);
        double mean = 0.0;
        for (std::size_t i = 0; i < inst.losses.size(); ++i) mean += inst.base[i] * inst.losses[i];
        double prev = -std::numeric_limits<double>::infinity();
        for (double rho : {0.0, 0.01, 0.05, 0.1, 0.3, 0.5, 1.0}) {
            const double v = kl_dual_value(inst.losses, inst.base, rho, 1e-6, 1e6, 1e-10);
            worst_gap = std::min(worst_gap, v - mean);
            if (v < prev - 1e-8 || v < mean - 1e-10) {
                ok = false;
                break;
            }
            prev = v;
        }
    }
    return CheckResult{"robust.kl_dual_monotone", ok,
                       "smallest dual-minus-mean gap: " + detail::fmt(worst_gap)};
}

inline CheckResult check_kl_primal_dual(std::uint64_t seed, int instances, double value_tol,
                                        double kl_tol, double bound_slack) {
    SplitMix64 rng(substream_seed(seed, "check:kl_primal_dual"));
    double worst_value = 0.0, worst_kl = 0.0, worst_bound = std::numeric_limits<double>::infinity();
    for (int t = 0; t < instances; ++t) {
        const TiltInstance inst = make_tilt_instance(rng, 4, 10, 0.35);
        const double rho = rng.uniform(0.01, 1.0);
        const TiltResult tilt = kl_worst_case_exact(inst.losses, inst.base, rho, 1e-10);
        double primal = 0.0, mean = 0.0;
        for (std::size_t i = 0; i < inst.losses.size(); ++i) {
            primal += tilt.weights[i] * inst.losses[i];
            mean += inst.base[i] * inst.losses[i];
        }
        const double dual = kl_dual_value(inst.losses, inst.base, rho, 1e-6, 1e6, 1e-11);
        worst_value = std::max(worst_value, std::abs(primal - dual));
        worst_kl = std::max(worst_kl, std::abs(tilt.achieved_kl - rho));
        // Multiplier bound: -mu - lambda <= -(base-weighted mean loss).
        worst_bound = std::min(worst_bound, (-mean) - (-tilt.mu - tilt.lambda));
    }
    const bool ok = worst_value <= value_tol && worst_kl <= kl_tol && worst_bound >= -bound_slack;
    return CheckResult{"robust.kl_exact_primal_dual", ok,
                       "max |primal-dual| " + detail::fmt(worst_value) + ", max |KL-rho| " +
                           detail::fmt(worst_kl) + ", min multiplier-bound slack " +
                           detail::fmt(worst_bound)};
}

inline CheckResult check_tilt_families(std::uint64_t seed, int instances, double tol) {
    SplitMix64 rng(substream_seed(seed, "check:tilt_families"));
    double worst = 0.0;
    bool ok = true;
    for (int t = 0; t < instances && ok; ++t) {
        const TiltInstance inst = make_tilt_instance(rng, 4, 10, 0.35);
        double lo = *std::min_element(inst.losses.begin(), inst.losses.end());
        double hi = *std::max_element(inst.losses.begin(), inst.losses.end());
        const double tau = rng.uniform(1.0, 4.0) * std::max(hi - lo, 0.5);
        const std::vector<double> w = kldpo_worst_kernel(inst.losses, inst.base, tau);
        const double rho = kl_divergence(w, inst.base);
        if (rho < 1e-10) continue;
        const TiltResult tilt = kl_worst_case_exact(inst.losses, inst.base, rho, 1e-12);
        if (tilt.boundary) {
            ok = false;
            break;
        }
        for (std::size_t i = 0; i < w.size(); ++i) {
            worst = std::max(worst, std::abs(w[i] - tilt.weights[i]));
        }
    }
    return CheckResult{"robust.tilt_families_coincide", ok && worst <= tol,
                       "max weight difference between kernel and exact tilt: " +
                           detail::fmt(worst)};
}

// ------------------------------------------------------------------
// Wasserstein: transport-program oracle and the dual check.
// ------------------------------------------------------------------

// Exact optimum of the budgeted transport program over a finite candidate
// support: each sample atom spreads its 1/n mass over same-class candidates,
// total squared-distance cost at most rho^2, maximizing the expected loss.
// A vertex of this program has at most one fractional row (n equalities plus
// one budget inequality), so enumerating pure assignments together with every
// single-row split at a tight budget visits every vertex.  Exponential in the
// number of samples; intended for small verification instances only.
inline double wasserstein_transport_optimum(const std::vector<double>& atom_losses,
                                            const std::vector<Vec>& atom_coords,
                                            const std::vector<std::size_t>& sample_indices,
                                            double rho,
                                            const std::vector<int>& atom_labels = {}) {
    const std::size_t m = atom_losses.size();
    const std::size_t n = sample_indices.size();
    if (m == 0 || n == 0) throw std::domain_error("wasserstein_transport_optimum: empty input");
    const auto label_of = [&](std::size_t j) { return atom_labels.empty() ? 0 : atom_labels[j]; };

    // Per-row menu of (cost, value) options.
    std::vector<std::vector<std::pair<double, double>>> menu(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = sample_indices[i];
        for (std::size_t j = 0; j < m; ++j) {
            if (label_of(j) != label_of(idx)) continue;
            menu[i].push_back({(atom_coords[j] - atom_coords[idx]).squaredNorm(), atom_losses[j]});
        }
        if (menu[i].empty()) {
            throw std::domain_error("wasserstein_transport_optimum: a sample has no transport target");
        }
    }

    const double budget = rho * rho;
    const double inv_n = 1.0 / static_cast<double>(n);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> choice(n, 0);
    while (true) {
        double cost = 0.0, value = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cost += inv_n * menu[i][choice[i]].first;
            value += inv_n * menu[i][choice[i]].second;
        }
        if (cost <= budget + 1e-12) best = std::max(best, value);
        for (std::size_t i = 0; i < n; ++i) {
            const auto [c1, v1] = menu[i][choice[i]];
            for (const auto& [c2, v2] : menu[i]) {
                const double dc = inv_n * (c2 - c1);
                if (dc == 0.0) continue;
                const double t = (budget - cost) / dc;
                if (t < -1e-12 || t > 1.0 + 1e-12) continue;
                const double tt = std::clamp(t, 0.0, 1.0);
                best = std::max(best, value + tt * inv_n * (v2 - v1));
            }
        }
        std::size_t i = 0;
        while (i < n && ++choice[i] == menu[i].size()) {
            choice[i] = 0;
            ++i;
        }
        if (i == n) break;
    }
    if (!std::isfinite(best)) {
        throw std::domain_error("wasserstein_transport_optimum: no feasible plan within the budget");
    }
    return best;
}

struct WassersteinInstance {
    std::vector<double> losses;
    std::vector<Vec> coords;
    std::vector<int> labels;
    std::vector<std::size_t> sample_indices;
};

// Small planar instance: up to four sample atoms, each with a same-label
// cross of candidate atoms around it.
inline WassersteinInstance make_wasserstein_instance(SplitMix64& rng, std::size_t max_samples) {
    WassersteinInstance inst;
    const std::size_t n = detail::pick(rng, 2, max_samples);
    const double spacing = rng.uniform(0.25, 0.6);
    for (std::size_t i = 0; i < n; ++i) {
        Vec c(2);
        c[0] = rng.uniform(-1.0, 1.0);
        c[1] = rng.uniform(-1.0, 1.0);
        const int label = rng.bernoulli(0.5) ? 1 : 0;
        inst.sample_indices.push_back(inst.coords.size());
        inst.coords.push_back(c);
        inst.labels.push_back(label);
        inst.losses.push_back(rng.uniform(0.0, 2.0));
        const std::pair<double, double> offsets[4] = {
            {spacing, 0.0}, {-spacing, 0.0}, {0.0, spacing}, {0.0, -spacing}};
        for (const auto& [dx, dy] : offsets) {
            Vec nb(2);
            nb[0] = c[0] + dx;
            nb[1] = c[1] + dy;
            inst.coords.push_back(std::move(nb));
            inst.labels.push_back(label);
            inst.losses.push_back(rng.uniform(0.0, 2.0));
        }
    }
    return inst;
}

inline CheckResult check_wasserstein_duality(std::uint64_t seed, int instances, double tol) {
    SplitMix64 rng(substream_seed(seed, "check:wasserstein_duality"));
    double worst_gap = 0.0, worst_low = std::numeric_limits<double>::infinity();
    double worst_mono = 0.0, worst_zero = 0.0, worst_sat = 0.0;
    for (int t = 0; t < instances; ++t) {
        const WassersteinInstance inst = make_wasserstein_instance(rng, 4);
        const double rho = rng.uniform(0.05, 1.0);
        const double dual = wasserstein_dual_value(inst.losses, inst.coords, inst.sample_indices,
                                                   rho, 1e-9, inst.labels);
        const double primal = wasserstein_transport_optimum(inst.losses, inst.coords,
                                                            inst.sample_indices, rho, inst.labels);
        worst_gap = std::max(worst_gap, std::abs(dual - primal));

        double mean = 0.0, saturated = 0.0;
        for (std::size_t idx : inst.sample_indices) {
            mean += inst.losses[idx];
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < inst.losses.size(); ++j) {
                if (inst.labels[j] == inst.labels[idx]) best = std::max(best, inst.losses[j]);
            }
            saturated += best;
        }
        mean /= static_cast<double>(inst.sample_indices.size());
        saturated /= static_cast<double>(inst.sample_indices.size());
        worst_low = std::min(worst_low, dual - mean);

        // Boundary identities: rho = 0 recovers the mean loss at the atoms;
        // a radius wider than the support diameter recovers the class-wise
        // maxima.  In between the dual is nondecreasing in rho.
        const double at_zero = wasserstein_dual_value(inst.losses, inst.coords,
                                                      inst.sample_indices, 0.0, 1e-9, inst.labels);
        worst_zero = std::max(worst_zero, std::abs(at_zero - mean));
        const double at_wide = wasserstein_dual_value(inst.losses, inst.coords,
                                                      inst.sample_indices, 50.0, 1e-9, inst.labels);
        worst_sat = std::max(worst_sat, std::abs(at_wide - saturated));
        double prev = -std::numeric_limits<double>::infinity();
        for (double r : {0.0, 0.1, 0.3, 0.6, 1.0, 2.0}) {
            const double v = wasserstein_dual_value(inst.losses, inst.coords, inst.sample_indices,
                                                    r, 1e-9, inst.labels);
            worst_mono = std::max(worst_mono, prev - v);
            prev = v;
        }
    }
    const bool ok = worst_gap <= tol && worst_low >= -1e-9 && worst_mono <= 1e-8 &&
                    worst_zero <= 1e-6 && worst_sat <= 1e-6;
    return CheckResult{"robust.wasserstein_dual_bounds", ok,
                       "max dual-primal gap " + detail::fmt(worst_gap) +
                           ", min dual-minus-mean " + detail::fmt(worst_low) +
                           ", worst rho-monotonicity violation " + detail::fmt(worst_mono) +
                           ", boundary identity errors " + detail::fmt(worst_zero) + " / " +
                           detail::fmt(worst_sat)};
}

// ------------------------------------------------------------------
// Training checks.
// ------------------------------------------------------------------

struct TrainFixture {
    FeatureMap fm;
    PreferenceDataset ds;
    PolicyPair init;
};

inline TrainFixture make_train_fixture(std::uint64_t seed, std::size_t n) {
    FeatureMap fm = random_feature_map(3, 4, 3, substream_seed(seed, "fixture:fm"));
    TabularReward reward = random_reward(4, 3, 1.5, substream_seed(seed, "fixture:reward"));
    const std::vector<double> mu(4, 0.25);
    const PolicyParams behavior = uniform_reference(3, 1.0);
    const SamplingSpec sampling(mu, behavior, n, substream_seed(seed, "fixture:data"));
    PreferenceDataset ds = sample_dataset(fm, sampling, reward, "random");
    PolicyPair init(uniform_reference(3, 1.0), uniform_reference(3, 1.0), 1.0);
    return TrainFixture{std::move(fm), std::move(ds), std::move(init)};
}

inline CheckResult check_projection(std::uint64_t seed) {
    const TrainFixture fx = make_train_fixture(seed, 40);
    double worst = 0.0;
    // Oversized steps and one-sample batches stress the projection; training
    // is restartable epoch by epoch, so every epoch boundary is observable.
    for (double lr : {0.5, 10.0}) {
        for (std::size_t batch : {std::size_t{0}, std::size_t{1}}) {
            TrainConfig cfg;
            cfg.method = Method::dpo;
            cfg.lr = lr;
            cfg.epochs = 1;
            cfg.batch = batch;
            cfg.beta = 1.0;
            cfg.B = 1.0;
            PolicyPair pp = fx.init;
            for (int e = 0; e < 6; ++e) {
                const TrainReport rep = train(cfg, pp, fx.fm, fx.ds);
                worst = std::max(worst, rep.final_params.theta.norm() - cfg.B);
                pp = PolicyPair(rep.final_params, pp.reference, pp.beta);
            }
        }
    }
    return CheckResult{"train.projection", worst <= 1e-12,
                       "largest norm excess over B: " + detail::fmt(worst)};
}

inline CheckResult check_descent(std::uint64_t seed) {
    const TrainFixture fx = make_train_fixture(seed, 60);
    TrainConfig cfg;
    cfg.method = Method::dpo;
    cfg.beta = 1.5;
    cfg.B = 1.0;
    // Smoothness of the empirical loss is at most beta^2/4 times the largest
    // eigenvalue of Sigma_D, itself at most 4; lr = 1/beta^2 is a safe step.
    cfg.lr = 1.0 / (cfg.beta * cfg.beta);
    cfg.epochs = 200;
    cfg.stop_tol = 0.0;
    const PolicyPair init(uniform_reference(3, 1.0), uniform_reference(3, 1.0), cfg.beta);
    const TrainReport rep = train(cfg, init, fx.fm, fx.ds);
    const double initial = empirical_dpo_loss(init, fx.fm, fx.ds);
    double worst = rep.loss_trace.front() - initial;
    for (std::size_t k = 0; k + 1 < rep.loss_trace.size(); ++k) {
        worst = std::max(worst, rep.loss_trace[k + 1] - rep.loss_trace[k]);
    }
    return CheckResult{"train.descent", worst <= 1e-12,
                       "largest per-epoch loss increase: " + detail::fmt(worst)};
}

inline CheckResult check_method_reductions(std::uint64_t seed) {
    const TrainFixture fx = make_train_fixture(seed, 50);
    const auto run = [&](Method m, double rho_o, double tau) {
        TrainConfig cfg;
        cfg.method = m;
        cfg.beta = 1.0;
        cfg.B = 1.0;
        cfg.lr = 0.2;
        cfg.epochs = 100;
        cfg.stop_tol = 0.0;
        if (m == Method::wdpo) {
            cfg.robust.kind = RobustKind::wasserstein_approx;
            cfg.robust.rho_o = rho_o;
        } else if (m == Method::kldpo) {
            cfg.robust.kind = RobustKind::kl_approx;
            cfg.robust.tau = tau;
        }
        return train(cfg, fx.init, fx.fm, fx.ds);
    };
    const TrainReport dpo = run(Method::dpo, 0.0, 0.0);
    const TrainReport wdpo = run(Method::wdpo, 0.0, 0.0);
    const TrainReport kldpo = run(Method::kldpo, 0.0, 1e6);

    bool wdpo_bitwise = wdpo.loss_trace.size() == dpo.loss_trace.size() &&
                        wdpo.final_params.theta == dpo.final_params.theta;
    for (std::size_t k = 0; wdpo_bitwise && k < dpo.loss_trace.size(); ++k) {
        wdpo_bitwise = wdpo.loss_trace[k] == dpo.loss_trace[k];
    }
    double kld_gap = std::abs(kldpo.final_params.theta.norm() - dpo.final_params.theta.norm());
    for (std::size_t k = 0; k < std::min(kldpo.loss_trace.size(), dpo.loss_trace.size()); ++k) {
        kld_gap = std::max(kld_gap, std::abs(kldpo.loss_trace[k] - dpo.loss_trace[k]));
    }
    const bool ok = wdpo_bitwise && kld_gap <= 1e-6 &&
                    kldpo.loss_trace.size() == dpo.loss_trace.size();
    return CheckResult{"train.method_reductions", ok,
                       std::string("zero-radius trace bitwise equal: ") +
                           (wdpo_bitwise ? "yes" : "no") +
                           ", high-temperature trace gap: " + detail::fmt(kld_gap)};
}

inline CheckResult check_train_determinism(std::uint64_t seed) {
    const TrainFixture fx = make_train_fixture(seed, 40);
    TrainConfig cfg;
    cfg.method = Method::kldpo;
    cfg.robust.kind = RobustKind::kl_approx;
    cfg.robust.tau = 1.0;
    cfg.beta = 1.0;
    cfg.B = 1.0;
    cfg.lr = 0.3;
    cfg.epochs = 40;
    cfg.batch = 16;
    const TrainReport a = train(cfg, fx.init, fx.fm, fx.ds);
    const TrainReport b = train(cfg, fx.init, fx.fm, fx.ds);
    const bool ok = train_report_to_json(a).dump() == train_report_to_json(b).dump() &&
                    a.final_params.theta == b.final_params.theta;
    return CheckResult{"train.determinism", ok,
                       ok ? "two runs agree bitwise" : "reports diverged"};
}

} // namespace checks

inline CheckReport run_verification_suite(std::uint64_t seed) {
    CheckReport report;
    report.results.push_back(checks::check_loss_bounds(seed, 150));
    report.results.push_back(checks::check_gradient_fd(seed, 120, 1e-5));
    report.results.push_back(checks::check_hessian_domination(seed, 120, 1e-10));
    report.results.push_back(checks::check_hessian_ref_shift(seed, 60));
    report.results.push_back(checks::check_input_grad_label(seed, 60));
    report.results.push_back(checks::check_wdpo_zero_rho(seed, 60));
    report.results.push_back(checks::check_kernel_ratio_order(seed, 120));
    report.results.push_back(checks::check_kl_dual_monotone(seed, 40));
    report.results.push_back(checks::check_kl_primal_dual(seed, 60, 1e-5, 1e-8, 1e-10));
    report.results.push_back(checks::check_wasserstein_duality(seed, 20, 1e-3));
    report.results.push_back(checks::check_tilt_families(seed, 40, 1e-8));
    report.results.push_back(checks::check_projection(seed));
    report.results.push_back(checks::check_descent(seed));
    report.results.push_back(checks::check_method_reductions(seed));
    report.results.push_back(checks::check_train_determinism(seed));

    std::set<std::string> executed;
    for (const CheckResult& r : report.results) executed.insert(r.id);
    report.all_passed = true;
    for (const auto& [id, desc] : invariant_manifest()) {
        if (!executed.count(id)) {
            report.uncovered.push_back(id);
            report.all_passed = false;
        }
    }
    for (const CheckResult& r : report.results) report.all_passed &= r.passed;
    return report;
}

inline json check_report_to_json(const CheckReport& report) {
    json checks_json = json::array();
    for (const CheckResult& r : report.results) {
        checks_json.push_back(json{{"id", r.id}, {"passed", r.passed}, {"detail", r.detail}});
    }
    json uncovered = json::array();
    for (const std::string& id : report.uncovered) uncovered.push_back(id);
    return json{{"all_passed", report.all_passed},
                {"checks", std::move(checks_json)},
                {"uncovered_invariants", std::move(uncovered)}};
}

} // namespace prefopt
