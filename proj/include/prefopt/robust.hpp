#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "losses.hpp"
#include "numeric.hpp"
#include "policy.hpp"

namespace prefopt {

enum class RobustKind { wasserstein_approx, kl_approx, kl_exact, wasserstein_exact };

// Ambiguity-set configuration shared by the robust losses and the exact
// solvers.  rho_o is the gradient-penalty weight of the tractable Wasserstein
// loss, tau the tilt temperature of the tractable KL loss, rho the exact
// ball radius, [lambda_lo, lambda_hi] the KL dual search interval.
struct RobustSpec {
    RobustKind kind = RobustKind::kl_approx;
    double rho_o = 0.0;
    double tau = 1.0;
    double rho = 0.0;
    int p = 2;
    double lambda_lo = 1e-6;
    double lambda_hi = 1e6;
    double tol = 1e-8;

    void validate() const {
        if (!(rho_o >= 0.0)) throw std::invalid_argument("RobustSpec: rho_o must be nonnegative");
        if (!(tau > 0.0)) throw std::invalid_argument("RobustSpec: tau must be positive");
        if (!(rho >= 0.0)) throw std::invalid_argument("RobustSpec: rho must be nonnegative");
        if (p != 2) throw std::invalid_argument("RobustSpec: only order p = 2 is supported");
        if (!(lambda_lo > 0.0 && lambda_lo < lambda_hi)) {
            throw std::invalid_argument("RobustSpec: need 0 < lambda_lo < lambda_hi");
        }
        if (!(tol > 0.0)) throw std::invalid_argument("RobustSpec: tol must be positive");
    }
};

// Exponentially tilted distribution at temperature lambda together with the
// multipliers that certify it and the divergence it attains.
struct TiltResult {
    std::vector<double> weights;
    double lambda = 0.0;
    double mu = 0.0;
    double achieved_kl = 0.0;
    bool boundary = false;
    int iterations = 0;
};

namespace detail {

inline void check_distribution(const std::vector<double>& base, const char* who) {
    double sum = 0.0;
    for (double q : base) {
        if (q < 0.0) throw std::invalid_argument(std::string(who) + ": negative base weight");
        sum += q;
    }
    // Summing n rounded weights drifts by O(n) ulps, so the tolerance must
    // scale with the atom count (uniform weights over 10^6 atoms are fine,
    // an unnormalized vector is still rejected).
    const double tol = 1e-12 + 2.5e-16 * static_cast<double>(base.size());
    if (std::abs(sum - 1.0) > tol) {
        throw std::invalid_argument(std::string(who) + ": base weights must sum to 1");
    }
}

inline bool all_equal_on_support(const std::vector<double>& losses,
                                 const std::vector<double>& base) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < losses.size(); ++i) {
        if (base[i] > 0.0) {
            lo = std::min(lo, losses[i]);
            hi = std::max(hi, losses[i]);
        }
    }
    return lo == hi;
}

inline double max_on_support(const std::vector<double>& losses, const std::vector<double>& base) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < losses.size(); ++i) {
        if (base[i] > 0.0) m = std::max(m, losses[i]);
    }
    return m;
}

// log sum_i q_i exp(l_i / lambda), max-subtracted.
inline double log_mgf(const std::vector<double>& losses, const std::vector<double>& base,
                      double lambda) {
    const double m = max_on_support(losses, base);
    double s = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        if (base[i] > 0.0) s += base[i] * std::exp((losses[i] - m) / lambda);
    }
    return m / lambda + std::log(s);
}

} // namespace detail

// Normalized exponential tilt w_i proportional to base_i exp(losses_i/lambda),
// computed with max-subtraction.  This single primitive underlies both the
// tractable kernel (lambda = tau) and the exact KL worst case (lambda found
// by bisection), so the two families coincide by construction.
inline std::vector<double> exponential_tilt(const std::vector<double>& losses,
                                            const std::vector<double>& base, double lambda) {
    if (losses.size() != base.size()) throw std::domain_error("exponential_tilt: size mismatch");
    if (!(lambda > 0.0)) throw std::invalid_argument("exponential_tilt: lambda must be positive");
    const double m = detail::max_on_support(losses, base);
    std::vector<double> w(losses.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        if (base[i] > 0.0) {
            w[i] = base[i] * std::exp((losses[i] - m) / lambda);
            sum += w[i];
        }
    }
    for (double& v : w) v /= sum;
    return w;
}

// KL divergence sum_i w_i log(w_i / q_i) over the common support.
inline double kl_divergence(const std::vector<double>& w, const std::vector<double>& q) {
    if (w.size() != q.size()) throw std::domain_error("kl_divergence: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) {
            if (!(q[i] > 0.0)) return std::numeric_limits<double>::infinity();
            kl += w[i] * std::log(w[i] / q[i]);
        }
    }
    return std::max(kl, 0.0);
}

// Sample reweighting of the tractable KL loss: w_i proportional to
// q_i exp((l_i - sum_j q_j l_j) / tau).  The centering term cancels in the
// normalization, so this is the exponential tilt at temperature tau; equal
// losses reduce to the base exactly.
inline std::vector<double> kldpo_worst_kernel(const std::vector<double>& losses,
                                              const std::vector<double>& base, double tau) {
    if (losses.size() != base.size()) throw std::domain_error("kldpo_worst_kernel: size mismatch");
    if (losses.empty()) throw std::domain_error("kldpo_worst_kernel: empty input");
    if (!(tau > 0.0)) throw std::invalid_argument("kldpo_worst_kernel: tau must be positive");
    detail::check_distribution(base, "kldpo_worst_kernel");
    if (detail::all_equal_on_support(losses, base)) return base;
    return exponential_tilt(losses, base, tau);
}

// Tractable Wasserstein loss: empirical loss plus rho_o times the root mean
// square of the per-sample input-gradient norms.  rho_o = 0 short-circuits to
// the plain empirical loss so the reduction is exact.
inline double wdpo_loss_approx(const PolicyPair& pp, const FeatureMap& fm,
                               const PreferenceDataset& ds, double rho_o) {
    if (ds.empty()) throw std::domain_error("wdpo_loss_approx: empty dataset");
    if (!(rho_o >= 0.0)) throw std::invalid_argument("wdpo_loss_approx: rho_o must be nonnegative");
    const CompiledDataset cd = CompiledDataset::build(ds, fm);
    const Vec delta = pp.current.theta - pp.reference.theta;
    const double base = xy::empirical_loss(cd, delta, pp.beta);
    if (rho_o == 0.0) return base;
    return base + rho_o * std::sqrt(xy::mean_sq_input_grad(cd, delta, pp.beta));
}

// Per-sample upper bound on the tractable Wasserstein loss obtained from
// sqrt(x) <= x on x >= 1: pointwise loss plus rho_o times the squared
// input-gradient norm.
inline double wdpo_pointwise_upper(const PolicyPair& pp, const FeatureMap& fm,
                                   const PreferenceSample& z, double rho_o) {
    if (!(rho_o >= 0.0)) throw std::invalid_argument("wdpo_pointwise_upper: rho_o must be nonnegative");
    const double g = input_gradient_norm(pp, fm, z);
    return pointwise_dpo_loss(pp, fm, z) + rho_o * g * g;
}

// Tractable KL loss: kernel-weighted mean of the pointwise losses with the
// kernel frozen at the current parameters.
inline double kldpo_loss_approx(const PolicyPair& pp, const FeatureMap& fm,
                                const PreferenceDataset& ds, double tau) {
    if (ds.empty()) throw std::domain_error("kldpo_loss_approx: empty dataset");
    const CompiledDataset cd = CompiledDataset::build(ds, fm);
    const Vec delta = pp.current.theta - pp.reference.theta;
    const std::vector<double> losses = xy::pointwise_losses(cd, delta, pp.beta);
    const std::vector<double> base(losses.size(), 1.0 / static_cast<double>(losses.size()));
    const std::vector<double> w = kldpo_worst_kernel(losses, base, tau);
    double value = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) value += w[i] * losses[i];
    return value;
}

// Dual value of the KL-ball worst case:
// inf over lambda in [lambda_lo, lambda_hi] of
//   lambda * rho + lambda * log sum_i q_i exp(l_i / lambda).
// The objective is convex in lambda; golden-section search narrows the
// bracket to width tol.  Equal losses short-circuit to the degenerate value.
inline double kl_dual_value(const std::vector<double>& losses, const std::vector<double>& base,
                            double rho, double lambda_lo, double lambda_hi, double tol) {
    if (losses.size() != base.size()) throw std::domain_error("kl_dual_value: size mismatch");
    if (losses.empty()) throw std::domain_error("kl_dual_value: empty input");
    if (!(rho >= 0.0)) throw std::invalid_argument("kl_dual_value: rho must be nonnegative");
    if (!(lambda_lo > 0.0 && lambda_lo < lambda_hi)) {
        throw std::invalid_argument("kl_dual_value: need 0 < lambda_lo < lambda_hi");
    }
    if (!(tol > 0.0)) throw std::invalid_argument("kl_dual_value: tol must be positive");
    detail::check_distribution(base, "kl_dual_value");
    if (detail::all_equal_on_support(losses, base)) {
        return detail::max_on_support(losses, base) + lambda_lo * rho;
    }
    const auto objective = [&](double lambda) {
        return lambda * rho + lambda * detail::log_mgf(losses, base, lambda);
    };
    return golden_section_minimize(objective, lambda_lo, lambda_hi, tol).value;
}

// Exact worst case over the KL ball of radius rho: the exponential tilt
// p_i = q_i exp((l_i - mu - lambda) / lambda) whose divergence equals rho.
// The divergence of the tilt is continuous and strictly decreasing in lambda,
// so bisection over [1e-6, 1e6] pins it to within tol.  When rho is not
// attainable by any tilt (it exceeds the divergence of the point mass on the
// argmax losses) the saturated limit is returned with boundary set.
inline TiltResult kl_worst_case_exact(const std::vector<double>& losses,
                                      const std::vector<double>& base, double rho, double tol) {
    if (losses.size() != base.size()) throw std::domain_error("kl_worst_case_exact: size mismatch");
    if (losses.empty()) throw std::domain_error("kl_worst_case_exact: empty input");
    if (!(rho > 0.0)) throw std::invalid_argument("kl_worst_case_exact: rho must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("kl_worst_case_exact: tol must be positive");
    detail::check_distribution(base, "kl_worst_case_exact");
    if (detail::all_equal_on_support(losses, base)) {
        throw std::domain_error("kl_worst_case_exact: losses are all equal, no tilt attains rho > 0");
    }

    const double max_loss = detail::max_on_support(losses, base);
    double argmax_mass = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        if (base[i] > 0.0 && losses[i] == max_loss) argmax_mass += base[i];
    }
    const double kl_point_mass = -std::log(argmax_mass);

    const double lambda_lo = 1e-6, lambda_hi = 1e6;
    const auto kl_at = [&](double lambda) {
        return kl_divergence(exponential_tilt(losses, base, lambda), base);
    };

    if (rho >= kl_point_mass || rho >= kl_at(lambda_lo)) {
        // Saturated: the tilt family cannot reach rho.  Report the point-mass
        // limit on the argmax set (lambda -> 0).
        TiltResult out;
        out.weights.assign(losses.size(), 0.0);
        for (std::size_t i = 0; i < losses.size(); ++i) {
            if (base[i] > 0.0 && losses[i] == max_loss) out.weights[i] = base[i] / argmax_mass;
        }
        out.lambda = 0.0;
        out.mu = max_loss;
        out.achieved_kl = kl_point_mass;
        out.boundary = true;
        return out;
    }

    double lo = lambda_lo, hi = lambda_hi;
    double lambda = lo;
    double kl = 0.0;
    int iterations = 0;
    bool saturated_hi = false;
    if (kl_at(hi) > rho) {
        // rho is below what the widest tilt in the bracket attains; report the
        // near-base saturation at lambda_hi.
        lambda = hi;
        kl = kl_at(hi);
        saturated_hi = true;
    } else {
        for (iterations = 0; iterations < 500; ++iterations) {
            lambda = 0.5 * (lo + hi);
            kl = kl_at(lambda);
            if (std::abs(kl - rho) <= 0.5 * tol) break;
            if (kl > rho) {
                lo = lambda;
            } else {
                hi = lambda;
            }
        }
    }

    TiltResult out;
    out.weights = exponential_tilt(losses, base, lambda);
    out.lambda = lambda;
    out.achieved_kl = kl_divergence(out.weights, base);
    out.mu = lambda * detail::log_mgf(losses, base, lambda) - lambda;
    out.boundary = saturated_hi;
    out.iterations = iterations;
    return out;
}

// Dual value of the Wasserstein-ball worst case over a finite candidate
// support:
//   inf over eta >= 0 of  eta rho^2 - (1/n) sum_i min_j (eta d²(z_j, z_i) - l_j),
// with d the Euclidean distance between atom embeddings and order p = 2
// fixed.  atom_labels partitions the support into transport classes; a
// sample may only be moved to atoms of its own class (labels are immutable,
// matching the choice that only the feature embedding of a sample is
// perturbable).  The inner minimum is exact; the outer minimization is
// golden-section over [0, eta_max] with eta_max large enough that every
// sample's inner minimizer is its own atom.
inline double wasserstein_dual_value(const std::vector<double>& atom_losses,
                                     const std::vector<Vec>& atom_coords,
                                     const std::vector<std::size_t>& sample_indices, double rho,
                                     double tol, const std::vector<int>& atom_labels = {}) {
    const std::size_t m = atom_losses.size();
    if (m == 0) throw std::domain_error("wasserstein_dual_value: empty support");
    if (atom_coords.size() != m) throw std::domain_error("wasserstein_dual_value: coords size mismatch");
    if (!atom_labels.empty() && atom_labels.size() != m) {
        throw std::domain_error("wasserstein_dual_value: labels size mismatch");
    }
    if (sample_indices.empty()) throw std::domain_error("wasserstein_dual_value: no samples");
    if (!(rho >= 0.0)) throw std::invalid_argument("wasserstein_dual_value: rho must be nonnegative");
    if (!(tol > 0.0)) throw std::invalid_argument("wasserstein_dual_value: tol must be positive");
    for (std::size_t idx : sample_indices) {
        if (idx >= m) throw std::domain_error("wasserstein_dual_value: sample index out of range");
    }
    const auto label_of = [&](std::size_t j) { return atom_labels.empty() ? 0 : atom_labels[j]; };

    // Sum of inner minima at a given eta, averaged over the samples.
    const auto mean_inner = [&](double eta) {
        double sum = 0.0;
        for (std::size_t idx : sample_indices) {
            const int cls = label_of(idx);
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < m; ++j) {
                if (label_of(j) != cls) continue;
                const double d2 = (atom_coords[j] - atom_coords[idx]).squaredNorm();
                best = std::min(best, eta * d2 - atom_losses[j]);
            }
            sum += best;
        }
        return sum / static_cast<double>(sample_indices.size());
    };
    const auto dual = [&](double eta) { return eta * rho * rho - mean_inner(eta); };

    double spread_lo = std::numeric_limits<double>::infinity();
    double spread_hi = -std::numeric_limits<double>::infinity();
    double min_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
        spread_lo = std::min(spread_lo, atom_losses[j]);
        spread_hi = std::max(spread_hi, atom_losses[j]);
        for (std::size_t k = j + 1; k < m; ++k) {
            if (label_of(j) != label_of(k)) continue;
            const double d2 = (atom_coords[j] - atom_coords[k]).squaredNorm();
            if (d2 > 0.0) min_d2 = std::min(min_d2, d2);
        }
    }
    const double spread = spread_hi - spread_lo;
    if (spread <= 0.0 || !std::isfinite(min_d2)) {
        // Either a flat loss surface or a support without distinct locations;
        // the dual is monotone and attains its infimum at eta = 0.
        return dual(0.0);
    }
    const double eta_max = 2.0 * spread / min_d2;
    // The infimum can sit on either end of the bracket (rho = 0 pushes it to
    // eta_max, a radius past the support diameter pushes it to 0); evaluating
    // the endpoints keeps those degenerate values exact instead of paying the
    // bracket-midpoint error.
    const double interior = golden_section_minimize(dual, 0.0, eta_max, tol).value;
    return std::min({interior, dual(0.0), dual(eta_max)});
}

inline json tilt_result_to_json(const TiltResult& t) {
    json weights = json::array();
    for (double w : t.weights) weights.push_back(w);
    return json{{"achieved_kl", t.achieved_kl}, {"boundary", t.boundary},
                {"iterations", t.iterations},   {"lambda", t.lambda},
                {"mu", t.mu},                   {"weights", std::move(weights)}};
}

} // namespace prefopt
