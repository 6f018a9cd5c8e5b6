#pragma once

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "core.hpp"
#include "numeric.hpp"

namespace prefopt {

// Current and reference policy parameters plus the preference temperature
// beta.  Both parameter vectors must match the feature dimension in use.
struct PolicyPair {
    PolicyPair(PolicyParams current_, PolicyParams reference_, double beta_)
        : current(std::move(current_)), reference(std::move(reference_)), beta(beta_) {
        if (current.theta.size() != reference.theta.size()) {
            throw std::invalid_argument("PolicyPair: parameter dimensions differ");
        }
        if (!(beta > 0.0)) throw std::invalid_argument("PolicyPair: beta must be positive");
    }

    PolicyParams current;
    PolicyParams reference;
    double beta;
};

// Uniform reference policy of dimension d (theta_ref = 0), the default when
// nothing else is configured.
inline PolicyParams uniform_reference(int dim, double bound) {
    return PolicyParams{Vec::Zero(dim), bound};
}

namespace detail {

inline void check_dims(const PolicyParams& p, const FeatureMap& fm, const char* who) {
    if (p.theta.size() != fm.dim()) {
        throw std::domain_error(std::string(who) + ": parameter dimension mismatch");
    }
}

} // namespace detail

// log softmax of theta^T psi(state, .) with max-subtraction.
inline Vec action_log_probabilities(const PolicyParams& p, const FeatureMap& fm, int state) {
    detail::check_dims(p, fm, "action_log_probabilities");
    Vec logits(fm.num_actions());
    for (int a = 0; a < fm.num_actions(); ++a) {
        logits(a) = p.theta.dot(fm.psi(state, a));
    }
    const double m = logits.maxCoeff();
    double sum = 0.0;
    for (int a = 0; a < fm.num_actions(); ++a) sum += std::exp(logits(a) - m);
    const double lse = m + std::log(sum);
    return logits.array() - lse;
}

// Softmax policy over actions at the given state; entries are positive and
// sum to 1 within 1e-12.
inline Vec action_probabilities(const PolicyParams& p, const FeatureMap& fm, int state) {
    return action_log_probabilities(p, fm, state).array().exp();
}

// Log-ratio form of the preference score, kept as a verification oracle for
// the closed form below.
inline double preference_score_log_ratio(const PolicyPair& pp, const FeatureMap& fm,
                                         const PreferenceSample& z) {
    const Vec cur = action_log_probabilities(pp.current, fm, z.state);
    const Vec ref = action_log_probabilities(pp.reference, fm, z.state);
    return (cur(z.first) - ref(z.first)) - (cur(z.second) - ref(z.second));
}

// Preference score h(s, a1, a2) = (theta - theta_ref)^T (psi(s,a1) - psi(s,a2)).
// The softmax normalizers cancel in the log ratio, which is what makes the
// score linear in theta; debug builds cross-check that identity.
inline double preference_score(const PolicyPair& pp, const FeatureMap& fm,
                               const PreferenceSample& z) {
    detail::check_dims(pp.current, fm, "preference_score");
    detail::check_dims(pp.reference, fm, "preference_score");
    const Vec x = feature_difference(z, fm);
    const double h = (pp.current.theta - pp.reference.theta).dot(x);
    assert(std::abs(h - preference_score_log_ratio(pp, fm, z)) <= 1e-10);
    return h;
}

// Euclidean projection onto the ball ||theta|| <= bound.  Interior points are
// returned unchanged, so repeated projection is a fixed point.
inline PolicyParams project_params(const PolicyParams& p) {
    const double norm = p.theta.norm();
    if (norm <= p.bound) return p;
    return PolicyParams{p.theta * (p.bound / norm), p.bound};
}

inline json policy_params_to_json(const PolicyParams& p) {
    json theta = json::array();
    for (Eigen::Index i = 0; i < p.theta.size(); ++i) theta.push_back(p.theta(i));
    return json{{"B", p.bound}, {"theta", std::move(theta)}};
}

inline PolicyParams policy_params_from_json(const json& j) {
    const auto& theta = j.at("theta");
    Vec v(static_cast<Eigen::Index>(theta.size()));
    for (std::size_t i = 0; i < theta.size(); ++i) v(static_cast<Eigen::Index>(i)) = theta.at(i).get<double>();
    return PolicyParams{std::move(v), j.at("B").get<double>()};
}

} // namespace prefopt
