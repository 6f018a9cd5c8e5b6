#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "numeric.hpp"
#include "policy.hpp"
#include "rng.hpp"

namespace prefopt {

// Dense reward table r(s, a); all entries must be finite.
class TabularReward {
public:
    TabularReward(int num_states, int num_actions, std::vector<double> table)
        : num_states_(num_states), num_actions_(num_actions), table_(std::move(table)) {
        if (num_states_ <= 0 || num_actions_ <= 0) {
            throw std::invalid_argument("TabularReward: counts must be positive");
        }
        if (table_.size() != static_cast<std::size_t>(num_states_) * num_actions_) {
            throw std::invalid_argument("TabularReward: table must cover the full grid");
        }
        for (double v : table_) {
            if (!std::isfinite(v)) throw std::invalid_argument("TabularReward: non-finite entry");
        }
    }

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }

    double r(int state, int action) const {
        if (state < 0 || state >= num_states_) throw std::out_of_range("TabularReward: state out of range");
        if (action < 0 || action >= num_actions_) throw std::out_of_range("TabularReward: action out of range");
        return table_[static_cast<std::size_t>(state) * num_actions_ + action];
    }

    const std::vector<double>& table() const { return table_; }

private:
    int num_states_;
    int num_actions_;
    std::vector<double> table_;
};

// Nominal data-generating distribution: prompts from prompt_dist, two
// responses drawn i.i.d. from the behavior policy, labels from the pairwise
// comparison probability under the reward in use.
struct SamplingSpec {
    SamplingSpec(std::vector<double> prompt_dist_, PolicyParams behavior_, std::size_t n_,
                 std::uint64_t seed_)
        : prompt_dist(std::move(prompt_dist_)), behavior(std::move(behavior_)), n(n_), seed(seed_) {
        double sum = 0.0;
        for (double p : prompt_dist) {
            if (p < 0.0) throw std::invalid_argument("SamplingSpec: negative prompt probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw std::invalid_argument("SamplingSpec: prompt distribution must sum to 1");
        }
    }

    std::vector<double> prompt_dist;
    PolicyParams behavior;
    std::size_t n;
    std::uint64_t seed;
};

struct MixtureSpec {
    enum class Mode { convex, geometric };

    MixtureSpec(Mode mode_, double alpha_) : mode(mode_), alpha(alpha_) {
        if (!(alpha >= 0.0 && alpha <= 1.0)) {
            throw std::invalid_argument("MixtureSpec: alpha must lie in [0, 1]");
        }
    }

    Mode mode;
    double alpha;
};

inline std::string mixture_mode_name(MixtureSpec::Mode m) {
    return m == MixtureSpec::Mode::convex ? "convex" : "geometric";
}

// Pairwise comparison probability P(a1 preferred over a2 | s): the logistic
// function of the reward difference, evaluated in log space so large rewards
// cannot overflow.
inline double bt_preference_prob(const TabularReward& r, int state, int a1, int a2) {
    return sigmoid(r.r(state, a1) - r.r(state, a2));
}

// Entrywise mixture of two reward tables.  Convex: alpha*r1 + (1-alpha)*r2.
// Geometric: r1^alpha * r2^(1-alpha), defined only for strictly positive
// tables.
inline TabularReward mixture_reward(const TabularReward& r1, const TabularReward& r2,
                                    const MixtureSpec& spec) {
    if (r1.num_states() != r2.num_states() || r1.num_actions() != r2.num_actions()) {
        throw std::invalid_argument("mixture_reward: reward grids differ");
    }
    const std::size_t total = r1.table().size();
    std::vector<double> out(total);
    if (spec.mode == MixtureSpec::Mode::convex) {
        for (std::size_t i = 0; i < total; ++i) {
            out[i] = spec.alpha * r1.table()[i] + (1.0 - spec.alpha) * r2.table()[i];
        }
    } else {
        for (std::size_t i = 0; i < total; ++i) {
            const double a = r1.table()[i];
            const double b = r2.table()[i];
            if (!(a > 0.0) || !(b > 0.0)) {
                throw std::domain_error("mixture_reward: geometric mode requires strictly positive rewards");
            }
            out[i] = std::pow(a, spec.alpha) * std::pow(b, 1.0 - spec.alpha);
        }
    }
    return TabularReward(r1.num_states(), r1.num_actions(), std::move(out));
}

// Draws n comparison records from the nominal distribution.  Response pairs
// are redrawn together whenever the two draws coincide, which conditions the
// pair law on distinctness without biasing it.  A state whose behavior policy
// is numerically a point mass would never produce a distinct pair; sampling
// gives up after a bounded number of rejections rather than spinning.
inline PreferenceDataset sample_dataset(const FeatureMap& fm, const SamplingSpec& spec,
                                        const TabularReward& r, std::string reward_desc = {},
                                        double alpha_o = 0.0) {
    if (spec.n < 1) throw std::invalid_argument("sample_dataset: n must be at least 1");
    if (fm.num_actions() < 2) {
        throw std::domain_error("sample_dataset: need at least two actions to form a pair");
    }
    if (static_cast<int>(spec.prompt_dist.size()) != fm.num_states()) {
        throw std::invalid_argument("sample_dataset: prompt distribution size mismatch");
    }
    if (r.num_states() != fm.num_states() || r.num_actions() != fm.num_actions()) {
        throw std::invalid_argument("sample_dataset: reward grid mismatch");
    }

    std::vector<std::vector<double>> behavior_probs(fm.num_states());
    for (int s = 0; s < fm.num_states(); ++s) {
        const Vec p = action_probabilities(spec.behavior, fm, s);
        behavior_probs[s].assign(p.data(), p.data() + p.size());
    }

    SplitMix64 rng(spec.seed);
    std::vector<PreferenceSample> samples;
    samples.reserve(spec.n);
    constexpr int kMaxPairAttempts = 1000000;
    for (std::size_t i = 0; i < spec.n; ++i) {
        const int s = static_cast<int>(rng.categorical(spec.prompt_dist));
        int a1 = -1, a2 = -1;
        int attempts = 0;
        do {
            if (++attempts > kMaxPairAttempts) {
                throw std::domain_error(
                    "sample_dataset: behavior policy is numerically deterministic at state " +
                    std::to_string(s));
            }
            a1 = static_cast<int>(rng.categorical(behavior_probs[s]));
            a2 = static_cast<int>(rng.categorical(behavior_probs[s]));
        } while (a1 == a2);
        const int y = rng.bernoulli(bt_preference_prob(r, s, a1, a2)) ? 1 : 0;
        samples.emplace_back(s, a1, a2, y);
    }

    DatasetMeta meta;
    meta.seed = spec.seed;
    meta.reward = std::move(reward_desc);
    meta.alpha_o = alpha_o;
    meta.n = spec.n;
    return PreferenceDataset(std::move(samples), std::move(meta));
}

// Reward whose pairwise comparison probabilities coincide with the preference
// score of theta_true: r(s, a) = beta * (log pi_true(a|s) - log pi_ref(a|s)).
// The per-state normalizer is dropped since comparison probabilities are
// invariant to it; this makes theta_true the population minimizer used by the
// rate studies.
inline TabularReward realizable_reward(const PolicyParams& theta_true, const PolicyParams& pp_ref,
                                       double beta, const FeatureMap& fm) {
    if (!(beta > 0.0)) throw std::invalid_argument("realizable_reward: beta must be positive");
    std::vector<double> table(static_cast<std::size_t>(fm.num_states()) * fm.num_actions());
    for (int s = 0; s < fm.num_states(); ++s) {
        const Vec lp_true = action_log_probabilities(theta_true, fm, s);
        const Vec lp_ref = action_log_probabilities(pp_ref, fm, s);
        for (int a = 0; a < fm.num_actions(); ++a) {
            table[static_cast<std::size_t>(s) * fm.num_actions() + a] =
                beta * (lp_true(a) - lp_ref(a));
        }
    }
    return TabularReward(fm.num_states(), fm.num_actions(), std::move(table));
}

// sum_s mu(s) sum_a pi(a|s) r(s, a) with plain sequential summation.
inline double expected_policy_reward(const PolicyParams& p, const FeatureMap& fm,
                                     const std::vector<double>& mu, const TabularReward& r) {
    if (static_cast<int>(mu.size()) != fm.num_states()) {
        throw std::invalid_argument("expected_policy_reward: state distribution size mismatch");
    }
    if (r.num_states() != fm.num_states() || r.num_actions() != fm.num_actions()) {
        throw std::invalid_argument("expected_policy_reward: reward grid mismatch");
    }
    double total = 0.0;
    for (int s = 0; s < fm.num_states(); ++s) {
        if (mu[s] == 0.0) continue;
        const Vec probs = action_probabilities(p, fm, s);
        double inner = 0.0;
        for (int a = 0; a < fm.num_actions(); ++a) inner += probs(a) * r.r(s, a);
        total += mu[s] * inner;
    }
    return total;
}

inline json tabular_reward_to_json(const TabularReward& r) {
    json table = json::array();
    for (double v : r.table()) table.push_back(v);
    return json{{"num_states", r.num_states()},
                {"num_actions", r.num_actions()},
                {"table", std::move(table)}};
}

inline TabularReward tabular_reward_from_json(const json& j) {
    const int num_states = j.at("num_states").get<int>();
    const int num_actions = j.at("num_actions").get<int>();
    const auto& table = j.at("table");
    std::vector<double> entries;
    entries.reserve(table.size());
    for (const auto& v : table) entries.push_back(v.get<double>());
    return TabularReward(num_states, num_actions, std::move(entries));
}

} // namespace prefopt
