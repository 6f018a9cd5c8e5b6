// Small deterministic fixtures shared across the unit tests.
#pragma once

#include <prefopt/prefopt.hpp>

#include <cstdint>
#include <vector>

namespace testfx {

using prefopt::Vec;

inline Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

// 1 state, 2 actions, d = 2: psi(0,0) = (1,0), psi(0,1) = (0,1).
inline prefopt::FeatureMap axis_fm() {
    return prefopt::FeatureMap(1, 2, {vec2(1.0, 0.0), vec2(0.0, 1.0)});
}

// 2 states x 3 actions, d = 2, fixed entries inside the unit ball.
inline prefopt::FeatureMap small_fm() {
    return prefopt::FeatureMap(2, 3,
                               {vec2(0.9, 0.1), vec2(-0.2, 0.7), vec2(0.4, -0.5),
                                vec2(-0.6, -0.3), vec2(0.1, 0.8), vec2(0.5, 0.5)});
}

inline prefopt::PreferenceDataset make_ds(std::vector<prefopt::PreferenceSample> samples,
                                          std::uint64_t seed = 0,
                                          const std::string& reward = "fixture",
                                          double alpha_o = 0.0) {
    prefopt::DatasetMeta meta;
    meta.seed = seed;
    meta.reward = reward;
    meta.alpha_o = alpha_o;
    meta.n = samples.size();
    return prefopt::PreferenceDataset(std::move(samples), meta);
}

inline prefopt::PolicyParams params(std::vector<double> entries, double bound) {
    Vec theta(static_cast<Eigen::Index>(entries.size()));
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = entries[static_cast<std::size_t>(i)];
    return prefopt::PolicyParams{theta, bound};
}

// Random instance pieces built on the library RNG; used where only
// reproducibility matters, not the values themselves.
inline prefopt::FeatureMap random_fm(int d, int states, int actions, std::uint64_t seed) {
    return prefopt::random_feature_map(d, states, actions, seed);
}

inline prefopt::PreferenceDataset random_ds(const prefopt::FeatureMap& fm, std::size_t n,
                                            std::uint64_t seed, double reward_scale = 1.0) {
    const prefopt::TabularReward r =
        prefopt::random_reward(fm.num_states(), fm.num_actions(), reward_scale,
                               prefopt::substream_seed(seed, "fixture:reward"));
    const std::vector<double> mu(static_cast<std::size_t>(fm.num_states()),
                                 1.0 / fm.num_states());
    const prefopt::SamplingSpec spec(mu, prefopt::uniform_reference(fm.dim(), 1.0), n,
                                     prefopt::substream_seed(seed, "fixture:data"));
    return prefopt::sample_dataset(fm, spec, r, "fixture", 0.0);
}

} // namespace testfx
