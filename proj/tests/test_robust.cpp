#include <catch2/catch_amalgamated.hpp>
#include <prefopt/robust.hpp>
#include <prefopt/checks.hpp>
#include <prefopt/config.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace prefopt;
using testfx::vec2;

TEST_CASE("RobustSpec validation") {
    RobustSpec ok;
    CHECK_NOTHROW(ok.validate());
    RobustSpec bad = ok;
    bad.rho_o = -0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ok;
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ok;
    bad.rho = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ok;
    bad.p = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ok;
    bad.lambda_lo = 2.0;
    bad.lambda_hi = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ok;
    bad.tol = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("wdpo_loss_approx") {
    const FeatureMap fm = testfx::small_fm();
    const auto ds = testfx::make_ds({PreferenceSample(0, 0, 1, 1), PreferenceSample(1, 2, 0, 0),
                                     PreferenceSample(0, 1, 2, 1)});
    const PolicyPair pp(testfx::params({0.7, -0.4}, 1.0), uniform_reference(2, 1.0), 1.3);
    SECTION("rho_o = 0 collapses to the empirical loss bitwise") {
        CHECK(wdpo_loss_approx(pp, fm, ds, 0.0) == empirical_dpo_loss(pp, fm, ds));
    }
    SECTION("identical policies add nothing: every input gradient vanishes") {
        const PolicyPair same(testfx::params({0.5, 0.5}, 1.0), testfx::params({0.5, 0.5}, 1.0),
                              2.0);
        CHECK(wdpo_loss_approx(same, fm, ds, 0.7) ==
              Catch::Approx(0.6931471805599453).epsilon(0.0).margin(1e-15));
    }
    SECTION("single sample: penalty is rho_o times the input gradient norm") {
        const auto one = testfx::make_ds({PreferenceSample(1, 0, 2, 1)});
        const double rho_o = 0.35;
        const double expected = empirical_dpo_loss(pp, fm, one) +
                                rho_o * input_gradient_norm(pp, fm, one[0]);
        CHECK(wdpo_loss_approx(pp, fm, one, rho_o) ==
              Catch::Approx(expected).epsilon(0.0).margin(1e-15));
    }
    SECTION("never below the plain loss") {
        for (double rho_o : {0.0, 0.1, 0.5, 2.0}) {
            CHECK(wdpo_loss_approx(pp, fm, ds, rho_o) >= empirical_dpo_loss(pp, fm, ds));
        }
    }
    SECTION("empty dataset is rejected") {
        CHECK_THROWS_AS(wdpo_loss_approx(pp, fm, testfx::make_ds({}), 0.1), std::domain_error);
    }
}

TEST_CASE("wdpo_pointwise_upper") {
    const FeatureMap fm = testfx::small_fm();
    const PreferenceSample z(0, 0, 2, 1);
    const PolicyPair pp(testfx::params({0.9, -0.1}, 1.0), uniform_reference(2, 1.0), 1.1);
    SECTION("rho_o = 0 is the pointwise loss exactly") {
        CHECK(wdpo_pointwise_upper(pp, fm, z, 0.0) == pointwise_dpo_loss(pp, fm, z));
    }
    SECTION("closed form: loss plus rho_o times the squared gradient norm") {
        const double rho_o = 0.42;
        const double g = input_gradient_norm(pp, fm, z);
        CHECK(wdpo_pointwise_upper(pp, fm, z, rho_o) ==
              Catch::Approx(pointwise_dpo_loss(pp, fm, z) + rho_o * g * g)
                  .epsilon(0.0)
                  .margin(1e-15));
    }
    SECTION("mean upper-bounds the RMS loss once the mean squared norm reaches 1") {
        // Identical features pin h = 0 while beta ||delta|| = 3 keeps every
        // squared input gradient at 2.25 >= 1.
        const FeatureMap same(1, 2, {vec2(0.3, 0.4), vec2(0.3, 0.4)});
        const PolicyPair strong(testfx::params({1.0, 0.0}, 1.0), uniform_reference(2, 1.0), 3.0);
        const auto ds =
            testfx::make_ds({PreferenceSample(0, 0, 1, 1), PreferenceSample(0, 1, 0, 0)});
        const double rho_o = 0.2;
        double mean_upper = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            mean_upper += wdpo_pointwise_upper(strong, same, ds[i], rho_o);
        }
        mean_upper /= static_cast<double>(ds.size());
        CHECK(mean_upper >= wdpo_loss_approx(strong, same, ds, rho_o) - 1e-15);
    }
}

TEST_CASE("kldpo_worst_kernel") {
    SECTION("equal losses return the base bitwise") {
        const std::vector<double> base = {0.2, 0.5, 0.3};
        const std::vector<double> w = kldpo_worst_kernel({1.7, 1.7, 1.7}, base, 0.5);
        CHECK(w == base);
    }
    SECTION("frozen softmax example") {
        const std::vector<double> w =
            kldpo_worst_kernel({1.0, 2.0, 3.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1.0);
        CHECK(w[0] == Catch::Approx(0.09003057317038046).epsilon(1e-14));
        CHECK(w[1] == Catch::Approx(0.24472847105479767).epsilon(1e-14));
        CHECK(w[2] == Catch::Approx(0.6652409557748219).epsilon(1e-14));
    }
    SECTION("huge temperature returns to the base") {
        const std::vector<double> base = {0.25, 0.25, 0.5};
        const std::vector<double> w = kldpo_worst_kernel({0.1, 0.9, 0.4}, base, 1e6);
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(w[i] - base[i]) <= 1e-6);
    }
    SECTION("matches the long-double reference tilt") {
        SplitMix64 rng(777);
        for (int t = 0; t < 50; ++t) {
            const std::size_t n = 2 + rng.next_u64() % 5;
            std::vector<double> losses(n), base(n);
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                losses[i] = rng.uniform(0.0, 3.0);
                base[i] = rng.uniform(0.05, 1.0);
                sum += base[i];
            }
            for (double& b : base) b /= sum;
            const double tau = rng.uniform(0.2, 5.0);
            const std::vector<double> w = kldpo_worst_kernel(losses, base, tau);
            const std::vector<double> ref = testor::tilt_reference(losses, base, tau);
            double wsum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(std::abs(w[i] - ref[i]) <= 1e-12);
                CHECK(w[i] >= 0.0);
                wsum += w[i];
            }
            CHECK(std::abs(wsum - 1.0) <= 1e-12);
        }
    }
    SECTION("likelihood-ratio order on equal base weights") {
        const std::vector<double> w =
            kldpo_worst_kernel({0.3, 1.1, 0.7, 1.1}, {0.25, 0.25, 0.25, 0.25}, 0.8);
        CHECK(w[1] > w[2]);
        CHECK(w[2] > w[0]);
        CHECK(w[1] == Catch::Approx(w[3]).epsilon(1e-14));
    }
    SECTION("stable under extreme loss scale") {
        const std::vector<double> w =
            kldpo_worst_kernel({0.0, 5000.0}, {0.5, 0.5}, 1.0);
        CHECK(std::isfinite(w[0]));
        CHECK(w[1] == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("size mismatch is rejected") {
        CHECK_THROWS_AS(kldpo_worst_kernel({1.0, 2.0}, {1.0}, 1.0), std::domain_error);
    }
}

TEST_CASE("kldpo_loss_approx") {
    const FeatureMap fm = testfx::small_fm();
    const PolicyPair pp(testfx::params({0.8, -0.5}, 1.0), uniform_reference(2, 1.0), 1.4);
    SECTION("identical samples reduce to the empirical loss") {
        const PreferenceSample z(0, 0, 1, 1);
        const auto ds = testfx::make_ds({z, z, z});
        CHECK(kldpo_loss_approx(pp, fm, ds, 0.7) ==
              Catch::Approx(empirical_dpo_loss(pp, fm, ds)).epsilon(1e-14));
    }
    SECTION("huge temperature approaches the empirical loss") {
        const auto ds = testfx::make_ds({PreferenceSample(0, 0, 1, 1),
                                         PreferenceSample(1, 2, 0, 0),
                                         PreferenceSample(0, 2, 1, 1)});
        CHECK(std::abs(kldpo_loss_approx(pp, fm, ds, 1e6) - empirical_dpo_loss(pp, fm, ds)) <=
              1e-6);
    }
    SECTION("sits strictly between the mean and the max, and equals the tilt-weighted sum") {
        const auto ds = testfx::make_ds({PreferenceSample(0, 0, 1, 1),
                                         PreferenceSample(1, 2, 0, 0),
                                         PreferenceSample(0, 2, 1, 1)});
        std::vector<double> losses;
        double max_loss = -1e300;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            losses.push_back(pointwise_dpo_loss(pp, fm, ds[i]));
            max_loss = std::max(max_loss, losses.back());
        }
        const double tau = 0.9;
        const double v = kldpo_loss_approx(pp, fm, ds, tau);
        CHECK(v > empirical_dpo_loss(pp, fm, ds));
        CHECK(v < max_loss);
        const std::vector<double> w =
            testor::tilt_reference(losses, {1.0 / 3, 1.0 / 3, 1.0 / 3}, tau);
        double expected = 0.0;
        for (std::size_t i = 0; i < losses.size(); ++i) expected += w[i] * losses[i];
        CHECK(v == Catch::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("kl_dual_value") {
    const std::vector<double> uniform3 = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    SECTION("equal losses minimize at the lower bracket edge") {
        CHECK(kl_dual_value({2.5, 2.5}, {0.5, 0.5}, 0.4, 1e-6, 1e6, 1e-8) == 2.5 + 1e-6 * 0.4);
        CHECK(kl_dual_value({2.5, 2.5}, {0.5, 0.5}, 0.0, 1e-6, 1e6, 1e-8) == 2.5);
    }
    SECTION("rho = 0 approaches the mean loss as the bracket widens") {
        const std::vector<double> losses = {0.0, 1.0, 2.0};
        const double mean = 1.0;
        const double v = kl_dual_value(losses, uniform3, 0.0, 1e-6, 1e6, 1e-8);
        CHECK(v >= mean - 1e-12);
        CHECK(std::abs(v - mean) <= 1e-5);
    }
    SECTION("rho = 0 terminates when the tolerance is below an endpoint ulp") {
        // The minimizing lambda sits at the far right end of the bracket,
        // where the width cannot shrink to a bare 1e-10.
        const std::vector<double> losses = {0.0, 1.0, 2.0};
        const double v = kl_dual_value(losses, uniform3, 0.0, 1e-6, 1e6, 1e-10);
        CHECK(std::abs(v - 1.0) <= 1e-5);
    }
    SECTION("matches the dense grid oracle on the worked instance") {
        const std::vector<double> losses = {0.0, 1.0, 2.0};
        const double lib = kl_dual_value(losses, uniform3, 0.1, 1e-6, 1e6, 1e-8);
        const double grid = testor::kl_dual_grid(losses, uniform3, 0.1);
        CHECK(std::abs(lib - grid) <= 1e-5);
        CHECK(lib == Catch::Approx(1.3605231553415642).epsilon(0.0).margin(1e-6));
    }
    SECTION("matches the grid oracle on random instances") {
        SplitMix64 rng(888);
        for (int t = 0; t < 25; ++t) {
            const std::size_t n = 2 + rng.next_u64() % 6;
            std::vector<double> losses(n), base(n);
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                losses[i] = rng.uniform(0.0, 2.0);
                base[i] = rng.uniform(0.05, 1.0);
                sum += base[i];
            }
            for (double& b : base) b /= sum;
            const double rho = rng.uniform(0.01, 1.0);
            const double lib = kl_dual_value(losses, base, rho, 1e-6, 1e6, 1e-8);
            // The grid must span the same multiplier range as the library:
            // near-saturated instances minimize at very small lambda.
            const double grid = testor::kl_dual_grid(losses, base, rho, 200000, 1e-6, 1e6);
            CHECK(std::abs(lib - grid) <= 1e-5);
        }
    }
    SECTION("nondecreasing in rho and never below the mean loss") {
        const std::vector<double> losses = {0.2, 0.9, 1.6};
        const std::vector<double> base = {0.5, 0.3, 0.2};
        double mean = 0.0;
        for (std::size_t i = 0; i < 3; ++i) mean += base[i] * losses[i];
        double prev = -1e300;
        for (double rho : {0.0, 0.01, 0.05, 0.2, 0.5, 1.0, 2.0}) {
            const double v = kl_dual_value(losses, base, rho, 1e-6, 1e6, 1e-8);
            CHECK(v >= mean - 1e-9);
            CHECK(v >= prev - 1e-9);
            prev = v;
        }
    }
    SECTION("validation") {
        CHECK_THROWS_AS(kl_dual_value({1.0}, {0.5, 0.5}, 0.1, 1e-6, 1e6, 1e-8),
                        std::domain_error);
        CHECK_THROWS_AS(kl_dual_value({1.0, 2.0}, {0.5, 0.5}, -0.1, 1e-6, 1e6, 1e-8),
                        std::invalid_argument);
        CHECK_THROWS_AS(kl_dual_value({1.0, 2.0}, {0.5, 0.5}, 0.1, 1e6, 1e-6, 1e-8),
                        std::invalid_argument);
        CHECK_THROWS_AS(kl_dual_value({1.0, 2.0}, {0.5, 0.5}, 0.1, 1e-6, 1e6, 0.0),
                        std::invalid_argument);
        CHECK_THROWS_AS(kl_dual_value({1.0, 2.0}, {0.6, 0.6}, 0.1, 1e-6, 1e6, 1e-8),
                        std::invalid_argument);
    }
}

TEST_CASE("kl_worst_case_exact") {
    SECTION("vanishing radius returns to the base") {
        const std::vector<double> losses = {0.0, 1.0, 2.0};
        const std::vector<double> base = {1.0 / 3, 1.0 / 3, 1.0 / 3};
        const TiltResult r = kl_worst_case_exact(losses, base, 1e-12, 1e-14);
        for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(r.weights[i] - base[i]) <= 1e-5);
        CHECK_FALSE(r.boundary);
    }
    SECTION("two-atom instance against the binary-entropy root") {
        const TiltResult r = kl_worst_case_exact({0.0, 1.0}, {0.5, 0.5}, 0.05, 1e-10);
        const double p0 = testor::binary_entropy_root(0.05);
        CHECK(p0 == Catch::Approx(0.34321840163503314).epsilon(0.0).margin(1e-12));
        CHECK(r.weights[0] == Catch::Approx(p0).epsilon(0.0).margin(1e-9));
        CHECK(r.weights[1] == Catch::Approx(1.0 - p0).epsilon(0.0).margin(1e-9));
        CHECK(std::abs(r.achieved_kl - 0.05) <= 1e-10);
        CHECK_FALSE(r.boundary);
    }
    SECTION("result invariants and strong duality on random instances") {
        SplitMix64 rng(999);
        for (int t = 0; t < 30; ++t) {
            std::vector<double> losses(5), base(5);
            double sum = 0.0;
            for (std::size_t i = 0; i < 5; ++i) {
                losses[i] = rng.uniform(0.0, 2.0);
                base[i] = rng.uniform(0.05, 1.0);
                sum += base[i];
            }
            for (double& b : base) b /= sum;
            const double rho = rng.uniform(0.01, 1.0);
            const TiltResult r = kl_worst_case_exact(losses, base, rho, 1e-10);
            REQUIRE_FALSE(r.boundary);
            double wsum = 0.0, primal = 0.0, mean = 0.0, recomputed_kl = 0.0;
            for (std::size_t i = 0; i < 5; ++i) {
                CHECK(r.weights[i] >= 0.0);
                wsum += r.weights[i];
                primal += r.weights[i] * losses[i];
                mean += base[i] * losses[i];
                if (r.weights[i] > 0.0) {
                    recomputed_kl += r.weights[i] * std::log(r.weights[i] / base[i]);
                }
            }
            CHECK(std::abs(wsum - 1.0) <= 1e-12);
            CHECK(std::abs(recomputed_kl - r.achieved_kl) <= 1e-10);
            CHECK(std::abs(r.achieved_kl - rho) <= 1e-10);
            const double dual = kl_dual_value(losses, base, rho, 1e-6, 1e6, 1e-8);
            CHECK(std::abs(primal - dual) <= 1e-5);
            // multiplier bound: -mu - lambda <= -sum q l
            CHECK(-r.mu - r.lambda <= -mean + 1e-10);
        }
    }
    SECTION("saturation beyond the point-mass divergence") {
        const std::vector<double> losses = {0.0, 1.0};
        const std::vector<double> base = {0.9, 0.1};
        const TiltResult r = kl_worst_case_exact(losses, base, 3.0, 1e-10);
        CHECK(r.boundary);
        CHECK(r.lambda == 0.0);
        CHECK(r.mu == 1.0);
        CHECK(r.weights[0] == 0.0);
        CHECK(r.weights[1] == 1.0);
        CHECK(r.achieved_kl == Catch::Approx(-std::log(0.1)).epsilon(1e-12));
    }
    SECTION("saturation at the top of the lambda bracket") {
        const TiltResult r = kl_worst_case_exact({0.0, 1.0}, {0.9, 0.1}, 1e-15, 1e-16);
        CHECK(r.boundary);
        CHECK(r.lambda == 1e6);
        CHECK(r.achieved_kl >= 1e-15);
    }
    SECTION("all-equal losses are infeasible") {
        CHECK_THROWS_AS(kl_worst_case_exact({1.0, 1.0}, {0.5, 0.5}, 0.1, 1e-10),
                        std::domain_error);
        CHECK_THROWS_AS(kl_worst_case_exact({1.0, 2.0}, {0.5, 0.5}, 0.0, 1e-10),
                        std::invalid_argument);
        CHECK_THROWS_AS(kl_worst_case_exact({1.0, 2.0}, {0.5, 0.5}, 0.1, 0.0),
                        std::invalid_argument);
    }
    SECTION("serializes with sorted keys") {
        const TiltResult r = kl_worst_case_exact({0.0, 1.0}, {0.5, 0.5}, 0.05, 1e-10);
        const json j = tilt_result_to_json(r);
        CHECK(j.contains("weights"));
        CHECK(j.contains("lambda"));
        CHECK(j.contains("mu"));
        CHECK(j.contains("achieved_kl"));
        CHECK(j.contains("boundary"));
        CHECK(j.contains("iterations"));
        CHECK(j.at("weights").size() == 2);
    }
}

TEST_CASE("tilt families coincide: approximate kernel equals the exact tilt at its lambda") {
    SplitMix64 rng(1234);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> losses(4), base(4);
        double sum = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            losses[i] = rng.uniform(0.0, 2.0);
            base[i] = rng.uniform(0.1, 1.0);
            sum += base[i];
        }
        for (double& b : base) b /= sum;
        const TiltResult r = kl_worst_case_exact(losses, base, 0.2, 1e-12);
        REQUIRE_FALSE(r.boundary);
        // Alg.-style kernel run at temperature lambda reproduces the exact
        // worst case; the choice of temperature is the only difference.
        const std::vector<double> w = kldpo_worst_kernel(losses, base, r.lambda);
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(w[i] - r.weights[i]) <= 1e-8);
    }
}

TEST_CASE("wasserstein_dual_value") {
    // 3-atom planar instance; two sample atoms plus one off-axis candidate.
    const std::vector<double> losses = {0.2, 1.0, 1.7};
    const std::vector<Vec> coords = {vec2(0.0, 0.0), vec2(1.0, 0.0), vec2(0.5, 0.5)};
    const std::vector<std::size_t> samples = {0, 1};
    SECTION("zero radius recovers the mean sample loss") {
        CHECK(std::abs(wasserstein_dual_value(losses, coords, samples, 0.0, 1e-9) - 0.6) <= 1e-9);
    }
    SECTION("a radius past the diameter recovers the max loss") {
        CHECK(std::abs(wasserstein_dual_value(losses, coords, samples, 10.0, 1e-9) - 1.7) <=
              1e-9);
    }
    SECTION("agrees with the exact vertex program and the literal grid enumeration") {
        for (double rho : {0.3, 0.55, 0.8}) {
            const double dual = wasserstein_dual_value(losses, coords, samples, rho, 1e-9);
            const double vertex = checks::wasserstein_transport_optimum(losses, coords, samples, rho);
            const double grid = testor::grid_transport_value(losses, coords, samples, rho, 100);
            CHECK(std::abs(dual - vertex) <= 1e-8);
            CHECK(grid <= vertex + 1e-9);
            CHECK(vertex - grid <= 0.05);
        }
    }
    SECTION("nondecreasing in rho, never below the mean") {
        double prev = -1e300;
        for (double rho : {0.0, 0.1, 0.25, 0.5, 0.75, 1.0, 2.0, 5.0}) {
            const double v = wasserstein_dual_value(losses, coords, samples, rho, 1e-9);
            CHECK(v >= 0.6 - 1e-9);
            CHECK(v >= prev - 1e-8);
            prev = v;
        }
    }
    SECTION("labels partition the transport classes") {
        const std::vector<double> l2 = {0.0, 10.0};
        const std::vector<Vec> c2 = {vec2(0.0, 0.0), vec2(0.1, 0.0)};
        const std::vector<std::size_t> s2 = {0};
        const std::vector<int> split = {0, 1};
        CHECK(std::abs(wasserstein_dual_value(l2, c2, s2, 1.0, 1e-9, split) - 0.0) <= 1e-6);
        CHECK(std::abs(wasserstein_dual_value(l2, c2, s2, 1.0, 1e-9) - 10.0) <= 1e-6);
    }
    SECTION("flat losses take the zero-eta shortcut") {
        const std::vector<double> flat = {0.7, 0.7};
        const std::vector<Vec> c2 = {vec2(0.0, 0.0), vec2(1.0, 0.0)};
        CHECK(wasserstein_dual_value(flat, c2, {0, 1}, 0.5, 1e-9) == 0.7);
    }
    SECTION("validation") {
        CHECK_THROWS_AS(wasserstein_dual_value({}, {}, {0}, 0.1, 1e-9), std::domain_error);
        CHECK_THROWS_AS(wasserstein_dual_value(losses, {vec2(0, 0)}, samples, 0.1, 1e-9),
                        std::domain_error);
        CHECK_THROWS_AS(wasserstein_dual_value(losses, coords, {}, 0.1, 1e-9),
                        std::domain_error);
        CHECK_THROWS_AS(wasserstein_dual_value(losses, coords, {9}, 0.1, 1e-9),
                        std::domain_error);
        CHECK_THROWS_AS(wasserstein_dual_value(losses, coords, samples, -0.1, 1e-9),
                        std::invalid_argument);
        CHECK_THROWS_AS(wasserstein_dual_value(losses, coords, samples, 0.1, 0.0),
                        std::invalid_argument);
    }
}

TEST_CASE("vertex program agrees with the literal grid on a three-sample instance") {
    // All three atoms are samples; coarser lattice keeps the enumeration fast.
    const std::vector<double> losses = {0.1, 0.9, 1.5};
    const std::vector<Vec> coords = {vec2(0.0, 0.0), vec2(0.8, 0.0), vec2(0.0, 0.7)};
    const std::vector<std::size_t> samples = {0, 1, 2};
    for (double rho : {0.25, 0.5}) {
        const double vertex = checks::wasserstein_transport_optimum(losses, coords, samples, rho);
        const double grid = testor::grid_transport_value(losses, coords, samples, rho, 24);
        const double dual = wasserstein_dual_value(losses, coords, samples, rho, 1e-9);
        CHECK(grid <= vertex + 1e-9);
        CHECK(vertex - grid <= 0.12);
        CHECK(std::abs(dual - vertex) <= 1e-8);
    }
}
