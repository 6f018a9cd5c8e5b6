#include <catch2/catch_amalgamated.hpp>
#include <prefopt/losses.hpp>
#include <prefopt/train.hpp>
#include <prefopt/config.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

using namespace prefopt;
using testfx::vec2;

namespace {

PolicyPair pair_at(std::vector<double> cur, std::vector<double> ref, double beta, double bound) {
    return PolicyPair(testfx::params(std::move(cur), bound), testfx::params(std::move(ref), bound),
                      beta);
}

} // namespace

TEST_CASE("loss_constants frozen values and internal identity") {
    SECTION("beta = 1, B = 0") {
        const LossConstants c = loss_constants(1.0, 0.0);
        CHECK(c.gamma == Catch::Approx(0.25).epsilon(0.0).margin(1e-16));
        CHECK(c.K == Catch::Approx(0.6931471805599453).epsilon(0.0).margin(1e-16));
        CHECK(c.L == c.K);
    }
    SECTION("beta = 0.1, B = 1") {
        const LossConstants c = loss_constants(0.1, 1.0);
        CHECK(c.gamma == Catch::Approx(0.002402607457415292).epsilon(1e-14));
        CHECK(c.K == Catch::Approx(0.9130152523999526).epsilon(1e-14));
    }
    SECTION("the two closed forms of gamma coincide") {
        // beta^2 e^t/(1+e^t)^2 with t = 4 beta B equals
        // beta^2 sigmoid(t) sigmoid(-t).  The tanh-form oracle carries
        // ~ulp(1) absolute error in its small factor, so the comparison is
        // absolute at scale beta^2 rather than relative.
        for (double beta : {0.1, 0.5, 1.0, 2.0}) {
            for (double B : {0.0, 0.3, 1.0, 2.5}) {
                const LossConstants c = loss_constants(beta, B);
                const double t = 4.0 * beta * B;
                const double direct =
                    beta * beta * testor::own_sigmoid(t) * testor::own_sigmoid(-t);
                CHECK(c.gamma ==
                      Catch::Approx(direct).epsilon(0.0).margin(5e-15 * beta * beta + 1e-17));
                CHECK(c.K == Catch::Approx(testor::own_softplus(t)).epsilon(1e-14));
            }
        }
    }
    SECTION("gamma decreases in B at fixed beta") {
        double prev = 1e300;
        for (double B = 0.0; B <= 3.0; B += 0.25) {
            const double g = loss_constants(1.0, B).gamma;
            CHECK(g < prev);
            prev = g;
        }
    }
    SECTION("validation") {
        CHECK_THROWS_AS(loss_constants(0.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(loss_constants(-1.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(loss_constants(1.0, -0.1), std::invalid_argument);
    }
}

TEST_CASE("pointwise_dpo_loss examples") {
    const FeatureMap fm(1, 2, {vec2(0.5, 0.0), vec2(0.0, 0.5)});
    const PreferenceSample z(0, 0, 1, 1);
    SECTION("identical policies give ln 2 for either label") {
        const PolicyPair pp = pair_at({0.4, -0.2}, {0.4, -0.2}, 1.7, 1.0);
        CHECK(pointwise_dpo_loss(pp, fm, z) ==
              Catch::Approx(0.6931471805599453).epsilon(0.0).margin(1e-15));
        CHECK(pointwise_dpo_loss(pp, fm, PreferenceSample(0, 0, 1, 0)) ==
              Catch::Approx(0.6931471805599453).epsilon(0.0).margin(1e-15));
    }
    SECTION("beta h = 1 with y = 1 gives log(1 + e^-1)") {
        // delta = (2, 0) against x = (0.5, -0.5) gives h = 1 at beta = 1.
        const PolicyPair pp = pair_at({2.0, 0.0}, {0.0, 0.0}, 1.0, 3.0);
        CHECK(pointwise_dpo_loss(pp, fm, z) ==
              Catch::Approx(0.31326168751822286).epsilon(0.0).margin(1e-15));
    }
    SECTION("flipping the label while swapping the pair preserves the loss") {
        SplitMix64 rng(171);
        const FeatureMap fm2 = testfx::small_fm();
        for (int t = 0; t < 50; ++t) {
            Vec cur(2);
            cur[0] = rng.uniform(-1.0, 1.0);
            cur[1] = rng.uniform(-1.0, 1.0);
            const PolicyPair pp(PolicyParams{cur, 1.0}, uniform_reference(2, 1.0),
                                rng.uniform(0.3, 2.0));
            const int s = static_cast<int>(rng.next_u64() % 2);
            const PreferenceSample zz(s, 0, 1, 1);
            const PreferenceSample flipped(s, 1, 0, 0);
            CHECK(pointwise_dpo_loss(pp, fm2, zz) == pointwise_dpo_loss(pp, fm2, flipped));
        }
    }
    SECTION("loss stays inside (0, K]") {
        SplitMix64 rng(172);
        const FeatureMap fm2 = testfx::small_fm();
        for (int t = 0; t < 100; ++t) {
            const double beta = rng.uniform(0.1, 3.0);
            const double B = rng.uniform(0.1, 2.0);
            Vec cur(2);
            cur[0] = rng.uniform(-1.0, 1.0);
            cur[1] = rng.uniform(-1.0, 1.0);
            cur *= B / std::max(cur.norm(), 1.0);
            const PolicyPair pp(PolicyParams{cur, B}, uniform_reference(2, B), beta);
            const double K = loss_constants(beta, B).K;
            const PreferenceSample zz(static_cast<int>(rng.next_u64() % 2), 0, 2, 1);
            const double l = pointwise_dpo_loss(pp, fm2, zz);
            CHECK(l > 0.0);
            CHECK(l <= K + 1e-15);
        }
    }
}

TEST_CASE("empirical_dpo_loss is the sample mean") {
    const FeatureMap fm = testfx::small_fm();
    const PolicyPair pp = pair_at({0.6, -0.3}, {0.1, 0.1}, 1.3, 1.0);
    const PreferenceSample za(0, 0, 1, 1);
    const PreferenceSample zb(1, 2, 0, 0);
    SECTION("all-identical samples reduce to the pointwise loss") {
        const auto ds = testfx::make_ds({za, za, za});
        CHECK(empirical_dpo_loss(pp, fm, ds) ==
              Catch::Approx(pointwise_dpo_loss(pp, fm, za)).epsilon(1e-15));
    }
    SECTION("two samples average") {
        const auto ds = testfx::make_ds({za, zb});
        const double a = pointwise_dpo_loss(pp, fm, za);
        const double b = pointwise_dpo_loss(pp, fm, zb);
        CHECK(empirical_dpo_loss(pp, fm, ds) ==
              Catch::Approx(0.5 * (a + b)).epsilon(0.0).margin(1e-15));
    }
    SECTION("identical policies give ln 2 regardless of the data") {
        const PolicyPair same = pair_at({0.2, 0.9}, {0.2, 0.9}, 2.0, 1.0);
        const auto ds = testfx::make_ds({za, zb, swap_actions(za)});
        CHECK(empirical_dpo_loss(same, fm, ds) ==
              Catch::Approx(0.6931471805599453).epsilon(0.0).margin(1e-15));
    }
    SECTION("empty dataset is rejected") {
        CHECK_THROWS_AS(empirical_dpo_loss(pp, fm, testfx::make_ds({})), std::domain_error);
    }
}

TEST_CASE("dpo_gradient closed form") {
    const FeatureMap fm = testfx::small_fm();
    SECTION("mirrored data at theta = theta_ref cancels") {
        const PolicyPair pp = pair_at({0.5, 0.5}, {0.5, 0.5}, 1.0, 1.0);
        const PreferenceSample z(0, 0, 1, 1);
        const auto ds = testfx::make_ds({z, PreferenceSample(0, 1, 0, 1)});
        CHECK(dpo_gradient(pp, fm, ds).norm() <= 1e-16);
    }
    SECTION("single preferred sample at theta = theta_ref") {
        const double beta = 1.8;
        const PolicyPair pp = pair_at({0.0, 0.0}, {0.0, 0.0}, beta, 1.0);
        const PreferenceSample z(1, 0, 2, 1);
        const auto ds = testfx::make_ds({z});
        const Vec g = dpo_gradient(pp, fm, ds);
        const Vec expected = -(beta / 2.0) * feature_difference(z, fm);
        CHECK((g - expected).cwiseAbs().maxCoeff() <= 1e-15);
    }
    SECTION("matches finite differences on random instances") {
        SplitMix64 rng(5150);
        for (int t = 0; t < 20; ++t) {
            const FeatureMap fmr = testfx::random_fm(3, 3, 3, 1000 + t);
            const PreferenceDataset ds = testfx::random_ds(fmr, 5, 2000 + t);
            Vec cur(3);
            for (int i = 0; i < 3; ++i) cur[i] = rng.uniform(-0.5, 0.5);
            const double beta = rng.uniform(0.3, 2.0);
            const PolicyPair pp(PolicyParams{cur, 1.0}, uniform_reference(3, 1.0), beta);
            const Vec g = dpo_gradient(pp, fmr, ds);
            const Vec fd = finite_difference_gradient(
                [&](const Vec& th) {
                    const PolicyPair probe(PolicyParams{th, 1.0}, pp.reference, beta);
                    return empirical_dpo_loss(probe, fmr, ds);
                },
                cur, 1e-5);
            CHECK((g - fd).norm() <= 1e-5 * std::max(1.0, g.norm()));
        }
    }
    SECTION("empty dataset is rejected") {
        const PolicyPair pp = pair_at({0.0, 0.0}, {0.0, 0.0}, 1.0, 1.0);
        CHECK_THROWS_AS(dpo_gradient(pp, fm, testfx::make_ds({})), std::domain_error);
    }
}

TEST_CASE("dpo_hessian closed form") {
    const FeatureMap fm = testfx::small_fm();
    // 4 samples: the 1/n factor is a power of two, so the closed-form
    // comparison below can demand bitwise equality.
    const auto ds = testfx::make_ds({PreferenceSample(0, 0, 1, 1), PreferenceSample(1, 2, 1, 0),
                                     PreferenceSample(0, 2, 0, 1), PreferenceSample(1, 0, 1, 1)});
    SECTION("at theta = theta_ref the Hessian is (beta^2/4) Sigma") {
        for (double beta : {1.0, 2.0, 0.5}) {
            const PolicyPair pp = pair_at({0.3, -0.1}, {0.3, -0.1}, beta, 1.0);
            const Mat h = dpo_hessian(pp, fm, ds);
            const Mat sigma = empirical_covariance(ds, fm);
            // beta in {1, 2, 0.5} scales by an exact power of two, so the
            // closed form holds bitwise.
            CHECK((h - (beta * beta / 4.0) * sigma).cwiseAbs().maxCoeff() == 0.0);
        }
    }
    SECTION("dominates gamma Sigma and stays symmetric PSD") {
        SplitMix64 rng(8080);
        for (int t = 0; t < 30; ++t) {
            const double beta = rng.uniform(0.2, 2.0);
            const double B = rng.uniform(0.2, 1.5);
            Vec cur(2);
            cur[0] = rng.uniform(-1.0, 1.0);
            cur[1] = rng.uniform(-1.0, 1.0);
            if (cur.norm() > B) cur *= B / cur.norm();
            const PolicyPair pp(PolicyParams{cur, B}, uniform_reference(2, B), beta);
            const Mat h = dpo_hessian(pp, fm, ds);
            CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
            CHECK(min_eigenvalue(h) >= -1e-10);
            const double gamma = loss_constants(beta, B).gamma;
            const Mat sigma = empirical_covariance(ds, fm);
            CHECK(min_eigenvalue(h - gamma * sigma) >= -1e-10);
        }
    }
    SECTION("matches finite differences of the gradient") {
        const double beta = 1.2;
        const Vec cur = vec2(0.4, -0.3);
        const PolicyPair pp(PolicyParams{cur, 1.0}, uniform_reference(2, 1.0), beta);
        const Mat h = dpo_hessian(pp, fm, ds);
        for (int j = 0; j < 2; ++j) {
            const double step = 1e-5;
            Vec hi = cur, lo = cur;
            hi[j] += step;
            lo[j] -= step;
            const Vec ghi =
                dpo_gradient(PolicyPair(PolicyParams{hi, 1.0}, pp.reference, beta), fm, ds);
            const Vec glo =
                dpo_gradient(PolicyPair(PolicyParams{lo, 1.0}, pp.reference, beta), fm, ds);
            const Vec col = (ghi - glo) / (2.0 * step);
            CHECK((h.col(j) - col).cwiseAbs().maxCoeff() <= 1e-4);
        }
    }
    SECTION("depends on the pair only through the difference") {
        const auto shift = vec2(0.35, -0.6);
        const PolicyPair a = pair_at({0.4, 0.1}, {0.1, 0.3}, 1.4, 5.0);
        const PolicyPair b(PolicyParams{a.current.theta + shift, 5.0},
                           PolicyParams{a.reference.theta + shift, 5.0}, 1.4);
        const Mat ha = dpo_hessian(a, fm, ds);
        const Mat hb = dpo_hessian(b, fm, ds);
        CHECK((ha - hb).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("input_gradient_norm") {
    const FeatureMap fm = testfx::small_fm();
    const PreferenceSample z(0, 0, 1, 1);
    SECTION("vanishes at theta = theta_ref") {
        const PolicyPair pp = pair_at({0.8, 0.1}, {0.8, 0.1}, 2.0, 1.0);
        CHECK(input_gradient_norm(pp, fm, z) == 0.0);
    }
    SECTION("worked example: y = 1, h = 0, unit delta, beta = 2") {
        // Identical features make h = 0 while delta stays nonzero.
        const FeatureMap same(1, 2, {vec2(0.3, 0.4), vec2(0.3, 0.4)});
        const PolicyPair pp = pair_at({1.0, 0.0}, {0.0, 0.0}, 2.0, 1.0);
        CHECK(input_gradient_norm(pp, same, z) == Catch::Approx(1.0).epsilon(0.0).margin(1e-15));
    }
    SECTION("matches a finite-difference probe in x") {
        SplitMix64 rng(4311);
        for (int t = 0; t < 30; ++t) {
            Vec delta(2);
            delta[0] = rng.uniform(-1.0, 1.0);
            delta[1] = rng.uniform(-1.0, 1.0);
            const double beta = rng.uniform(0.3, 2.0);
            const int y = rng.bernoulli(0.5) ? 1 : 0;
            Vec x(2);
            x[0] = rng.uniform(-1.0, 1.0);
            x[1] = rng.uniform(-1.0, 1.0);
            // loss(x) = softplus(-t), t = (2y-1) beta delta.x; its x-gradient
            // norm is the closed form under test.
            const auto loss_at = [&](const Vec& xv) {
                const double s = y == 1 ? 1.0 : -1.0;
                return testor::own_softplus(-s * beta * delta.dot(xv));
            };
            Vec grad(2);
            const double step = 1e-6;
            for (int j = 0; j < 2; ++j) {
                Vec hi = x, lo = x;
                hi[j] += step;
                lo[j] -= step;
                grad[j] = (loss_at(hi) - loss_at(lo)) / (2.0 * step);
            }
            const double h = delta.dot(x);
            const double closed = xy::input_grad_norm(beta, h, y, delta.norm());
            CHECK(std::abs(closed - grad.norm()) <= 1e-6);
        }
    }
    SECTION("the currently disfavored label maximizes the norm") {
        SplitMix64 rng(4312);
        for (int t = 0; t < 50; ++t) {
            Vec cur(2);
            cur[0] = rng.uniform(-1.0, 1.0);
            cur[1] = rng.uniform(-1.0, 1.0);
            const PolicyPair pp(PolicyParams{cur, 1.0}, uniform_reference(2, 1.0),
                                rng.uniform(0.5, 2.0));
            const PreferenceSample win(1, 0, 2, 1);
            const PreferenceSample lose(1, 0, 2, 0);
            const double h = preference_score(pp, fm, win);
            const double gw = input_gradient_norm(pp, fm, win);
            const double gl = input_gradient_norm(pp, fm, lose);
            if (h > 1e-9) {
                CHECK(gl > gw);  // model favors label 1, so label 0 hurts more
            } else if (h < -1e-9) {
                CHECK(gw > gl);
            }
        }
    }
    SECTION("bounded by beta times the parameter distance") {
        const PolicyPair pp = pair_at({0.9, -0.2}, {-0.3, 0.4}, 1.7, 1.0);
        const double bound = 1.7 * (pp.current.theta - pp.reference.theta).norm();
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                if (a == b) continue;
                for (int y = 0; y <= 1; ++y) {
                    const double g = input_gradient_norm(pp, fm, PreferenceSample(1, a, b, y));
                    CHECK(g >= 0.0);
                    CHECK(g <= bound + 1e-15);
                }
            }
        }
    }
}
