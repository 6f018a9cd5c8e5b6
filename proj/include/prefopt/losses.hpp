#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "numeric.hpp"
#include "policy.hpp"

namespace prefopt {

// Constants attached to the loss family at temperature beta and parameter
// radius B.  gamma is the strong-convexity factor relating the loss Hessian
// to the sample covariance, K bounds the pointwise loss, and L is the generic
// loss bound (equal to K here).
struct LossConstants {
    double gamma;
    double K;
    double L;
};

// gamma = beta^2 e^{4 beta B} / (1 + e^{4 beta B})^2, evaluated as
// beta^2 sigmoid(4 beta B) sigmoid(-4 beta B) so large exponents cannot
// overflow.  K = |log sigmoid(-4 beta B)| = softplus(4 beta B).
inline LossConstants loss_constants(double beta, double B) {
    if (!(beta > 0.0)) throw std::invalid_argument("loss_constants: beta must be positive");
    if (!(B >= 0.0)) throw std::invalid_argument("loss_constants: B must be nonnegative");
    const double t = 4.0 * beta * B;
    const double gamma = beta * beta * sigmoid(t) * sigmoid(-t);
    const double K = softplus(t);
    return LossConstants{gamma, K, K};
}

// ------------------------------------------------------------------
// Compiled view of a dataset: the feature differences x_i and labels y_i.
// All losses depend on the data only through (x_i, y_i), so precomputing
// them once makes the optimizer loops cheap; the public operations below
// run through the same code so values agree bitwise with the fast path.
// ------------------------------------------------------------------

struct CompiledDataset {
    std::vector<Vec> x;
    std::vector<int> y;

    static CompiledDataset build(const PreferenceDataset& ds, const FeatureMap& fm) {
        CompiledDataset cd;
        cd.x.reserve(ds.size());
        cd.y.reserve(ds.size());
        for (const PreferenceSample& z : ds.samples()) {
            cd.x.push_back(feature_difference(z, fm));
            cd.y.push_back(z.label);
        }
        return cd;
    }

    std::size_t size() const { return x.size(); }
};

namespace xy {

// Pointwise loss at score h with label y:
// -y log sigmoid(beta h) - (1-y) log sigmoid(-beta h), via softplus.
inline double pointwise_loss(double beta, double h, int y) {
    const double t = (y == 1) ? beta * h : -beta * h;
    return softplus(-t);
}

// d/dh coefficient of the pointwise loss divided by -beta:
// y sigmoid(-beta h) - (1-y) sigmoid(beta h), evaluated on the stable branch.
inline double residual(double beta, double h, int y) {
    return (y == 1) ? sigmoid(-beta * h) : -sigmoid(beta * h);
}

inline std::vector<double> pointwise_losses(const CompiledDataset& cd, const Vec& delta,
                                            double beta) {
    std::vector<double> out(cd.size());
    for (std::size_t i = 0; i < cd.size(); ++i) {
        out[i] = pointwise_loss(beta, delta.dot(cd.x[i]), cd.y[i]);
    }
    return out;
}

inline double empirical_loss(const CompiledDataset& cd, const Vec& delta, double beta) {
    if (cd.size() == 0) throw std::domain_error("empirical_loss: empty dataset");
    double sum = 0.0;
    for (std::size_t i = 0; i < cd.size(); ++i) {
        sum += pointwise_loss(beta, delta.dot(cd.x[i]), cd.y[i]);
    }
    return sum / static_cast<double>(cd.size());
}

inline Vec gradient(const CompiledDataset& cd, const Vec& delta, double beta) {
    if (cd.size() == 0) throw std::domain_error("gradient: empty dataset");
    Vec sum = Vec::Zero(delta.size());
    for (std::size_t i = 0; i < cd.size(); ++i) {
        sum += residual(beta, delta.dot(cd.x[i]), cd.y[i]) * cd.x[i];
    }
    return sum * (-beta / static_cast<double>(cd.size()));
}

inline Mat hessian(const CompiledDataset& cd, const Vec& delta, double beta) {
    if (cd.size() == 0) throw std::domain_error("hessian: empty dataset");
    const Eigen::Index d = delta.size();
    Mat sum = Mat::Zero(d, d);
    for (std::size_t i = 0; i < cd.size(); ++i) {
        const double bh = beta * delta.dot(cd.x[i]);
        const double c = sigmoid(bh) * sigmoid(-bh);
        // Entry (j, k) and its mirror receive the identical scalar sequence,
        // so the accumulated matrix is symmetric to the last bit.
        for (Eigen::Index k = 0; k < d; ++k) {
            for (Eigen::Index j = 0; j <= k; ++j) {
                const double v = c * (cd.x[i](j) * cd.x[i](k));
                sum(j, k) += v;
                if (j != k) sum(k, j) += v;
            }
        }
    }
    return sum * (beta * beta / static_cast<double>(cd.size()));
}

// ||d/dx pointwise_loss|| = beta |residual| ||delta||; the label is discrete
// and held fixed, the feature difference x is the continuous carrier of the
// sample.
inline double input_grad_norm(double beta, double h, int y, double delta_norm) {
    return beta * std::abs(residual(beta, h, y)) * delta_norm;
}

inline double mean_sq_input_grad(const CompiledDataset& cd, const Vec& delta, double beta) {
    if (cd.size() == 0) throw std::domain_error("mean_sq_input_grad: empty dataset");
    const double delta_norm = delta.norm();
    double sum = 0.0;
    for (std::size_t i = 0; i < cd.size(); ++i) {
        const double g = input_grad_norm(beta, delta.dot(cd.x[i]), cd.y[i], delta_norm);
        sum += g * g;
    }
    return sum / static_cast<double>(cd.size());
}

} // namespace xy

// ------------------------------------------------------------------
// Public operations on (policy pair, feature map, dataset).
// ------------------------------------------------------------------

inline double pointwise_dpo_loss(const PolicyPair& pp, const FeatureMap& fm,
                                 const PreferenceSample& z) {
    return xy::pointwise_loss(pp.beta, preference_score(pp, fm, z), z.label);
}

inline double empirical_dpo_loss(const PolicyPair& pp, const FeatureMap& fm,
                                 const PreferenceDataset& ds) {
    if (ds.empty()) throw std::domain_error("empirical_dpo_loss: empty dataset");
    const CompiledDataset cd = CompiledDataset::build(ds, fm);
    return xy::empirical_loss(cd, Vec(pp.current.theta - pp.reference.theta), pp.beta);
}

inline Vec dpo_gradient(const PolicyPair& pp, const FeatureMap& fm, const PreferenceDataset& ds) {
    if (ds.empty()) throw std::domain_error("dpo_gradient: empty dataset");
    const CompiledDataset cd = CompiledDataset::build(ds, fm);
    return xy::gradient(cd, Vec(pp.current.theta - pp.reference.theta), pp.beta);
}

inline Mat dpo_hessian(const PolicyPair& pp, const FeatureMap& fm, const PreferenceDataset& ds) {
    if (ds.empty()) throw std::domain_error("dpo_hessian: empty dataset");
    const CompiledDataset cd = CompiledDataset::build(ds, fm);
    return xy::hessian(cd, Vec(pp.current.theta - pp.reference.theta), pp.beta);
}

inline double input_gradient_norm(const PolicyPair& pp, const FeatureMap& fm,
                                  const PreferenceSample& z) {
    const Vec delta = pp.current.theta - pp.reference.theta;
    return xy::input_grad_norm(pp.beta, preference_score(pp, fm, z), z.label, delta.norm());
}

} // namespace prefopt
