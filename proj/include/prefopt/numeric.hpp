#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace prefopt {

// Logistic function, stable for arguments of either sign.
inline double sigmoid(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow for large |t|.
inline double softplus(double t) {
    if (t > 0.0) {
        return t + std::log1p(std::exp(-t));
    }
    return std::log1p(std::exp(t));
}

// log sum_i w[i] * exp(t[i]) with max-subtraction over the atoms that carry
// weight.  Zero-weight atoms are skipped so that -inf never enters the sum.
inline double log_sum_exp_weighted(const std::vector<double>& t,
                                   const std::vector<double>& w) {
    assert(t.size() == w.size());
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (w[i] > 0.0 && t[i] > m) m = t[i];
    }
    if (!std::isfinite(m)) {
        throw std::domain_error("log_sum_exp_weighted: no atom carries weight");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (w[i] > 0.0) s += w[i] * std::exp(t[i] - m);
    }
    return m + std::log(s);
}

// Minimizes a unimodal (here always convex) scalar function over [lo, hi] by
// golden-section search until the bracket is narrower than tol.  Returns the
// bracket midpoint and its value.
struct ScalarMin {
    double x;
    double value;
};

inline ScalarMin golden_section_minimize(const std::function<double(double)>& f,
                                         double lo, double hi, double tol) {
    if (!(lo <= hi)) throw std::invalid_argument("golden_section_minimize: lo > hi");
    if (!(tol > 0.0)) throw std::invalid_argument("golden_section_minimize: tol <= 0");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    // The bracket cannot shrink below a few ulps of its endpoints, so the
    // stop test carries a scale-aware floor; a bare absolute tol would spin
    // forever when the minimum sits near a large endpoint.
    const auto converged = [&] {
        const double floor =
            8.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b));
        return b - a <= tol + floor;
    };
    while (!converged()) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    return {x, f(x)};
}

} // namespace prefopt
