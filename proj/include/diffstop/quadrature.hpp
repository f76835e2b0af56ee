#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "diffstop/errors.hpp"

namespace diffstop {

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
};

struct QuadratureOptions {
    /// Relative to the L1 norm of the integrand over the whole range.
    double relative_tolerance = 1e-13;
    double absolute_tolerance = 1e-14;
    unsigned max_depth = 18;
};

namespace detail {

using GK15 = boost::math::quadrature::gauss_kronrod<double, 15>;

struct GKState {
    double error = 0.0;
    double l1 = 0.0;
    bool failed = false;
};

/// Bisects [a, b] until each piece meets its share of the absolute tolerance.
template <class G>
double gk_adapt(G& g, double a, double b, double tol, unsigned depth, GKState& st) {
    double err = 0.0;
    double l1 = 0.0;
    const double v = GK15::integrate(g, a, b, 0, 0.0, &err, &l1);
    // With max_depth = 0 Boost reports the error on the reference interval [-1, 1].
    err *= 0.5 * (b - a);
    if (err <= tol || depth == 0 || !std::isfinite(v)) {
        if (!std::isfinite(v)) st.failed = true;
        st.error += err;
        st.l1 += l1;
        return v;
    }
    const double mid = 0.5 * (a + b);
    const double left = gk_adapt(g, a, mid, 0.5 * tol, depth - 1, st);
    const double right = gk_adapt(g, mid, b, 0.5 * tol, depth - 1, st);
    return left + right;
}

/// Integral over one piece; infinite ends are mapped onto (0, 1) with x = a + t / (1 - t).
template <class F>
QuadratureResult integrate_piece(F& f, double a, double b, const QuadratureOptions& opt) {
    auto run = [&](auto&& g, double lo, double hi) {
        double err0 = 0.0;
        double l1 = 0.0;
        GK15::integrate(g, lo, hi, 0, 0.0, &err0, &l1);
        const double tol = std::max(opt.absolute_tolerance, opt.relative_tolerance * l1);
        GKState st;
        const double v = gk_adapt(g, lo, hi, tol, opt.max_depth, st);
        // Pieces that bottom out are fine as long as the summed estimate meets the tolerance.
        if (st.failed || !std::isfinite(v) || st.error > tol) {
            std::ostringstream msg;
            msg << "quadrature on [" << a << ", " << b << "] did not converge: error estimate " << st.error
                << " exceeds " << tol;
            throw QuadratureError(msg.str(), st.error);
        }
        return QuadratureResult{v, st.error};
    };
    if (std::isfinite(a) && std::isfinite(b)) return run(f, a, b);
    if (std::isfinite(a)) {
        auto g = [&](double t) {
            const double s = 1.0 - t;
            return f(a + t / s) / (s * s);
        };
        return run(g, 0.0, 1.0);
    }
    if (std::isfinite(b)) {
        auto g = [&](double t) {
            const double s = 1.0 - t;
            return f(b - t / s) / (s * s);
        };
        return run(g, 0.0, 1.0);
    }
    QuadratureResult lo = integrate_piece(f, -INFINITY, 0.0, opt);
    QuadratureResult hi = integrate_piece(f, 0.0, INFINITY, opt);
    return {lo.value + hi.value, lo.error_estimate + hi.error_estimate};
}

}  // namespace detail

/**
 * Adaptive Gauss-Kronrod (7/15) integral of f over [a, b], split at the
 * given breakpoints. Either end may be infinite. Pieces are processed in
 * ascending order and each is bisected depth-first, so the result does not
 * depend on scheduling.
 *
 * A piece is accepted when the Kronrod error estimate is within
 * max(absolute_tolerance, relative_tolerance * L1); otherwise
 * QuadratureError is thrown with the achieved error bound.
 */
template <class F>
QuadratureResult integrate(F&& f, double a, double b, std::vector<double> breakpoints = {},
                           const QuadratureOptions& opt = {}) {
    if (!(a < b)) return {};
    std::vector<double> cuts{a};
    std::sort(breakpoints.begin(), breakpoints.end());
    for (double p : breakpoints)
        if (std::isfinite(p) && p > cuts.back() && p < b) cuts.push_back(p);
    cuts.push_back(b);

    QuadratureResult total;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const QuadratureResult piece = detail::integrate_piece(f, cuts[i], cuts[i + 1], opt);
        total.value += piece.value;
        total.error_estimate += piece.error_estimate;
    }
    return total;
}

}  // namespace diffstop
