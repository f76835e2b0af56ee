#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "json.hpp"

#include "diffstop/derivative.hpp"
#include "diffstop/diffusion.hpp"
#include "diffstop/errors.hpp"
#include "diffstop/fundamental.hpp"
#include "diffstop/representation.hpp"

namespace diffstop {

/// Reward g(x) = (1 + x)^+.
inline double reward(double x) { return x > -1.0 ? 1.0 + x : 0.0; }

/// One-sided x-derivative of (1 + x)^+.
inline double reward_derivative(double x, Side side) {
    if (x > -1.0 || (x == -1.0 && side == Side::Right)) return 1.0;
    return 0.0;
}

/**
 * Discounted stopping problem V(x) = sup_tau E_x[e^{-alpha tau} g(X_tau)].
 * alpha = 0 is allowed for transient diffusions.
 */
struct StoppingProblem {
    DiffusionSpec spec;
    double alpha = 0.0;
    std::function<double(double)> reward = diffstop::reward;
    std::function<double(double, Side)> reward_derivative = diffstop::reward_derivative;
};

/**
 * Builds a stopping problem and checks that g / psi_alpha stays bounded
 * along the ray x = 2^k towards the right endpoint, which keeps V finite.
 */
inline StoppingProblem make_stopping_problem(DiffusionSpec spec, double alpha,
                                             std::function<double(double)> g = diffstop::reward,
                                             std::function<double(double, Side)> dg = diffstop::reward_derivative) {
    if (!std::isfinite(alpha) || alpha < 0.0) throw std::invalid_argument("stopping problem: alpha must be >= 0");
    const FundamentalSolutions fs = alpha > 0.0 ? fundamental(spec, alpha) : fundamental_zero(spec);
    const auto& I = spec.interval();
    double largest = 0.0;
    for (int k = 0; k <= 40; ++k) {
        const double x = I.right().position.is_finite()
                             ? I.right().position.value() - std::ldexp(1.0, -k)
                             : std::ldexp(1.0, k);
        if (!I.contains(x)) continue;
        const double p = fs.psi(x);
        if (!std::isfinite(p)) break;
        const double q = g(x) / p;
        if (!std::isfinite(q)) throw std::invalid_argument("stopping problem: g / psi is not finite on the test ray");
        largest = std::max(largest, q);
    }
    if (!(largest < 1e12)) throw std::invalid_argument("stopping problem: g / psi is unbounded; the value is infinite");
    return StoppingProblem{std::move(spec), alpha, std::move(g), std::move(dg)};
}

/**
 * Lower end of the smooth-fit failure regime, the alpha at which
 * t(0+) = theta - 1 + c theta^2 vanishes: (sqrt(1 + 4c) - 1)^2 / (8 c^2).
 * For c = 1 this is (3 - sqrt 5) / 4.
 */
inline double alpha1(double c) {
    if (!(c > 0.0)) throw std::invalid_argument("alpha1: c must be > 0");
    const double r = std::sqrt(1.0 + 4.0 * c) - 1.0;
    return r * r / (8.0 * c * c);
}

/// Upper end of the x* = 0 regime; does not depend on c.
inline constexpr double alpha2() { return 0.5; }

struct STValues {
    double s = 0.0;
    double t = 0.0;
};

namespace detail {
inline void check_alpha_c(double alpha, double c, const char* what) {
    if (!std::isfinite(alpha) || !(alpha > 0.0)) throw std::invalid_argument(std::string(what) + ": alpha must be > 0");
    if (!std::isfinite(c) || !(c > 0.0)) throw std::invalid_argument(std::string(what) + ": c must be > 0");
}
}  // namespace detail

/**
 * s = phi g' - phi' g and t = g psi' - g' psi for sticky Brownian motion
 * without drift and g(x) = (1 + x)^+. With theta = sqrt(2 alpha):
 *
 *   t(x) = e^{theta x}((1+x) theta - 1) + c theta ((1+x) theta ch(theta x) - sh(theta x))   x > 0,
 *   s(x) = e^{-theta x}((1+x) theta + 1) + c theta ((1+x) theta ch(theta x) - sh(theta x))  -1 < x < 0,
 *
 * where the c-terms are absent on the other side of 0, and s = t = 0 for
 * x < -1. At x = 0 a side selects the one-sided limit; x = -1 is rejected.
 */
inline STValues st_functions(double alpha, double c, double x, std::optional<Side> side = std::nullopt) {
    detail::check_alpha_c(alpha, c, "st_functions");
    if (x == -1.0) throw std::invalid_argument("st_functions: x = -1 is excluded");
    if (x == 0.0 && !side) throw std::invalid_argument("st_functions: x = 0 requires a side");
    if (x < -1.0) return {};
    const double th = std::sqrt(2.0 * alpha);
    const bool right = x > 0.0 || (x == 0.0 && *side == Side::Right);
    const double y = 1.0 + x;
    STValues out;
    out.t = std::exp(th * x) * (y * th - 1.0);
    out.s = std::exp(-th * x) * (y * th + 1.0);
    if (right)
        out.t += c * th * (y * th * std::cosh(th * x) - std::sinh(th * x));
    else
        out.s += c * th * (y * th * std::cosh(th * x) - std::sinh(th * x));
    return out;
}

/**
 * Optimal threshold x* for sticky Brownian motion (mu = 0) and reward (1+x)^+.
 *
 * t is increasing on (-1, inf) with an upward jump of 2 alpha c at 0.
 * When t(0-) > 0 the root is 1/sqrt(2 alpha) - 1; when t(0+) < 0 it is
 * found by bisection on a bracket grown from (0, 1]; otherwise x* = 0.
 * One-sided limits within 1e-12 of zero count as zero, so the regime
 * endpoints alpha1 and 1/2 map to x* = 0.
 */
inline double solve_threshold(double alpha, double c) {
    detail::check_alpha_c(alpha, c, "solve_threshold");
    const double th = std::sqrt(2.0 * alpha);
    const double eps = 1e-12;
    const double t_left = th - 1.0;
    const double t_right = th - 1.0 + 2.0 * alpha * c;
    if (t_left > eps) return 1.0 / th - 1.0;
    if (t_right >= -eps) return 0.0;
    auto t = [&](double x) { return st_functions(alpha, c, x).t; };
    double lo = 0.0;
    double hi = 1.0;
    while (t(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw NotConverged("solve_threshold: no sign change found", t(hi));
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double tm = t(mid);
        if (std::abs(tm) <= 1e-13) return mid;
        (tm < 0.0 ? lo : hi) = mid;
    }
    const double best = std::abs(t(lo)) < std::abs(t(hi)) ? lo : hi;
    if (std::abs(t(best)) > 1e-12) throw NotConverged("solve_threshold: bisection stalled", t(best));
    return best;
}

/// Value of the sticky problem: g(x*) psi(x) / psi(x*) left of x*, g(x) from x* on.
inline double value_function(double alpha, double c, double x) {
    const double xs = solve_threshold(alpha, c);
    if (x >= xs) return reward(x);
    const auto fs = fundamental(make_sticky_bm(0.0, c), alpha);
    return reward(xs) * fs.psi(x) / fs.psi(xs);
}

/// Classical (c = 0) value: x* = 1/sqrt(2 alpha) - 1 and V = g(x*) e^{sqrt(2 alpha)(x - x*)} below it.
inline double classical_value_function(double alpha, double x) {
    if (!(alpha > 0.0)) throw std::invalid_argument("classical_value_function: alpha must be > 0");
    const double th = std::sqrt(2.0 * alpha);
    const double xs = 1.0 / th - 1.0;
    if (x >= xs) return reward(x);
    return reward(xs) * std::exp(th * (x - xs));
}

/// Default normalization point for the stopping problem: max(0, x*) + 1.
inline double default_x0(double x_star) { return std::max(0.0, x_star) + 1.0; }

/// V* as an ExcessiveCandidate with analytic one-sided S-derivatives.
inline ExcessiveCandidate value_candidate(double alpha, double c, std::optional<double> x0 = std::nullopt) {
    const double xs = solve_threshold(alpha, c);
    const auto fs = fundamental(make_sticky_bm(0.0, c), alpha);
    const double k = reward(xs) / fs.psi(xs);
    ExcessiveCandidate cand;
    cand.name = "value";
    cand.value = [fs, xs, k](double x) { return x >= xs ? reward(x) : k * fs.psi(x); };
    cand.derivative_dS = [fs, xs, k](double x, Side side) {
        const bool continuation = x < xs || (x == xs && side == Side::Left);
        return continuation ? k * fs.psi_dS(x, side) : reward_derivative(x, side);
    };
    cand.normalization_point = x0.value_or(default_x0(xs));
    cand.kinks = {xs, 0.0, -1.0};
    return cand;
}

enum class Verdict { SmoothFit, Fails, Inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::SmoothFit: return "SmoothFit";
        case Verdict::Fails: return "Fails";
        case Verdict::Inconclusive: return "Inconclusive";
    }
    return "unknown";
}

struct SmoothFitReport {
    double alpha = 0.0;
    double c = 0.0;
    double z = 0.0;  // x*
    double left_dx = 0.0;
    double right_dx = 0.0;
    double left_dS = 0.0;
    double right_dS = 0.0;
    double jump = 0.0;
    double sigma_atom = 0.0;
    double speed_term = 0.0;
    double residual = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    Verdict verdict = Verdict::Fails;
};

/**
 * Smooth-fit analysis of V* at z = x*: one-sided derivatives rebuilt from
 * the Riesz measure of V*, the atom sigma_V({z}) and the speed term
 * m({z}) alpha V(z). SmoothFit iff |jump| <= 1e-9.
 */
inline SmoothFitReport smooth_fit_report(double alpha, double c) {
    detail::check_alpha_c(alpha, c, "smooth_fit_report");
    const auto spec = make_sticky_bm(0.0, c);
    const auto fs = fundamental(spec, alpha);
    const auto cand = value_candidate(alpha, c);
    const double xs = solve_threshold(alpha, c);
    const auto riesz = riesz_from_martin(martin_measure(fs, cand));
    const auto jd = derivative_jump(cand, riesz, xs);

    SmoothFitReport r;
    r.alpha = alpha;
    r.c = c;
    r.z = xs;
    r.left_dx = jd.left_dx;
    r.right_dx = jd.right_dx;
    r.left_dS = jd.left_dS;
    r.right_dS = jd.right_dS;
    r.jump = jd.jump;
    r.sigma_atom = jd.sigma_atom;
    r.speed_term = jd.speed_term;
    r.residual = jd.residual;
    r.alpha1 = diffstop::alpha1(c);
    r.alpha2 = diffstop::alpha2();
    r.verdict = std::abs(r.jump) <= 1e-9 ? Verdict::SmoothFit : Verdict::Fails;
    return r;
}

inline nlohmann::json to_json(const SmoothFitReport& r) {
    return {{"alpha", r.alpha},   {"c", r.c},
            {"x_star", r.z},      {"jump", r.jump},
            {"sigma_atom", r.sigma_atom}, {"speed_term", r.speed_term},
            {"alpha1", r.alpha1}, {"alpha2", r.alpha2},
            {"verdict", to_string(r.verdict)}};
}

/**
 * Sufficient test for smooth fit at a left boundary point z of a stopping
 * region: if g, psi_alpha and phi_alpha are all F-differentiable at z then
 * V is too. Returns SmoothFit when the one-sided F-derivatives agree to
 * 1e-6 relative, otherwise Inconclusive; never Fails.
 */
inline Verdict general_smooth_fit_check(const DiffusionSpec& spec, double alpha, const std::function<double(double)>& g,
                                        double z, const std::function<double(double)>& F) {
    const auto fs = fundamental(spec, alpha);
    auto differentiable = [&](const std::function<double(double)>& u) {
        try {
            const double l = f_derivative(u, F, z, Side::Left);
            const double r = f_derivative(u, F, z, Side::Right);
            return std::abs(l - r) <= 1e-6 * std::max(1.0, std::max(std::abs(l), std::abs(r)));
        } catch (const DerivativeNotConverged&) {
            return false;
        }
    };
    const bool ok = differentiable(g) && differentiable([&fs](double x) { return fs.psi(x); }) &&
                    differentiable([&fs](double x) { return fs.phi(x); });
    return ok ? Verdict::SmoothFit : Verdict::Inconclusive;
}

/// Undiscounted problem for a diffusion drifting to -infinity.
struct AlphaZeroSolution {
    double mu = 0.0;
    double c = 0.0;
    double threshold = 0.0;
    std::function<double(double)> value;
};

/**
 * alpha = 0 stopping of (1+x)^+ for drift mu < 0. The 0-excessive
 * majorant is g(x*) psi_0(x) / psi_0(x*) below x* with psi_0 = S - S(-inf),
 * and x* maximizes g / psi_0, giving x* = (1 - 2|mu|) / (2|mu|). Only the
 * scale function enters, so the answer does not depend on c.
 */
inline AlphaZeroSolution solve_alpha_zero(double mu, double c = 1.0) {
    if (!std::isfinite(mu) || !(mu < 0.0))
        throw std::invalid_argument("solve_alpha_zero: requires mu < 0 (recurrent diffusions have no nontrivial 0-excessive functions)");
    const auto fs = fundamental_zero(make_sticky_bm(mu, c));
    const double kappa = -2.0 * mu;
    AlphaZeroSolution out;
    out.mu = mu;
    out.c = c;
    out.threshold = (1.0 - kappa) / kappa;
    const double xs = out.threshold;
    const double k = reward(xs) / fs.psi(xs);
    out.value = [fs, xs, k](double x) { return x >= xs ? reward(x) : k * fs.psi(x); };
    return out;
}

}  // namespace diffstop
