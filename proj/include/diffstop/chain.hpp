#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "diffstop/diffusion.hpp"
#include "diffstop/errors.hpp"

namespace diffstop {

/**
 * How a truncation node is treated.
 *
 * ClampToReward stops there (V = g). Transparent continues with a ghost
 * neighbour V_ghost = V_end / rho, where rho is the decaying root of the
 * constant-coefficient recurrence at the end node; this is exact for the
 * untruncated chain when the region beyond the window is a continuation
 * region with constant rates.
 */
enum class BoundaryPolicy { ClampToReward, Transparent };

inline std::string to_string(BoundaryPolicy p) {
    return p == BoundaryPolicy::ClampToReward ? "clamp" : "transparent";
}

inline BoundaryPolicy boundary_policy_from_string(const std::string& s) {
    if (s == "clamp") return BoundaryPolicy::ClampToReward;
    if (s == "transparent") return BoundaryPolicy::Transparent;
    throw std::invalid_argument("unknown boundary policy '" + s + "'");
}

struct DiscretizeOptions {
    /// Add speed-atom weights to node masses; false drops the atoms from the chain.
    bool include_atoms = true;
    BoundaryPolicy left = BoundaryPolicy::ClampToReward;
    BoundaryPolicy right = BoundaryPolicy::ClampToReward;
};

/// Birth-death chain with generator q+ (V_{i+1} - V_i) + q- (V_{i-1} - V_i).
struct ChainModel {
    std::vector<double> nodes;
    std::vector<double> node_mass;
    std::vector<double> scale;      // S(x_i)
    std::vector<double> up_rate;    // q_i^+; zero at the last node
    std::vector<double> down_rate;  // q_i^-; zero at the first node
    BoundaryPolicy left = BoundaryPolicy::ClampToReward;
    BoundaryPolicy right = BoundaryPolicy::ClampToReward;

    std::size_t size() const { return nodes.size(); }

    /// Index of the node at (or nearest to) x.
    std::size_t index_of(double x) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
        if (it == nodes.end()) return nodes.size() - 1;
        if (it == nodes.begin()) return 0;
        const std::size_t i = static_cast<std::size_t>(it - nodes.begin());
        return (x - nodes[i - 1] <= nodes[i] - x) ? i - 1 : i;
    }
};

/**
 * Scale/speed chain on n uniform nodes over [lower, upper], with the node
 * nearest to each speed atom moved onto the atom. Node masses are exact
 * density integrals over the cell between neighbouring midpoints, plus the
 * atom weight; rates are q_i^+ = 1/(m_i (S_{i+1} - S_i)) and
 * q_i^- = 1/(m_i (S_i - S_{i-1})).
 */
inline ChainModel discretize(const DiffusionSpec& spec, double lower, double upper, std::size_t n,
                             const DiscretizeOptions& options = {}) {
    if (n < 50) throw std::invalid_argument("discretize: n must be at least 50");
    if (!(lower < upper)) throw std::invalid_argument("discretize: requires lower < upper");
    const auto& I = spec.interval();
    if (!I.contains(lower) || !I.contains(upper))
        throw std::invalid_argument("discretize: window must lie inside the state space");
    for (const auto& a : spec.speed_atoms())
        if (a.location < lower || a.location > upper)
            throw std::invalid_argument("discretize: speed atom outside the window");

    ChainModel chain;
    chain.left = options.left;
    chain.right = options.right;
    const double h = (upper - lower) / static_cast<double>(n - 1);
    chain.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) chain.nodes[i] = lower + h * static_cast<double>(i);
    chain.nodes.back() = upper;
    for (const auto& a : spec.speed_atoms()) chain.nodes[chain.index_of(a.location)] = a.location;

    chain.scale.resize(n);
    for (std::size_t i = 0; i < n; ++i) chain.scale[i] = spec.scale(chain.nodes[i]);

    chain.node_mass.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = i == 0 ? chain.nodes[0] : 0.5 * (chain.nodes[i - 1] + chain.nodes[i]);
        const double b = i + 1 == n ? chain.nodes[i] : 0.5 * (chain.nodes[i] + chain.nodes[i + 1]);
        double m = spec.speed_density_integral(a, b);
        if (options.include_atoms) m += spec.speed_atom_at(chain.nodes[i]);
        chain.node_mass[i] = m;
    }

    chain.up_rate.assign(n, 0.0);
    chain.down_rate.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (i + 1 < n) chain.up_rate[i] = 1.0 / (chain.node_mass[i] * (chain.scale[i + 1] - chain.scale[i]));
        if (i > 0) chain.down_rate[i] = 1.0 / (chain.node_mass[i] * (chain.scale[i] - chain.scale[i - 1]));
    }
    // End nodes with a transparent policy borrow the rate of their missing side from the inner one.
    if (chain.left == BoundaryPolicy::Transparent) {
        chain.node_mass[0] = chain.node_mass[1];
        chain.up_rate[0] = 1.0 / (chain.node_mass[0] * (chain.scale[1] - chain.scale[0]));
        chain.down_rate[0] = chain.down_rate[1];
    }
    if (chain.right == BoundaryPolicy::Transparent) {
        chain.node_mass[n - 1] = chain.node_mass[n - 2];
        chain.down_rate[n - 1] = 1.0 / (chain.node_mass[n - 1] * (chain.scale[n - 1] - chain.scale[n - 2]));
        chain.up_rate[n - 1] = chain.up_rate[n - 2];
    }
    return chain;
}

struct ChainSolveOptions {
    double tolerance = 1e-11;
    std::size_t max_policy_iterations = 100000;
    std::size_t max_value_iterations = 1000000;
    /// Plain value iteration is used only when max q / (alpha + q) is at most this.
    double value_iteration_contraction = 0.999;
};

struct ChainSolution {
    std::vector<double> value;
    std::vector<bool> stop;
    std::size_t iterations = 0;
    double residual = 0.0;
    std::string method;
};

namespace detail {

/// Ratio rho > 1 with V_{i+1} = rho V_i solving q+ rho^2 - (alpha + q+ + q-) rho + q- = 0.
inline double growth_root(double alpha, double qp, double qm) {
    const double b = alpha + qp + qm;
    const double disc = std::sqrt(b * b - 4.0 * qp * qm);
    return (b + disc) / (2.0 * qp);
}

/// Continuation value C_i(V) of node i, including ghost neighbours for transparent ends.
inline double continuation(const ChainModel& ch, double alpha, const std::vector<double>& v, std::size_t i) {
    const std::size_t n = ch.size();
    const double qp = ch.up_rate[i];
    const double qm = ch.down_rate[i];
    double up;
    double down;
    if (i + 1 < n) {
        up = v[i + 1];
    } else {
        up = v[i] / growth_root(alpha, qm, qp);  // decaying solution towards +inf
    }
    if (i > 0) {
        down = v[i - 1];
    } else {
        down = v[i] / growth_root(alpha, qp, qm);
    }
    return (qp * up + qm * down) / (alpha + qp + qm);
}

inline bool end_is_clamped(const ChainModel& ch, std::size_t i) {
    return (i == 0 && ch.left == BoundaryPolicy::ClampToReward) ||
           (i + 1 == ch.size() && ch.right == BoundaryPolicy::ClampToReward);
}

/// Thomas algorithm for a tridiagonal system; sub[0] and sup[n-1] are ignored.
inline std::vector<double> solve_tridiagonal(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup,
                                             std::vector<double> rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
    return x;
}

inline double fixed_point_residual(const ChainModel& ch, double alpha, const std::vector<double>& g,
                                   const std::vector<double>& v) {
    double res = 0.0;
    for (std::size_t i = 0; i < ch.size(); ++i) {
        const double target = end_is_clamped(ch, i) ? g[i] : std::max(g[i], continuation(ch, alpha, v, i));
        res = std::max(res, std::abs(v[i] - target));
    }
    return res;
}

}  // namespace detail

/**
 * Fixed point of V_i = max(g_i, C_i(V)), C_i(V) = (q+ V_{i+1} + q- V_{i-1}) / (alpha + q+ + q-),
 * with clamped ends fixed at g. Policy iteration with tridiagonal solves is
 * used unless the chain contracts fast enough for Jacobi value iteration.
 * Throws NotConverged when the iteration budget runs out.
 */
inline ChainSolution solve_chain_stopping(const ChainModel& ch, double alpha, const std::vector<double>& g,
                                          const ChainSolveOptions& opt = {}) {
    if (!(alpha > 0.0)) throw std::invalid_argument("solve_chain_stopping: alpha must be > 0");
    const std::size_t n = ch.size();
    if (g.size() != n) throw std::invalid_argument("solve_chain_stopping: reward size does not match the chain");

    double contraction = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double q = ch.up_rate[i] + ch.down_rate[i];
        contraction = std::max(contraction, q / (alpha + q));
    }

    ChainSolution sol;
    if (contraction <= opt.value_iteration_contraction) {
        sol.method = "value_iteration";
        std::vector<double> v = g;
        std::vector<double> next(n);
        for (std::size_t it = 1; it <= opt.max_value_iterations; ++it) {
            double change = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                next[i] = detail::end_is_clamped(ch, i) ? g[i] : std::max(g[i], detail::continuation(ch, alpha, v, i));
                change = std::max(change, std::abs(next[i] - v[i]));
            }
            v.swap(next);
            sol.iterations = it;
            if (change <= opt.tolerance * (1.0 - contraction)) break;
            if (it == opt.max_value_iterations)
                throw NotConverged("solve_chain_stopping: value iteration budget exhausted", change);
        }
        sol.value = v;
    } else {
        sol.method = "policy_iteration";
        std::vector<bool> stop(n);
        for (std::size_t i = 0; i < n; ++i) stop[i] = detail::end_is_clamped(ch, i) || g[i] > 0.0;
        std::vector<double> v(n);
        for (std::size_t it = 1;; ++it) {
            std::vector<double> sub(n, 0.0), diag(n, 1.0), sup(n, 0.0), rhs(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (stop[i]) {
                    rhs[i] = g[i];
                    continue;
                }
                const double qp = ch.up_rate[i];
                const double qm = ch.down_rate[i];
                diag[i] = alpha + qp + qm;
                if (i > 0) sub[i] = -qm;
                else diag[i] -= qm / detail::growth_root(alpha, qp, qm);
                if (i + 1 < n) sup[i] = -qp;
                else diag[i] -= qp / detail::growth_root(alpha, qm, qp);
            }
            v = detail::solve_tridiagonal(sub, diag, sup, rhs);
            bool changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (detail::end_is_clamped(ch, i)) continue;
                const double cont = detail::continuation(ch, alpha, v, i);
                // Switch only on a strict improvement so ties keep the current action.
                const double eps = 1e-14 * std::max(1.0, std::abs(g[i]));
                bool s = stop[i];
                if (stop[i] && cont > g[i] + eps) s = false;
                else if (!stop[i] && g[i] > cont + eps) s = true;
                if (s != stop[i]) {
                    stop[i] = s;
                    changed = true;
                }
            }
            sol.iterations = it;
            if (!changed) break;
            if (it >= opt.max_policy_iterations)
                throw NotConverged("solve_chain_stopping: policy iteration budget exhausted",
                                   detail::fixed_point_residual(ch, alpha, g, v));
        }
        sol.value = v;
    }
    sol.residual = detail::fixed_point_residual(ch, alpha, g, sol.value);
    if (sol.residual > 1e3 * opt.tolerance * std::max(1.0, *std::max_element(g.begin(), g.end())))
        throw NotConverged("solve_chain_stopping: fixed-point residual too large", sol.residual);
    sol.stop.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        sol.stop[i] = detail::end_is_clamped(ch, i) || sol.value[i] <= g[i] + opt.tolerance;
    return sol;
}

/// Reward vector g(x_i).
inline std::vector<double> tabulate(const ChainModel& ch, const std::function<double(double)>& g) {
    std::vector<double> out(ch.size());
    for (std::size_t i = 0; i < ch.size(); ++i) out[i] = g(ch.nodes[i]);
    return out;
}

struct CompareOptions {
    /// Error is measured on the central fraction of the window.
    double inner_fraction = 0.8;
    std::optional<double> jump_point;
};

struct ChainComparison {
    double sup_error = 0.0;
    double sup_error_location = 0.0;
    std::optional<double> jump_estimate;  // left minus right S-slope at the node nearest jump_point
    std::optional<double> left_slope;
    std::optional<double> right_slope;
};

inline ChainComparison compare(const ChainModel& ch, const std::vector<double>& v,
                               const std::function<double(double)>& analytic, const CompareOptions& opt = {}) {
    if (v.size() != ch.size()) throw std::invalid_argument("compare: value size does not match the chain");
    const double lo = ch.nodes.front();
    const double hi = ch.nodes.back();
    const double margin = 0.5 * (1.0 - opt.inner_fraction) * (hi - lo);
    ChainComparison out;
    for (std::size_t i = 0; i < ch.size(); ++i) {
        const double x = ch.nodes[i];
        if (x < lo + margin || x > hi - margin) continue;
        const double e = std::abs(v[i] - analytic(x));
        if (e > out.sup_error) {
            out.sup_error = e;
            out.sup_error_location = x;
        }
    }
    if (opt.jump_point) {
        const std::size_t k = ch.index_of(*opt.jump_point);
        if (k == 0 || k + 1 >= ch.size()) throw std::invalid_argument("compare: jump point needs neighbours on both sides");
        out.left_slope = (v[k] - v[k - 1]) / (ch.scale[k] - ch.scale[k - 1]);
        out.right_slope = (v[k + 1] - v[k]) / (ch.scale[k + 1] - ch.scale[k]);
        out.jump_estimate = *out.left_slope - *out.right_slope;
    }
    return out;
}

/**
 * Left end of the chain's stopping region: the first node with positive
 * reward that the solution stops at.
 */
inline std::optional<double> chain_stopping_boundary(const ChainModel& ch, const ChainSolution& sol,
                                                     const std::vector<double>& g) {
    for (std::size_t i = 0; i < ch.size(); ++i)
        if (g[i] > 0.0 && sol.stop[i] && !detail::end_is_clamped(ch, i)) return ch.nodes[i];
    return std::nullopt;
}

struct OracleReport {
    double window_lower = 0.0;
    double window_upper = 0.0;
    std::size_t n = 0;
    double alpha = 0.0;
    double c = 0.0;
    double sup_error = 0.0;
    double jump_estimate = 0.0;
    std::size_t iterations = 0;
    double residual = 0.0;
};

inline nlohmann::json to_json(const OracleReport& r) {
    return {{"window", {r.window_lower, r.window_upper}},
            {"n", r.n},
            {"alpha", r.alpha},
            {"c", r.c},
            {"sup_error", r.sup_error},
            {"jump_estimate", r.jump_estimate},
            {"iterations", r.iterations},
            {"residual", r.residual}};
}

}  // namespace diffstop
