#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "json.hpp"

#include "diffstop/errors.hpp"
#include "diffstop/extended_real.hpp"

namespace diffstop {

enum class BoundaryKind { Natural, Killing, Reflecting };

inline std::string to_string(BoundaryKind k) {
    switch (k) {
        case BoundaryKind::Natural: return "natural";
        case BoundaryKind::Killing: return "killing";
        case BoundaryKind::Reflecting: return "reflecting";
    }
    return "unknown";
}

struct Endpoint {
    ExtendedReal position;
    BoundaryKind kind = BoundaryKind::Natural;

    /// Reflecting endpoints belong to the state space; natural and killing ones do not.
    bool included() const { return kind == BoundaryKind::Reflecting; }
};

/**
 * State interval I with endpoints l < r.
 *
 * Reflecting endpoints are finite and included in I. Killing and natural
 * endpoints are excluded.
 */
class Interval {
public:
    Interval(Endpoint left, Endpoint right) : left_(left), right_(right) {
        auto finite_if_reflecting = [](const Endpoint& e) {
            return e.kind != BoundaryKind::Reflecting || e.position.is_finite();
        };
        if (!finite_if_reflecting(left_) || !finite_if_reflecting(right_))
            throw std::invalid_argument("Interval: reflecting endpoints must be finite");
        if (left_.position.is_plus_infinity() || right_.position.is_minus_infinity())
            throw std::invalid_argument("Interval: endpoints out of order");
        if (left_.position.is_finite() && right_.position.is_finite() &&
            !(left_.position.value() < right_.position.value()))
            throw std::invalid_argument("Interval: requires l < r");
    }

    const Endpoint& left() const { return left_; }
    const Endpoint& right() const { return right_; }

    /// x in I.
    bool contains(double x) const {
        if (!std::isfinite(x)) return false;
        bool ok_left = left_.included() ? !left_.position.greater_than(x) : left_.position.less_than(x);
        bool ok_right = right_.included() ? !right_.position.less_than(x) : right_.position.greater_than(x);
        return ok_left && ok_right;
    }

    /// x in the open interval (l, r).
    bool interior(double x) const {
        return std::isfinite(x) && left_.position.less_than(x) && right_.position.greater_than(x);
    }

    /// x in the closure of I intersected with the reals.
    bool in_closure(double x) const {
        return std::isfinite(x) && !left_.position.greater_than(x) && !right_.position.less_than(x);
    }

private:
    Endpoint left_;
    Endpoint right_;
};

/// Brownian motion with drift mu <= 0, sticky at 0 with stickiness c > 0.
struct StickyBM {
    double mu = 0.0;
    double c = 1.0;
};

/// Standard Brownian motion on [0, 1), reflected at 0 and killed at 1.
struct ReflectedKilledBM {};

/// Brownian motion with drift mu < 0 on the real line.
struct DriftBM {
    double mu = -0.5;
};

using Family = std::variant<StickyBM, ReflectedKilledBM, DriftBM>;

struct SpeedAtom {
    double location;
    double weight;
};

/**
 * A regular one-dimensional diffusion given by its state interval, scale
 * function and speed measure m(dx) = m_ac(x) dx + sum_i w_i delta_{z_i}.
 *
 * Instances are immutable; construct them through make_sticky_bm(),
 * make_reflected_killed_bm(), make_drift_bm() or make_spec().
 */
class DiffusionSpec {
public:
    DiffusionSpec(Interval interval, Family family, std::vector<SpeedAtom> atoms)
        : interval_(interval), family_(family), atoms_(std::move(atoms)) {
        for (const auto& a : atoms_) {
            if (!(a.weight > 0.0)) throw std::invalid_argument("DiffusionSpec: speed atom weights must be positive");
            if (!interval_.contains(a.location))
                throw std::invalid_argument("DiffusionSpec: speed atom outside the state space");
        }
        std::sort(atoms_.begin(), atoms_.end(),
                  [](const SpeedAtom& a, const SpeedAtom& b) { return a.location < b.location; });
    }

    const Interval& interval() const { return interval_; }
    const Family& family() const { return family_; }
    std::span<const SpeedAtom> speed_atoms() const { return atoms_; }

    std::string family_name() const {
        return std::visit(
            [](const auto& f) -> std::string {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, StickyBM>) return "sticky_bm";
                else if constexpr (std::is_same_v<T, ReflectedKilledBM>) return "reflected_killed_bm";
                else return "drift_bm";
            },
            family_);
    }

    /// Drift coefficient; zero for the reflected-killed family.
    double drift() const {
        if (auto* s = std::get_if<StickyBM>(&family_)) return s->mu;
        if (auto* d = std::get_if<DriftBM>(&family_)) return d->mu;
        return 0.0;
    }

    /// Stickiness c of the sticky family, zero otherwise.
    double stickiness() const {
        if (auto* s = std::get_if<StickyBM>(&family_)) return s->c;
        return 0.0;
    }

    /// S(x) = (1 - e^{-2 mu x}) / (2 mu), or x when mu = 0. Normalized so S(0) = 0.
    double scale(double x) const {
        const double mu = drift();
        if (mu == 0.0) return x;
        return -std::expm1(-2.0 * mu * x) / (2.0 * mu);
    }

    double scale_derivative(double x) const {
        const double mu = drift();
        if (mu == 0.0) return 1.0;
        return std::exp(-2.0 * mu * x);
    }

    ExtendedReal scale_at_left() const { return scale_limit(interval_.left().position, true); }
    ExtendedReal scale_at_right() const { return scale_limit(interval_.right().position, false); }

    /// Density of the absolutely continuous part of m: 2 e^{2 mu x}.
    double speed_density(double x) const {
        const double mu = drift();
        return mu == 0.0 ? 2.0 : 2.0 * std::exp(2.0 * mu * x);
    }

    /// Closed-form integral of the speed density over [a, b].
    double speed_density_integral(double a, double b) const {
        if (b <= a) return 0.0;
        const double mu = drift();
        if (mu == 0.0) return 2.0 * (b - a);
        return std::exp(2.0 * mu * a) * std::expm1(2.0 * mu * (b - a)) / mu;
    }

    /// m({z}); zero when z is not an atom.
    double speed_atom_at(double z) const {
        for (const auto& a : atoms_)
            if (a.location == z) return a.weight;
        return 0.0;
    }

private:
    ExtendedReal scale_limit(const ExtendedReal& pos, bool left) const {
        if (pos.is_finite()) return ExtendedReal::finite(scale(pos.value()));
        const double mu = drift();
        if (left && mu < 0.0) return ExtendedReal::finite(1.0 / (2.0 * mu));
        if (!left && mu > 0.0) return ExtendedReal::finite(1.0 / (2.0 * mu));
        return pos.is_plus_infinity() ? ExtendedReal::plus_infinity() : ExtendedReal::minus_infinity();
    }

    Interval interval_;
    Family family_;
    std::vector<SpeedAtom> atoms_;
};

namespace detail {
inline Interval real_line() {
    return Interval({ExtendedReal::minus_infinity(), BoundaryKind::Natural},
                    {ExtendedReal::plus_infinity(), BoundaryKind::Natural});
}
}  // namespace detail

/// Sticky Brownian motion with drift mu <= 0, sticky at 0: m(dx) = 2e^{2 mu x}dx + 2c delta_0.
inline DiffusionSpec make_sticky_bm(double mu, double c) {
    if (!std::isfinite(mu) || mu > 0.0) throw std::invalid_argument("sticky_bm: drift mu must be <= 0");
    if (!std::isfinite(c) || !(c > 0.0)) throw std::invalid_argument("sticky_bm: stickiness c must be > 0");
    return DiffusionSpec(detail::real_line(), StickyBM{mu, c}, {SpeedAtom{0.0, 2.0 * c}});
}

/// Brownian motion reflected at 0 and killed at 1; I = [0, 1).
inline DiffusionSpec make_reflected_killed_bm() {
    return DiffusionSpec(Interval({ExtendedReal::finite(0.0), BoundaryKind::Reflecting},
                                  {ExtendedReal::finite(1.0), BoundaryKind::Killing}),
                         ReflectedKilledBM{}, {});
}

/// Brownian motion with negative drift mu on the real line.
inline DiffusionSpec make_drift_bm(double mu) {
    if (!std::isfinite(mu) || !(mu < 0.0)) throw std::invalid_argument("drift_bm: drift mu must be < 0");
    return DiffusionSpec(detail::real_line(), DriftBM{mu}, {});
}

/// Key-value description of a diffusion family, shared with the CLI.
struct FamilyParameters {
    std::string family = "sticky_bm";
    double mu = 0.0;
    double c = 1.0;
};

inline DiffusionSpec make_spec(const FamilyParameters& p) {
    if (p.family == "sticky_bm") return make_sticky_bm(p.mu, p.c);
    if (p.family == "reflected_killed_bm") return make_reflected_killed_bm();
    if (p.family == "drift_bm") return make_drift_bm(p.mu);
    if (p.family == "absorbed_bm")
        throw NonRegularDiffusion(
            "absorbed_bm: an absorbing endpoint inside the state space makes the diffusion non-regular "
            "(it admits discontinuous excessive functions)");
    throw std::invalid_argument("unknown diffusion family '" + p.family + "'");
}

inline FamilyParameters family_parameters_from_json(const nlohmann::json& j) {
    FamilyParameters p;
    p.family = j.value("family", p.family);
    p.mu = j.value("mu", p.mu);
    p.c = j.value("c", p.c);
    return p;
}

inline DiffusionSpec spec_from_json(const nlohmann::json& j) { return make_spec(family_parameters_from_json(j)); }

inline nlohmann::json spec_to_json(const DiffusionSpec& spec) {
    nlohmann::json j{{"family", spec.family_name()}};
    if (!std::holds_alternative<ReflectedKilledBM>(spec.family())) j["mu"] = spec.drift();
    if (std::holds_alternative<StickyBM>(spec.family())) j["c"] = spec.stickiness();
    return j;
}

/**
 * m(A) for A the interval between a and b, with each endpoint included
 * according to its flag. The density part uses the closed-form integral;
 * atoms are added exactly.
 */
inline double speed_of_set(const DiffusionSpec& spec, double a, double b, bool include_a, bool include_b) {
    const auto& I = spec.interval();
    if (!I.contains(a) || !I.contains(b)) throw std::out_of_range("speed_of_set: bounds outside the state space");
    if (a > b) throw std::invalid_argument("speed_of_set: requires a <= b");
    double total = spec.speed_density_integral(a, b);
    for (const auto& atom : spec.speed_atoms()) {
        const double z = atom.location;
        bool inside = (z > a && z < b) || (z == a && include_a && (a < b || include_b)) ||
                      (z == b && include_b && (a < b || include_a));
        if (a == b) inside = (z == a) && include_a && include_b;
        if (inside) total += atom.weight;
    }
    return total;
}

}  // namespace diffstop
