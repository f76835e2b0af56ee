#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "diffstop/derivative.hpp"
#include "diffstop/diffusion.hpp"
#include "diffstop/errors.hpp"
#include "diffstop/fundamental.hpp"
#include "diffstop/quadrature.hpp"

namespace diffstop {

/**
 * A function u >= 0 offered for representation, with its one-sided
 * derivatives with respect to the scale function.
 *
 * `kinks` lists points where u^- and u^+ may differ; they, together with
 * the speed atoms, are where atoms of the representing measure are looked
 * for. The normalization point x0 must have 0 < u(x0) < inf.
 */
struct ExcessiveCandidate {
    std::string name;
    std::function<double(double)> value;
    std::function<double(double, Side)> derivative_dS;
    double normalization_point = 0.0;
    std::vector<double> kinks;
};

/// Candidate whose S-derivatives are obtained numerically with f_derivative (F = S).
inline ExcessiveCandidate numeric_candidate(const DiffusionSpec& spec, std::string name,
                                            std::function<double(double)> u, double x0,
                                            std::vector<double> kinks = {}) {
    ExcessiveCandidate c;
    c.name = std::move(name);
    c.value = u;
    std::vector<double> nonsmooth = kinks;
    for (const auto& a : spec.speed_atoms()) nonsmooth.push_back(a.location);
    c.derivative_dS = [spec, u, nonsmooth](double x, Side side) {
        // Keep the difference quotients on one side of every known kink.
        DerivativeOptions opt;
        for (double k : nonsmooth)
            if (k != x) opt.initial_step_factor = std::min(opt.initial_step_factor, 0.5 * std::abs(x - k) / (1.0 + std::abs(x)));
        return f_derivative(u, [&spec](double y) { return spec.scale(y); }, x, side, opt);
    };
    c.normalization_point = x0;
    c.kinks = std::move(kinks);
    return c;
}

namespace detail {
inline std::vector<double> speed_atom_locations(const DiffusionSpec& spec) {
    std::vector<double> z;
    for (const auto& a : spec.speed_atoms()) z.push_back(a.location);
    return z;
}
}  // namespace detail

/// u(x) = G_alpha(x, y0).
inline ExcessiveCandidate green_candidate(const FundamentalSolutions& fs, double y0, double x0) {
    ExcessiveCandidate c;
    c.name = "green";
    c.value = [fs, y0](double x) {
        return x <= y0 ? fs.psi(x) * fs.phi(y0) / fs.wronskian() : fs.psi(y0) * fs.phi(x) / fs.wronskian();
    };
    c.derivative_dS = [fs, y0](double x, Side side) {
        const bool psi_branch = side == Side::Left ? x <= y0 : x < y0;
        return psi_branch ? fs.psi_dS(x, side) * fs.phi(y0) / fs.wronskian()
                          : fs.psi(y0) * fs.phi_dS(x, side) / fs.wronskian();
    };
    c.normalization_point = x0;
    c.kinks = detail::speed_atom_locations(fs.spec());
    c.kinks.push_back(y0);
    return c;
}

inline ExcessiveCandidate psi_candidate(const FundamentalSolutions& fs, double x0) {
    ExcessiveCandidate c;
    c.name = "psi";
    c.value = [fs](double x) { return fs.psi(x); };
    c.derivative_dS = [fs](double x, Side side) { return fs.psi_dS(x, side); };
    c.normalization_point = x0;
    c.kinks = detail::speed_atom_locations(fs.spec());
    return c;
}

inline ExcessiveCandidate phi_candidate(const FundamentalSolutions& fs, double x0) {
    ExcessiveCandidate c;
    c.name = "phi";
    c.value = [fs](double x) { return fs.phi(x); };
    c.derivative_dS = [fs](double x, Side side) { return fs.phi_dS(x, side); };
    c.normalization_point = x0;
    c.kinks = detail::speed_atom_locations(fs.spec());
    return c;
}

enum class MeasureKind { Martin, Riesz };

inline std::string to_string(MeasureKind k) { return k == MeasureKind::Martin ? "martin" : "riesz"; }

struct Atom {
    double location;
    double weight;
};

/// Relative size below which a tail jump is treated as quadrature noise.
inline constexpr double kAtomThreshold = 1e-12;

namespace detail {

/**
 * The Martin measure nu of u / u(x0) on the closure [l, r], described by
 *   right_tail(x) = nu((x, r]),  x >= x0,
 *   left_tail(x)  = nu([l, x)),  x <= x0,
 * plus explicit atoms and boundary masses. A Riesz measure is derived from
 * the same data through sigma(dy) = nu(dy) / G(x0, y).
 */
struct MartinCore {
    FundamentalSolutions fs;
    double x0 = 0.0;
    double u0 = 1.0;
    std::function<double(double)> right_tail{};
    std::function<double(double)> left_tail{};
    std::vector<Atom> atoms{};  // sorted by location; includes an atom at an included endpoint
    double mass_left = 0.0;   // nu({l}) for an excluded endpoint l
    double mass_right = 0.0;  // nu({r}) for an excluded endpoint r
    double total = 1.0;
    std::vector<double> breakpoints{};

    double atom_at(double z) const {
        for (const auto& a : atoms)
            if (a.location == z) return a.weight;
        return 0.0;
    }

    /// nu([l, x)).
    double cdf(double x) const {
        const auto& I = fs.spec().interval();
        if (I.left().position.is_finite() && x <= I.left().position.value()) return 0.0;
        if (I.right().position.is_finite() && x >= I.right().position.value()) return total - mass_right;
        if (x <= x0) return left_tail(x);
        return total - right_tail(x) - atom_at(x);
    }

    /// nu_c([l, x)) for the atom-free part.
    double continuous_cdf(double x) const {
        double v = cdf(x) - mass_left;
        for (const auto& a : atoms) {
            if (a.location >= x) break;
            v -= a.weight;
        }
        return v;
    }

    /**
     * Integral of f over the open interval (a, b) against nu, for finite
     * a < b. Atoms are summed exactly; the continuous part is integrated by
     * parts, int f dnu_c = f(a) nu_c((a,b)) + int_a^b f'(s) nu_c((s,b)) ds.
     */
    template <class F, class DF>
    double integrate_open(F&& f, DF&& df, double a, double b) const {
        if (!(a < b)) return 0.0;
        double sum = 0.0;
        for (const auto& at : atoms)
            if (at.location > a && at.location < b) sum += f(at.location) * at.weight;
        const double cb = continuous_cdf(b);
        sum += f(a) * (cb - continuous_cdf(a));
        auto integrand = [&](double s) { return df(s) * (cb - continuous_cdf(s)); };
        // f is monotone and nu has mass at most one, so |f(b) - f(a)| bounds the integral's scale.
        QuadratureOptions opt;
        opt.relative_tolerance = 1e-12;
        opt.absolute_tolerance = std::max(1e-13 * std::abs(f(b) - f(a)), 1e-300);
        sum += integrate(integrand, a, b, breakpoints, opt).value;
        return sum;
    }

    /// h = psi / phi and its x-derivative omega S' / phi^2.
    double h(double y) const { return fs.psi(y) / fs.phi(y); }
    double dh(double y) const {
        const double p = fs.phi(y);
        return fs.wronskian() * fs.spec().scale_derivative(y) / (p * p);
    }
    double inv_h(double y) const { return fs.phi(y) / fs.psi(y); }
    double dinv_h(double y) const {
        const double p = fs.psi(y);
        return -fs.wronskian() * fs.spec().scale_derivative(y) / (p * p);
    }
};

inline double tail_limit(const std::function<double(double)>& tail, double x0, double direction) {
    const double unit = 1.0 + std::abs(x0);
    double prev = tail(x0 + direction * unit);
    int settled = 0;
    for (int k = 1; k <= 62; ++k) {
        const double v = tail(x0 + direction * unit * std::ldexp(1.0, k));
        if (!std::isfinite(v)) break;
        settled = std::abs(v - prev) <= 1e-15 * std::max(1.0, std::abs(v)) ? settled + 1 : 0;
        prev = v;
        if (settled >= 2) break;
    }
    return prev;
}

/**
 * Sample points between x0 and an endpoint: x0 + d t / (1 - t) towards an
 * infinite end and x0 + (end - x0) t towards a finite one, on t_k = k / (count + 1),
 * plus any extra points (atoms, speed atoms) lying on that side. Ordered
 * by distance from x0.
 */
inline std::vector<double> tail_sample_points(const Interval& I, double x0, double direction, int count,
                                              const std::vector<double>& extra = {}) {
    std::vector<double> xs;
    const ExtendedReal& end = direction > 0 ? I.right().position : I.left().position;
    for (int k = 1; k <= count; ++k) {
        const double t = static_cast<double>(k) / (count + 1);
        const double x = end.is_finite() ? x0 + (end.value() - x0) * t
                                         : x0 + direction * (1.0 + std::abs(x0)) * t / (1.0 - t);
        if (I.interior(x)) xs.push_back(x);
    }
    for (double e : extra)
        if (I.interior(e) && direction * (e - x0) > 0.0) xs.push_back(e);
    std::sort(xs.begin(), xs.end(), [x0, direction](double a, double b) { return direction * (a - x0) < direction * (b - x0); });
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

}  // namespace detail

/**
 * Martin or Riesz representing measure of an alpha-excessive function.
 *
 * Martin kind: a probability measure nu on [l, r] representing u / u(x0).
 * Riesz kind: sigma(dy) = nu(dy) / G(x0, y) on I plus the harmonic part
 * c1' phi + c2' psi, again for u / u(x0). Multiply by normalization() to get
 * the measures of u itself.
 */
class RepresentingMeasure {
public:
    MeasureKind kind() const { return kind_; }
    double x0() const { return core_->x0; }
    /// u(x0).
    double normalization() const { return core_->u0; }
    const FundamentalSolutions& fundamental() const { return core_->fs; }

    double mass_left_boundary() const { return core_->mass_left; }
    double mass_right_boundary() const { return core_->mass_right; }

    /// Interior atoms (Martin weights, or Riesz weights for the Riesz kind).
    const std::vector<Atom>& atoms() const { return atoms_; }
    double atom_at(double z) const {
        for (const auto& a : atoms_)
            if (a.location == z) return a.weight;
        return 0.0;
    }

    /// Coefficients of phi and psi in the harmonic part (Riesz kind; zero otherwise).
    double harmonic_phi() const { return harmonic_phi_; }
    double harmonic_psi() const { return harmonic_psi_; }

    /**
     * Martin: nu((x, r]) for x >= x0.  Riesz: sigma((x0, x]) for x >= x0.
     */
    double right_tail(double x) const {
        if (x < core_->x0) throw std::out_of_range("right_tail: requires x >= x0");
        if (kind_ == MeasureKind::Martin) return core_->right_tail(x);
        const auto& c = *core_;
        if (x == c.x0) return 0.0;
        const double w = c.fs.wronskian() / c.fs.psi(c.x0);
        auto f = [&c](double y) { return 1.0 / c.fs.phi(y); };
        auto df = [&c](double y) {
            const double p = c.fs.phi(y);
            return -c.fs.phi_dx(y, Side::Right) / (p * p);
        };
        return w * (c.integrate_open(f, df, c.x0, x) + c.atom_at(x) / c.fs.phi(x));
    }

    /**
     * Martin: nu([l, x)) for x <= x0.  Riesz: sigma([x, x0)) for x <= x0.
     */
    double left_tail(double x) const {
        if (x > core_->x0) throw std::out_of_range("left_tail: requires x <= x0");
        if (kind_ == MeasureKind::Martin) return core_->left_tail(x);
        const auto& c = *core_;
        if (x == c.x0) return 0.0;
        const double w = c.fs.wronskian() / c.fs.phi(c.x0);
        auto f = [&c](double y) { return 1.0 / c.fs.psi(y); };
        auto df = [&c](double y) {
            const double p = c.fs.psi(y);
            return -c.fs.psi_dx(y, Side::Right) / (p * p);
        };
        return w * (c.integrate_open(f, df, x, c.x0) + c.atom_at(x) / c.fs.psi(x));
    }

    /// Martin total mass nu([l, r]).
    double total_mass() const { return core_->total; }

    /// Shared Martin data; used by the free functions below.
    const detail::MartinCore& core() const { return *core_; }

private:
    RepresentingMeasure() = default;

    MeasureKind kind_ = MeasureKind::Martin;
    std::shared_ptr<const detail::MartinCore> core_;
    std::vector<Atom> atoms_;
    double harmonic_phi_ = 0.0;
    double harmonic_psi_ = 0.0;

    friend RepresentingMeasure martin_measure(const FundamentalSolutions&, const ExcessiveCandidate&,
                                              const std::vector<double>&);
    friend RepresentingMeasure riesz_from_martin(const RepresentingMeasure&);
    friend RepresentingMeasure measure_from_json(const nlohmann::json&, const FundamentalSolutions&);
};

/**
 * Martin representing measure of the candidate, normalized at its x0:
 *
 *   nu((x, r]) = psi(x0)/omega (phi u^+ - u phi^+)(x) / u(x0),   x >= x0,
 *   nu([l, x)) = phi(x0)/omega (u psi^- - psi u^-)(x) / u(x0),   x <= x0.
 *
 * Atoms are detected as jumps of these tails at the candidate's kinks, the
 * speed atoms, x0 and any extra `scan` points. Boundary masses are the
 * limits of the tails at l and r. Throws NotExcessive when a tail is not
 * monotone or an atom comes out negative.
 */
inline RepresentingMeasure martin_measure(const FundamentalSolutions& fs, const ExcessiveCandidate& cand,
                                          const std::vector<double>& scan = {}) {
    const auto& I = fs.spec().interval();
    const double x0 = cand.normalization_point;
    if (!I.interior(x0)) throw std::invalid_argument("martin_measure: x0 must be interior");
    const double u0 = cand.value(x0);
    if (!std::isfinite(u0) || !(u0 > 0.0))
        throw std::invalid_argument("martin_measure: u(x0) must be positive and finite");

    auto core = std::make_shared<detail::MartinCore>(detail::MartinCore{.fs = fs});
    core->x0 = x0;
    core->u0 = u0;
    const double omega = fs.wronskian();
    const double pre_right = fs.psi(x0) / (omega * u0);
    const double pre_left = fs.phi(x0) / (omega * u0);
    auto u = cand.value;
    auto du = cand.derivative_dS;

    auto right_at = [fs, u, du, pre_right](double x, Side side) {
        return pre_right * (fs.phi(x) * du(x, side) - u(x) * fs.phi_dS(x, side));
    };
    auto left_at = [fs, u, du, pre_left](double x, Side side) {
        return pre_left * (u(x) * fs.psi_dS(x, side) - fs.psi(x) * du(x, side));
    };
    core->right_tail = [right_at](double x) { return right_at(x, Side::Right); };
    core->left_tail = [left_at](double x) { return left_at(x, Side::Left); };

    // Atoms at candidate points.
    std::vector<double> probes = cand.kinks;
    for (const auto& a : fs.spec().speed_atoms()) probes.push_back(a.location);
    probes.insert(probes.end(), scan.begin(), scan.end());
    std::sort(probes.begin(), probes.end());
    probes.erase(std::unique(probes.begin(), probes.end()), probes.end());

    std::vector<Atom> atoms;
    auto accept = [&atoms](double z, double w) {
        if (w < -kAtomThreshold) {
            std::ostringstream msg;
            msg << "martin_measure: negative mass " << w << " at " << z << " (candidate is not alpha-excessive)";
            throw NotExcessive(msg.str());
        }
        if (w > kAtomThreshold) atoms.push_back({z, w});
    };
    for (double z : probes) {
        if (!I.interior(z) || z == x0) continue;
        const double w = z > x0 ? right_at(z, Side::Left) - right_at(z, Side::Right)
                                : left_at(z, Side::Right) - left_at(z, Side::Left);
        accept(z, w);
    }
    const double r0 = core->right_tail(x0);
    const double l0 = core->left_tail(x0);
    accept(x0, 1.0 - r0 - l0);

    // Boundary masses as limits of the tails.
    auto left_limit = [&]() {
        if (I.left().position.is_finite()) return left_at(I.left().position.value(), Side::Right);
        return detail::tail_limit(core->left_tail, x0, -1.0);
    };
    auto right_limit = [&]() {
        if (I.right().position.is_finite()) return right_at(I.right().position.value(), Side::Left);
        return detail::tail_limit(core->right_tail, x0, +1.0);
    };
    const double ml = left_limit();
    const double mr = right_limit();
    if (ml < -kAtomThreshold || mr < -kAtomThreshold)
        throw NotExcessive("martin_measure: negative boundary mass (candidate is not alpha-excessive)");
    if (I.left().included()) {
        if (ml > kAtomThreshold) atoms.push_back({I.left().position.value(), ml});
    } else {
        core->mass_left = ml > kAtomThreshold ? ml : 0.0;
    }
    if (I.right().included()) {
        if (mr > kAtomThreshold) atoms.push_back({I.right().position.value(), mr});
    } else {
        core->mass_right = mr > kAtomThreshold ? mr : 0.0;
    }
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.location < b.location; });
    core->atoms = atoms;
    core->total = l0 + r0 + core->atom_at(x0);

    // Monotonicity of the tails.
    const double tol = 1e-10;
    double prev = r0;
    for (double x : detail::tail_sample_points(I, x0, +1.0, 48)) {
        const double v = core->right_tail(x);
        if (!std::isfinite(v)) break;
        if (v > prev + tol || v < -tol)
            throw NotExcessive("martin_measure: right tail is not nonincreasing (candidate is not alpha-excessive)");
        prev = v;
    }
    prev = l0;
    for (double x : detail::tail_sample_points(I, x0, -1.0, 48)) {
        const double v = core->left_tail(x);
        if (!std::isfinite(v)) break;
        if (v > prev + tol || v < -tol)
            throw NotExcessive("martin_measure: left tail is not nondecreasing (candidate is not alpha-excessive)");
        prev = v;
    }

    core->breakpoints = probes;
    core->breakpoints.push_back(x0);
    for (const auto& a : atoms) core->breakpoints.push_back(a.location);
    std::sort(core->breakpoints.begin(), core->breakpoints.end());

    RepresentingMeasure m;
    m.kind_ = MeasureKind::Martin;
    m.core_ = core;
    m.atoms_ = atoms;
    return m;
}

/**
 * Riesz measure sigma(A) = int_A nu(dy) / G(x0, y). Boundary masses of nu
 * become the harmonic coefficients c1' = nu({l}) / phi(x0) and
 * c2' = nu({r}) / psi(x0).
 */
inline RepresentingMeasure riesz_from_martin(const RepresentingMeasure& martin) {
    if (martin.kind() != MeasureKind::Martin) throw std::invalid_argument("riesz_from_martin: expects a Martin measure");
    const auto& c = martin.core();
    RepresentingMeasure r;
    r.kind_ = MeasureKind::Riesz;
    r.core_ = martin.core_;
    for (const auto& a : c.atoms) r.atoms_.push_back({a.location, a.weight / c.fs.green(c.x0, a.location)});
    r.harmonic_phi_ = c.mass_left / c.fs.phi(c.x0);
    r.harmonic_psi_ = c.mass_right / c.fs.psi(c.x0);
    return r;
}

/**
 * Evaluates the representation at x and returns u(x) / u(x0):
 *
 *   int_(l,r) G(x,y)/G(x0,y) nu(dy) + phi(x)/phi(x0) nu({l}) + psi(x)/psi(x0) nu({r}).
 *
 * Boundary terms and atoms are exact; the continuous part is integrated
 * numerically. Accepts either kind of measure.
 */
inline double reconstruct(const RepresentingMeasure& measure, double x) {
    const auto& c = measure.core();
    const auto& fs = c.fs;
    if (!fs.spec().interval().in_closure(x)) throw std::out_of_range("reconstruct: x outside the state interval");
    const double x0 = c.x0;
    if (x == x0) return c.total;
    if (x > x0) {
        const double below = c.cdf(x0) + c.atom_at(x0);          // nu([l, x0])
        const double above = c.total - c.cdf(x);                  // nu([x, r])
        const double middle = c.integrate_open([&c](double y) { return c.h(y); },
                                               [&c](double y) { return c.dh(y); }, x0, x);
        return fs.phi(x) / fs.phi(x0) * below + fs.psi(x) / fs.psi(x0) * above + fs.phi(x) / fs.psi(x0) * middle;
    }
    const double below = c.cdf(x) + c.atom_at(x);                 // nu([l, x])
    const double above = c.total - c.cdf(x0);                     // nu([x0, r])
    const double middle = c.integrate_open([&c](double y) { return c.inv_h(y); },
                                           [&c](double y) { return c.dinv_h(y); }, x, x0);
    return fs.phi(x) / fs.phi(x0) * below + fs.psi(x) / fs.psi(x0) * above + fs.psi(x) / fs.phi(x0) * middle;
}

/// One-sided derivatives of u at z rebuilt from its Riesz measure, and the jump decomposition.
struct JumpDecomposition {
    double z = 0.0;
    double value = 0.0;                      // u(z) from the candidate
    double value_from_representation = 0.0;  // u(z) rebuilt from the measure
    double left_dS = 0.0;
    double right_dS = 0.0;
    double left_dx = 0.0;
    double right_dx = 0.0;
    double jump = 0.0;         // left_dS - right_dS
    double sigma_atom = 0.0;   // sigma_u({z}) for u itself
    double speed_term = 0.0;   // m({z}) alpha u(z)
    double residual = 0.0;     // jump - (sigma_atom - speed_term)
    bool s_differentiable = false;
};

/**
 * One-sided scale derivatives of u at an interior point z from
 *
 *   u^+(z) = (phi^+(z) int_(l,z] psi dsigma + psi^+(z) int_(z,r) phi dsigma) / omega,
 *   u^-(z) = (phi^-(z) int_(l,z) psi dsigma + psi^-(z) int_[z,r) phi dsigma) / omega,
 *
 * plus the harmonic part, and the identity
 * u^-(z) - u^+(z) = sigma({z}) - m({z}) alpha u(z).
 */
inline JumpDecomposition derivative_jump(const ExcessiveCandidate& cand, const RepresentingMeasure& measure, double z,
                                         double tolerance = 1e-9) {
    const auto& c = measure.core();
    const auto& fs = c.fs;
    const auto& spec = fs.spec();
    if (!spec.interval().interior(z)) throw std::invalid_argument("derivative_jump: z must be an interior point");
    const RepresentingMeasure riesz = measure.kind() == MeasureKind::Riesz ? measure : riesz_from_martin(measure);

    const double x0 = c.x0;
    const double omega = fs.wronskian();
    const double phi0 = fs.phi(x0);
    const double psi0 = fs.psi(x0);
    const double ml = c.mass_left;
    const double mr = c.mass_right;

    // A = int_(l,z] psi dsigma, B = int_(z,r) phi dsigma, both for u / u(x0).
    double A = 0.0;
    double B = 0.0;
    if (z < x0) {
        A = omega / phi0 * (c.cdf(z) + c.atom_at(z) - ml);
        const double mid = c.integrate_open([&c](double y) { return c.inv_h(y); },
                                            [&c](double y) { return c.dinv_h(y); }, z, x0);
        B = omega / phi0 * mid + omega / psi0 * (c.total - c.cdf(x0) - mr);
    } else {
        double mid = 0.0;
        if (z > x0)
            mid = c.integrate_open([&c](double y) { return c.h(y); }, [&c](double y) { return c.dh(y); }, x0, z) +
                  c.h(z) * c.atom_at(z);
        A = omega / phi0 * (c.cdf(x0) + c.atom_at(x0) - ml) + omega / psi0 * mid;
        B = omega / psi0 * (c.total - c.cdf(z) - c.atom_at(z) - mr);
    }
    const double sz = riesz.atom_at(z);
    const double c1 = riesz.harmonic_phi();
    const double c2 = riesz.harmonic_psi();
    const double u0 = c.u0;

    JumpDecomposition out;
    out.z = z;
    out.value = cand.value(z);
    out.value_from_representation =
        u0 * ((fs.phi(z) * A + fs.psi(z) * B) / omega + c1 * fs.phi(z) + c2 * fs.psi(z));
    out.right_dS = u0 * ((fs.phi_dS(z, Side::Right) * A + fs.psi_dS(z, Side::Right) * B) / omega +
                         c1 * fs.phi_dS(z, Side::Right) + c2 * fs.psi_dS(z, Side::Right));
    out.left_dS = u0 * ((fs.phi_dS(z, Side::Left) * (A - fs.psi(z) * sz) +
                         fs.psi_dS(z, Side::Left) * (B + fs.phi(z) * sz)) / omega +
                        c1 * fs.phi_dS(z, Side::Left) + c2 * fs.psi_dS(z, Side::Left));
    const double sprime = spec.scale_derivative(z);
    out.left_dx = out.left_dS * sprime;
    out.right_dx = out.right_dS * sprime;
    out.jump = out.left_dS - out.right_dS;
    out.sigma_atom = u0 * sz;
    out.speed_term = spec.speed_atom_at(z) * fs.alpha() * out.value;
    out.residual = out.jump - (out.sigma_atom - out.speed_term);
    out.s_differentiable = std::abs(out.jump) <= tolerance;
    return out;
}

struct ExcessivityRow {
    double x = 0.0;
    double beta = 0.0;
    double resolvent = 0.0;  // beta int G_{alpha+beta}(x, y) u(y) m(dy)
    double u = 0.0;
};

struct ExcessivityReport {
    double max_violation = 0.0;  // max of (resolvent - u) / max(1, u)
    bool monotone_in_beta = true;
    bool pass = false;
    std::vector<ExcessivityRow> rows;
};

/**
 * Resolvent check of alpha-excessivity: beta R_{alpha+beta} u <= u on the
 * grid for every beta, and beta R_{alpha+beta} u(x) nondecreasing along the
 * beta ladder. Tolerance is `tolerance * max(1, u(x))`.
 */
inline ExcessivityReport excessivity_check(const DiffusionSpec& spec, double alpha,
                                           const std::function<double(double)>& u, const std::vector<double>& grid,
                                           std::vector<double> betas, const std::vector<double>& kinks = {},
                                           double tolerance = 1e-6) {
    std::sort(betas.begin(), betas.end());
    for (double b : betas)
        if (!(b > 0.0)) throw std::invalid_argument("excessivity_check: betas must be positive");
    const auto& I = spec.interval();
    const double lo = I.left().position.to_double();
    const double hi = I.right().position.to_double();

    ExcessivityReport report;
    report.max_violation = -INFINITY;
    for (double x : grid) {
        if (!I.contains(x)) throw std::out_of_range("excessivity_check: grid point outside the state space");
        const double ux = u(x);
        const double scale = std::max(1.0, std::abs(ux));
        double previous = -INFINITY;
        for (double beta : betas) {
            const auto fs = fundamental(spec, alpha + beta);
            std::vector<double> cuts = kinks;
            for (const auto& a : spec.speed_atoms()) cuts.push_back(a.location);
            for (double k : {1.0, 4.0, 16.0}) {
                cuts.push_back(x - k / fs.theta());
                cuts.push_back(x + k / fs.theta());
            }
            QuadratureOptions opt;
            opt.relative_tolerance = 1e-11;
            opt.absolute_tolerance = 1e-13;
            const double phix = fs.phi(x);
            const double psix = fs.psi(x);
            auto below = [&](double y) { return fs.psi(y) * u(y) * spec.speed_density(y); };
            auto above = [&](double y) {
                const double p = fs.phi(y);
                return p == 0.0 ? 0.0 : p * u(y) * spec.speed_density(y);
            };
            double integral = phix * integrate(below, lo, x, cuts, opt).value +
                              psix * integrate(above, x, hi, cuts, opt).value;
            for (const auto& a : spec.speed_atoms())
                integral += (a.location <= x ? fs.psi(a.location) * phix : psix * fs.phi(a.location)) *
                            u(a.location) * a.weight;
            const double resolvent = beta * integral / fs.wronskian();
            report.rows.push_back({x, beta, resolvent, ux});
            report.max_violation = std::max(report.max_violation, (resolvent - ux) / scale);
            if (resolvent < previous - tolerance * scale) report.monotone_in_beta = false;
            previous = resolvent;
        }
    }
    report.pass = report.max_violation <= tolerance && report.monotone_in_beta;
    return report;
}

/// Serializes a measure: kind, x0, normalization, boundary masses, atoms and tail samples.
inline nlohmann::json measure_to_json(const RepresentingMeasure& m, int samples_per_side = 32) {
    using nlohmann::json;
    const auto& c = m.core();
    const auto& I = c.fs.spec().interval();
    json atoms = json::array();
    for (const auto& a : m.atoms()) atoms.push_back({{"location", a.location}, {"weight", a.weight}});
    std::vector<double> extra;
    for (const auto& a : c.atoms) extra.push_back(a.location);
    for (const auto& a : c.fs.spec().speed_atoms()) extra.push_back(a.location);
    auto sample = [&](auto&& right_fn, auto&& left_fn) {
        json right = json::array();
        json left = json::array();
        right.push_back({c.x0, right_fn(c.x0)});
        for (double x : detail::tail_sample_points(I, c.x0, +1.0, samples_per_side, extra)) {
            const double v = right_fn(x);
            if (std::isfinite(v)) right.push_back({x, v});
        }
        left.push_back({c.x0, left_fn(c.x0)});
        for (double x : detail::tail_sample_points(I, c.x0, -1.0, samples_per_side, extra)) {
            const double v = left_fn(x);
            if (std::isfinite(v)) left.push_back({x, v});
        }
        return json{{"right", right}, {"left", left}};
    };
    const json tails = sample([&m](double x) { return m.right_tail(x); }, [&m](double x) { return m.left_tail(x); });
    json j{{"kind", to_string(m.kind())},
           {"x0", c.x0},
           {"normalization", c.u0},
           {"alpha", c.fs.alpha()},
           {"diffusion", spec_to_json(c.fs.spec())},
           {"mass_left_boundary", c.mass_left},
           {"mass_right_boundary", c.mass_right},
           {"total_mass", c.total},
           {"atoms", atoms},
           {"tail_samples", tails}};
    if (m.kind() == MeasureKind::Riesz) {
        j["harmonic_coefficients"] = {{"phi", m.harmonic_phi()}, {"psi", m.harmonic_psi()}};
        j["martin_tail_samples"] =
            sample([&c](double x) { return c.right_tail(x); }, [&c](double x) { return c.left_tail(x); });
    }
    return j;
}

namespace detail {
inline std::function<double(double)> interpolant(const nlohmann::json& samples) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : samples) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    std::sort(pts.begin(), pts.end());
    return [pts](double x) {
        if (pts.empty()) return 0.0;
        if (x <= pts.front().first) return pts.front().second;
        if (x >= pts.back().first) return pts.back().second;
        auto it = std::lower_bound(pts.begin(), pts.end(), std::pair<double, double>(x, -INFINITY));
        const auto& [x1, y1] = *it;
        const auto& [xa, ya] = *(it - 1);
        return ya + (y1 - ya) * (x - xa) / (x1 - xa);
    };
}
}  // namespace detail

/**
 * Rebuilds a Martin measure from measure_to_json() output. Atoms and
 * boundary masses are restored exactly; the atom-free parts of the tails
 * become piecewise-linear interpolants of the samples. A Riesz document yields its Martin measure
 * followed by riesz_from_martin().
 */
inline RepresentingMeasure measure_from_json(const nlohmann::json& j, const FundamentalSolutions& fs) {
    auto core = std::make_shared<detail::MartinCore>(detail::MartinCore{.fs = fs});
    core->x0 = j.at("x0").get<double>();
    core->u0 = j.at("normalization").get<double>();
    core->mass_left = j.at("mass_left_boundary").get<double>();
    core->mass_right = j.at("mass_right_boundary").get<double>();
    core->total = j.at("total_mass").get<double>();
    const bool riesz = j.at("kind").get<std::string>() == "riesz";
    std::vector<Atom> atoms;
    for (const auto& a : j.at("atoms")) {
        double loc = a.at("location").get<double>();
        double w = a.at("weight").get<double>();
        if (riesz) w *= fs.green(core->x0, loc);
        atoms.push_back({loc, w});
    }
    core->atoms = atoms;
    // Riesz tail samples are sigma-masses, so Riesz documents also carry the Martin tails.
    if (riesz && !j.contains("martin_tail_samples"))
        throw std::invalid_argument("measure_from_json: Riesz document lacks martin_tail_samples");
    const auto& tails = j.at(riesz ? "martin_tail_samples" : "tail_samples");
    // Only the atom-free part is interpolated; atoms and boundary masses are added back exactly.
    const double mass_right = core->mass_right;
    const double mass_left = core->mass_left;
    auto atoms_above = [atoms](double x) {
        double w = 0.0;
        for (const auto& a : atoms)
            if (a.location > x) w += a.weight;
        return w;
    };
    auto atoms_below = [atoms](double x) {
        double w = 0.0;
        for (const auto& a : atoms)
            if (a.location < x) w += a.weight;
        return w;
    };
    nlohmann::json right_c = nlohmann::json::array();
    for (const auto& p : tails.at("right")) {
        const double x = p.at(0).get<double>();
        right_c.push_back({x, p.at(1).get<double>() - atoms_above(x) - mass_right});
    }
    nlohmann::json left_c = nlohmann::json::array();
    for (const auto& p : tails.at("left")) {
        const double x = p.at(0).get<double>();
        left_c.push_back({x, p.at(1).get<double>() - atoms_below(x) - mass_left});
    }
    core->right_tail = [f = detail::interpolant(right_c), atoms_above, mass_right](double x) {
        return f(x) + atoms_above(x) + mass_right;
    };
    core->left_tail = [f = detail::interpolant(left_c), atoms_below, mass_left](double x) {
        return f(x) + atoms_below(x) + mass_left;
    };
    for (const auto& a : atoms) core->breakpoints.push_back(a.location);
    core->breakpoints.push_back(core->x0);
    for (const auto& a : fs.spec().speed_atoms()) core->breakpoints.push_back(a.location);
    std::sort(core->breakpoints.begin(), core->breakpoints.end());

    RepresentingMeasure m;
    m.kind_ = MeasureKind::Martin;
    m.core_ = core;
    m.atoms_ = atoms;
    return riesz ? riesz_from_martin(m) : m;
}

}  // namespace diffstop
