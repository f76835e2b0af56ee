#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>

#include "diffstop/diffusion.hpp"
#include "diffstop/side.hpp"

namespace diffstop {

/**
 * Fundamental solutions psi (increasing) and phi (decreasing) of Gu = alpha u
 * for one of the supported families, with analytic one-sided derivatives.
 *
 * Derivatives come in two flavours: d/dx (suffix _dx) and d/dS (suffix _dS),
 * related by d/dS = (d/dx) / S'(x). At a sticky point z the one-sided
 * S-derivatives differ by m({z}) alpha u(z).
 *
 * Evaluation is allowed on the closure of the state interval so that e.g.
 * phi(1) = 0 at a killing endpoint.
 */
class FundamentalSolutions {
public:
    const DiffusionSpec& spec() const { return spec_; }
    double alpha() const { return alpha_; }
    /// sqrt(2 alpha + mu^2).
    double theta() const { return theta_; }
    /// c alpha / theta for the sticky family, zero otherwise.
    double gamma() const { return gamma_; }
    /// psi^+ phi - psi phi^+ (scale derivatives); constant in x.
    double wronskian() const { return omega_; }

    double psi(double x) const {
        check_domain(x, "psi");
        switch (kind_) {
            case Kind::Sticky:
                if (x <= 0.0) return std::exp(a_ * x);
                return (1.0 + gamma_) * std::exp(a_ * x) - gamma_ * std::exp(-b_ * x);
            case Kind::ReflectedKilled: return std::cosh(theta_ * x);
            case Kind::ZeroDrift: return std::exp(kappa_ * x) / kappa_;
        }
        return 0.0;
    }

    double phi(double x) const {
        check_domain(x, "phi");
        switch (kind_) {
            case Kind::Sticky:
                if (x >= 0.0) return std::exp(-b_ * x);
                return (1.0 + gamma_) * std::exp(-b_ * x) - gamma_ * std::exp(a_ * x);
            case Kind::ReflectedKilled: return std::sinh(theta_ * (1.0 - x));
            case Kind::ZeroDrift: return 1.0;
        }
        return 0.0;
    }

    double psi_dx(double x, Side side) const {
        check_domain(x, "psi_dx");
        switch (kind_) {
            case Kind::Sticky:
                if (x < 0.0 || (x == 0.0 && side == Side::Left)) return a_ * std::exp(a_ * x);
                return (1.0 + gamma_) * a_ * std::exp(a_ * x) + gamma_ * b_ * std::exp(-b_ * x);
            case Kind::ReflectedKilled: return theta_ * std::sinh(theta_ * x);
            case Kind::ZeroDrift: return std::exp(kappa_ * x);
        }
        return 0.0;
    }

    double phi_dx(double x, Side side) const {
        check_domain(x, "phi_dx");
        switch (kind_) {
            case Kind::Sticky:
                if (x > 0.0 || (x == 0.0 && side == Side::Right)) return -b_ * std::exp(-b_ * x);
                return -(1.0 + gamma_) * b_ * std::exp(-b_ * x) - gamma_ * a_ * std::exp(a_ * x);
            case Kind::ReflectedKilled: return -theta_ * std::cosh(theta_ * (1.0 - x));
            case Kind::ZeroDrift: return 0.0;
        }
        return 0.0;
    }

    double psi_dS(double x, Side side) const { return psi_dx(x, side) / spec_.scale_derivative(x); }
    double phi_dS(double x, Side side) const { return phi_dx(x, side) / spec_.scale_derivative(x); }

    /// G(x, y) = psi(min) phi(max) / omega.
    double green(double x, double y) const {
        if (!spec_.interval().contains(x) || !spec_.interval().contains(y))
            throw std::out_of_range("green: arguments outside the state space");
        return x <= y ? psi(x) * phi(y) / omega_ : psi(y) * phi(x) / omega_;
    }

    /// E_x exp(-alpha tau_y).
    double hitting_laplace(double x, double y) const {
        if (!spec_.interval().contains(x) || !spec_.interval().contains(y))
            throw std::out_of_range("hitting_laplace: arguments outside the state space");
        if (x == y) return 1.0;
        return x < y ? psi(x) / psi(y) : phi(x) / phi(y);
    }

private:
    enum class Kind { Sticky, ReflectedKilled, ZeroDrift };

    FundamentalSolutions(const DiffusionSpec& spec, double alpha) : spec_(spec), alpha_(alpha) {}

    void check_domain(double x, const char* what) const {
        if (!spec_.interval().in_closure(x))
            throw std::out_of_range(std::string(what) + ": argument outside the state interval");
    }

    DiffusionSpec spec_;
    Kind kind_ = Kind::Sticky;
    double alpha_ = 0.0;
    double theta_ = 0.0;
    double gamma_ = 0.0;
    double omega_ = 0.0;
    double a_ = 0.0;      // theta - mu
    double b_ = 0.0;      // theta + mu
    double kappa_ = 0.0;  // 2|mu| for alpha = 0

    friend FundamentalSolutions fundamental(const DiffusionSpec&, double);
    friend FundamentalSolutions fundamental_zero(const DiffusionSpec&);
};

/// psi_alpha, phi_alpha and the Wronskian for alpha > 0.
inline FundamentalSolutions fundamental(const DiffusionSpec& spec, double alpha) {
    if (!std::isfinite(alpha) || !(alpha > 0.0)) throw std::invalid_argument("fundamental: alpha must be > 0");
    FundamentalSolutions fs(spec, alpha);
    if (std::holds_alternative<ReflectedKilledBM>(spec.family())) {
        fs.kind_ = FundamentalSolutions::Kind::ReflectedKilled;
        fs.theta_ = std::sqrt(2.0 * alpha);
        fs.omega_ = fs.theta_ * std::cosh(fs.theta_);
        return fs;
    }
    // Sticky family; the drift family is the same formulas with gamma = 0.
    const double mu = spec.drift();
    fs.kind_ = FundamentalSolutions::Kind::Sticky;
    fs.theta_ = std::sqrt(2.0 * alpha + mu * mu);
    fs.gamma_ = spec.stickiness() * alpha / fs.theta_;
    fs.a_ = fs.theta_ - mu;
    fs.b_ = fs.theta_ + mu;
    fs.omega_ = 2.0 * fs.theta_ * (1.0 + fs.gamma_);
    return fs;
}

/**
 * The alpha = 0 objects of a transient diffusion drifting to -infinity:
 * psi_0 = S - S(-inf) = e^{2|mu| x} / (2|mu|) and phi_0 = 1, so omega_0 = 1.
 *
 * Only the scale function enters, so sticky and plain Brownian motion with
 * the same drift share these objects. Recurrent cases (mu = 0) and the
 * reflected-killed family are rejected.
 */
inline FundamentalSolutions fundamental_zero(const DiffusionSpec& spec) {
    if (std::holds_alternative<ReflectedKilledBM>(spec.family()))
        throw std::invalid_argument("fundamental_zero: unsupported family reflected_killed_bm");
    const double mu = spec.drift();
    if (!(mu < 0.0))
        throw std::invalid_argument("fundamental_zero: recurrent diffusion (mu = 0) has no nonconstant 0-excessive functions");
    FundamentalSolutions fs(spec, 0.0);
    fs.kind_ = FundamentalSolutions::Kind::ZeroDrift;
    fs.kappa_ = -2.0 * mu;
    fs.theta_ = -mu;
    fs.omega_ = 1.0;
    return fs;
}

}  // namespace diffstop
