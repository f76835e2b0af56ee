#pragma once

#include <stdexcept>
#include <string>

namespace diffstop {

/// Requested diffusion is not regular (e.g. it has an absorbing point in its state space).
class NonRegularDiffusion : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Adaptive quadrature stopped before reaching the requested tolerance.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double achieved_error)
        : std::runtime_error(what), achieved_error_(achieved_error) {}
    double achieved_error() const { return achieved_error_; }

private:
    double achieved_error_;
};

/// One-sided difference quotients did not settle.
class DerivativeNotConverged : public std::runtime_error {
public:
    DerivativeNotConverged(const std::string& what, double last_estimate)
        : std::runtime_error(what), last_estimate_(last_estimate) {}
    double last_estimate() const { return last_estimate_; }

private:
    double last_estimate_;
};

/// The tails of a Martin representing measure are not monotone, so the
/// candidate function is not alpha-excessive.
class NotExcessive : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An iterative solver ran out of iterations.
class NotConverged : public std::runtime_error {
public:
    NotConverged(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

}  // namespace diffstop
