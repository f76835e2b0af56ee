#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace diffstop {

/**
 * A real number that may also be +infinity or -infinity.
 *
 * Used for interval endpoints and boundary values of the scale function.
 * The infinite states are explicit; value() refuses to hand out an
 * infinite quantity so that it cannot leak into a formula silently.
 */
class ExtendedReal {
public:
    enum class State { Finite, PlusInfinity, MinusInfinity };

    constexpr ExtendedReal() = default;

    static constexpr ExtendedReal finite(double v) {
        if (v != v || v == INFINITY || v == -INFINITY)
            throw std::invalid_argument("ExtendedReal::finite: value must be a finite real");
        return ExtendedReal(State::Finite, v);
    }
    static constexpr ExtendedReal plus_infinity() { return ExtendedReal(State::PlusInfinity, 0.0); }
    static constexpr ExtendedReal minus_infinity() { return ExtendedReal(State::MinusInfinity, 0.0); }

    constexpr State state() const { return state_; }
    constexpr bool is_finite() const { return state_ == State::Finite; }
    constexpr bool is_plus_infinity() const { return state_ == State::PlusInfinity; }
    constexpr bool is_minus_infinity() const { return state_ == State::MinusInfinity; }

    double value() const {
        if (!is_finite()) throw std::logic_error("ExtendedReal: value() called on an infinite quantity");
        return value_;
    }

    /// Strict comparison against a finite real.
    constexpr bool less_than(double x) const {
        switch (state_) {
            case State::MinusInfinity: return true;
            case State::PlusInfinity: return false;
            default: return value_ < x;
        }
    }
    constexpr bool greater_than(double x) const {
        switch (state_) {
            case State::MinusInfinity: return false;
            case State::PlusInfinity: return true;
            default: return value_ > x;
        }
    }

    /// IEEE representation, for serialization and printing only.
    double to_double() const {
        switch (state_) {
            case State::MinusInfinity: return -INFINITY;
            case State::PlusInfinity: return INFINITY;
            default: return value_;
        }
    }

    std::string to_string() const {
        switch (state_) {
            case State::MinusInfinity: return "-inf";
            case State::PlusInfinity: return "+inf";
            default: return std::to_string(value_);
        }
    }

    friend constexpr bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
        return a.state_ == b.state_ && (a.state_ != State::Finite || a.value_ == b.value_);
    }

private:
    constexpr ExtendedReal(State s, double v) : state_(s), value_(v) {}

    State state_ = State::Finite;
    double value_ = 0.0;
};

}  // namespace diffstop
