#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <vector>

#include "diffstop/errors.hpp"
#include "diffstop/side.hpp"

namespace diffstop {

struct DerivativeOptions {
    /// Initial step is initial_step_factor * (1 + |z|).
    double initial_step_factor = 1e-2;
    /// Three successive estimates must agree to this relative tolerance.
    double tolerance = 1e-9;
    int max_halvings = 40;
    /// Columns of the Richardson tableau.
    int max_order = 5;
};

/**
 * One-sided F-derivative of u at z:
 *
 *   right: lim (u(z+d) - u(z)) / (F(z+d) - F(z)),
 *   left:  lim (u(z-d) - u(z)) / (F(z-d) - F(z)),   d -> 0+.
 *
 * Steps d_k = 2^-k d_0 with Richardson extrapolation of the quotients; the
 * result is accepted once three successive extrapolated values agree.
 * Throws DerivativeNotConverged when they never do, and std::domain_error
 * when F fails to be strictly increasing on the sampled steps.
 */
template <class U, class Fn>
double f_derivative(U&& u, Fn&& F, double z, Side side, const DerivativeOptions& opt = {}) {
    const double sign = side == Side::Right ? 1.0 : -1.0;
    const double uz = u(z);
    const double Fz = F(z);
    double step = opt.initial_step_factor * (1.0 + std::abs(z));

    std::vector<std::vector<double>> table;
    std::vector<double> estimates;
    for (int k = 0; k <= opt.max_halvings; ++k, step *= 0.5) {
        const double zs = z + sign * step;
        const double dF = F(zs) - Fz;
        if (!(sign * dF > 0.0)) {
            std::ostringstream msg;
            msg << "f_derivative: F is not strictly increasing near " << z;
            throw std::domain_error(msg.str());
        }
        std::vector<double> row{(u(zs) - uz) / dF};
        const int cols = std::min<int>(k, opt.max_order);
        double factor = 1.0;
        for (int j = 1; j <= cols; ++j) {
            factor *= 2.0;
            row.push_back(row[j - 1] + (row[j - 1] - table[k - 1][j - 1]) / (factor - 1.0));
        }
        table.push_back(row);
        estimates.push_back(row.back());

        const std::size_t n = estimates.size();
        if (n >= 3) {
            const double e0 = estimates[n - 1];
            const double scale = std::max(1.0, std::abs(e0));
            if (std::abs(e0 - estimates[n - 2]) <= opt.tolerance * scale &&
                std::abs(estimates[n - 2] - estimates[n - 3]) <= opt.tolerance * scale)
                return e0;
        }
    }
    std::ostringstream msg;
    msg << "f_derivative: quotients at " << z << " did not converge";
    throw DerivativeNotConverged(msg.str(), estimates.back());
}

}  // namespace diffstop
