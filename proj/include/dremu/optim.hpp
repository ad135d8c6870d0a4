// SPDX-License-Identifier: Apache-2.0
//
// Box-constrained quasi-Newton minimizer (projected L-BFGS with Armijo
// backtracking along the projected path). Used for GP hyperparameters.

#ifndef DREMU_OPTIM_HPP
#define DREMU_OPTIM_HPP

#include "dremu/core.hpp"

#include <deque>
#include <limits>

namespace dremu {

struct BoxMinimizerOptions {
    int max_iterations = 200;
    int history = 10;
    double gradient_tolerance = 1e-6;
    double relative_tolerance = 1e-10;
};

struct MinimizeResult {
    Vector x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
};

/// `objective(x, grad)` returns f(x) and writes the gradient into grad.
/// Non-finite values are treated as +inf and rejected by the line search.
template <class Objective>
MinimizeResult minimize_box(Objective&& objective, Vector x0, const Vector& lower, const Vector& upper,
                            const BoxMinimizerOptions& opt = {}) {
    const Eigen::Index n = x0.size();
    auto clamp = [&](const Vector& v) { return Vector(v.cwiseMax(lower).cwiseMin(upper)); };

    MinimizeResult res;
    Vector x = clamp(x0);
    Vector g(n);
    double f = objective(x, g);
    ++res.evaluations;
    if (!std::isfinite(f)) {
        res.x = x;
        return res;
    }

    std::deque<std::pair<Vector, Vector>> memory;
    int stalls = 0;
    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it + 1;
        Vector pg = g;
        for (Eigen::Index i = 0; i < n; ++i)
            if ((x(i) <= lower(i) && g(i) > 0.0) || (x(i) >= upper(i) && g(i) < 0.0)) pg(i) = 0.0;
        if (pg.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance * (1.0 + std::abs(f))) break;

        // Two-loop recursion on the free variables.
        Vector q = pg;
        std::vector<double> alpha(memory.size());
        for (std::size_t k = memory.size(); k-- > 0;) {
            const auto& [s, y] = memory[k];
            alpha[k] = s.dot(q) / y.dot(s);
            q -= alpha[k] * y;
        }
        if (!memory.empty()) {
            const auto& [s, y] = memory.back();
            q *= s.dot(y) / y.dot(y);
        } else {
            q /= std::max(1.0, pg.norm());
        }
        for (std::size_t k = 0; k < memory.size(); ++k) {
            const auto& [s, y] = memory[k];
            const double beta = y.dot(q) / y.dot(s);
            q += (alpha[k] - beta) * s;
        }
        Vector dir = -q;
        for (Eigen::Index i = 0; i < n; ++i)
            if (pg(i) == 0.0) dir(i) = 0.0;
        if (dir.dot(g) >= 0.0) {
            memory.clear();
            dir = -pg / std::max(1.0, pg.norm());
        }

        double step = 1.0;
        bool accepted = false;
        Vector x_new(n), g_new(n);
        double f_new = f;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = clamp(x + step * dir);
            f_new = objective(x_new, g_new);
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(x_new - x)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (memory.empty()) break;
            memory.clear();
            continue;
        }

        const Vector s = x_new - x;
        const Vector y = g_new - g;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            memory.emplace_back(s, y);
            if (static_cast<int>(memory.size()) > opt.history) memory.pop_front();
        }
        const double change = f - f_new;
        x = x_new;
        g = g_new;
        f = f_new;
        if (change <= opt.relative_tolerance * (1.0 + std::abs(f))) {
            if (++stalls >= 3) break;
        } else {
            stalls = 0;
        }
    }
    res.x = x;
    res.value = f;
    return res;
}

}  // namespace dremu

#endif  // DREMU_OPTIM_HPP
