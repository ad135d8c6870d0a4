// SPDX-License-Identifier: Apache-2.0

#ifndef DREMU_DESIGN_HPP
#define DREMU_DESIGN_HPP

#include "dremu/core.hpp"

#include <cstdint>
#include <numeric>
#include <random>

namespace dremu {

struct BoxDesignSpec {
    std::vector<std::pair<double, double>> bounds;
    Eigen::Index size = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (bounds.empty()) throw InvalidConfig("design: no dimensions");
        if (size < 1) throw InvalidConfig("design: size must be at least 1");
        for (const auto& [lo, hi] : bounds)
            if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
                throw InvalidConfig("design: each bound needs lo < hi");
    }
};

/// Latin hypercube: in every dimension each of the n equal-width strata holds
/// exactly one point, placed uniformly at random within its stratum.
inline Matrix latin_hypercube(const BoxDesignSpec& spec) {
    spec.validate();
    const Eigen::Index n = spec.size;
    const auto d = static_cast<Eigen::Index>(spec.bounds.size());
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix out(n, d);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto [lo, hi] = spec.bounds[static_cast<std::size_t>(j)];
        const double width = (hi - lo) / static_cast<double>(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = unit(rng);
            const double v = lo + (static_cast<double>(perm[static_cast<std::size_t>(i)]) + u) * width;
            out(i, j) = std::min(v, std::nextafter(hi, lo));
        }
    }
    return out;
}

/// i.i.d. standard normal n x m matrix, filled row by row.
inline Matrix gaussian_sample(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
    if (n < 1 || m < 1) throw InvalidConfig("gaussian_sample: n and m must be at least 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) out(i, j) = normal(rng);
    return out;
}

/// Draws complement coordinates for lifting: returns an n x m matrix whose
/// component outside span(basis) is kept.
using ComplementSampler = std::function<Matrix(Eigen::Index n, Eigen::Index m)>;

inline ComplementSampler standard_normal_complement(std::uint64_t seed) {
    return [seed](Eigen::Index n, Eigen::Index m) { return gaussian_sample(n, m, seed); };
}

/// Lifts reduced design points z to full inputs x = B z + (I - B B^T) xi, so
/// that B^T x = z exactly for orthonormal B.
inline Matrix preimage_design(const Matrix& reduced_points, const Matrix& basis, const ComplementSampler& sampler) {
    if (reduced_points.cols() != basis.cols())
        throw InvalidInput("preimage_design: reduced points have " + std::to_string(reduced_points.cols()) +
                           " columns, basis has " + std::to_string(basis.cols()));
    if (orthonormality_error(basis) > 1e-8) throw InvalidInput("preimage_design: basis is not orthonormal");
    const Eigen::Index n = reduced_points.rows();
    const Eigen::Index m = basis.rows();
    Matrix xi = sampler(n, m);
    if (xi.rows() != n || xi.cols() != m) throw InvalidInput("preimage_design: sampler returned wrong shape");
    xi -= (xi * basis) * basis.transpose();
    xi.noalias() += reduced_points * basis.transpose();
    return xi;
}

/// Box around projected data with each range expanded by `expand` (half on each side).
inline std::vector<std::pair<double, double>> padded_box(const Matrix& points, double expand = 0.1) {
    const double pad = 0.5 * expand;
    std::vector<std::pair<double, double>> out;
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        const double lo = points.col(j).minCoeff();
        const double hi = points.col(j).maxCoeff();
        double r = hi - lo;
        if (!(r > 0.0)) r = 1.0;
        out.emplace_back(lo - pad * r, hi + pad * r);
    }
    return out;
}

}  // namespace dremu

#endif  // DREMU_DESIGN_HPP
