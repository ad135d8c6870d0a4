// SPDX-License-Identifier: Apache-2.0

#ifndef DREMU_KERNELS_HPP
#define DREMU_KERNELS_HPP

#include "dremu/core.hpp"

#include <random>

namespace dremu {

/// Gaussian RBF kernel k(x, y) = exp(-|x - y|^2 / (2 sigma^2)).
class RbfKernel {
public:
    explicit RbfKernel(double bandwidth) : bandwidth_(bandwidth) {
        if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
            throw InvalidConfig("rbf kernel: bandwidth must be positive and finite");
    }

    [[nodiscard]] double bandwidth() const { return bandwidth_; }

    [[nodiscard]] double from_sq_distance(double sq) const {
        return std::exp(-sq / (2.0 * bandwidth_ * bandwidth_));
    }

    template <class A, class B>
    [[nodiscard]] double operator()(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
        return from_sq_distance((x - y).squaredNorm());
    }

private:
    double bandwidth_;
};

/// Squared-exponential correlation with one length scale per input:
/// c(x, x') = prod_i exp(-(x_i - x'_i)^2 / delta_i^2).
class ArdSqExpCorrelation {
public:
    explicit ArdSqExpCorrelation(Vector lengthscales) : lengthscales_(std::move(lengthscales)) {
        if (lengthscales_.size() == 0) throw InvalidConfig("ard correlation: no length scales");
        for (Eigen::Index i = 0; i < lengthscales_.size(); ++i)
            if (!(lengthscales_(i) > 0.0) || !std::isfinite(lengthscales_(i)))
                throw InvalidConfig("ard correlation: length scales must be positive and finite");
        inv_sq_ = lengthscales_.array().square().inverse();
    }

    [[nodiscard]] const Vector& lengthscales() const { return lengthscales_; }
    [[nodiscard]] Eigen::Index dim() const { return lengthscales_.size(); }

    template <class A, class B>
    [[nodiscard]] double operator()(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
        double s = 0.0;
        for (Eigen::Index i = 0; i < lengthscales_.size(); ++i) {
            const double diff = x(i) - y(i);
            s += diff * diff * inv_sq_(i);
        }
        return std::exp(-s);
    }

private:
    Vector lengthscales_;
    Vector inv_sq_;
};

/// Correlation with a nugget: on a point set its matrix is (1 - nu) C + nu I.
/// The indicator term is tied to sample identity, so cross-correlations
/// between two different point sets carry only the (1 - nu) C part.
class NuggetCorrelation {
public:
    NuggetCorrelation(ArdSqExpCorrelation base, double nugget) : base_(std::move(base)), nugget_(nugget) {
        if (!(nugget >= 0.0) || !(nugget < 1.0)) throw InvalidConfig("nugget must lie in [0, 1)");
    }

    [[nodiscard]] const ArdSqExpCorrelation& base() const { return base_; }
    [[nodiscard]] double nugget() const { return nugget_; }

    template <class A, class B>
    [[nodiscard]] double cross(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
        return (1.0 - nugget_) * base_(x, y);
    }

private:
    ArdSqExpCorrelation base_;
    double nugget_;
};

namespace detail {
template <class Kernel>
Matrix symmetric_gram(const Kernel& k, const Matrix& points) {
    require_finite(points, "gram_matrix");
    const Eigen::Index n = points.rows();
    if (n < 1) throw InvalidInput("gram_matrix: need at least one point");
    Matrix g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        g(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double v = k(points.row(i), points.row(j));
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}
}  // namespace detail

inline Matrix gram_matrix(const RbfKernel& k, const Matrix& points) { return detail::symmetric_gram(k, points); }

inline Matrix gram_matrix(const ArdSqExpCorrelation& c, const Matrix& points) {
    if (points.cols() != c.dim()) throw InvalidInput("gram_matrix: dimension mismatch with length scales");
    return detail::symmetric_gram(c, points);
}

inline Matrix gram_matrix(const NuggetCorrelation& c, const Matrix& points) {
    Matrix g = gram_matrix(c.base(), points);
    g *= (1.0 - c.nugget());
    g.diagonal().array() += c.nugget();
    return g;
}

/// Rectangular cross matrix K(i, j) = k(a_i, b_j).
template <class Kernel>
Matrix cross_matrix(const Kernel& k, const Matrix& a, const Matrix& b) {
    require_finite(a, "cross_matrix");
    require_finite(b, "cross_matrix");
    if (a.cols() != b.cols()) throw InvalidInput("cross_matrix: dimension mismatch");
    Matrix out(a.rows(), b.rows());
    for (Eigen::Index j = 0; j < b.rows(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) out(i, j) = k(a.row(i), b.row(j));
    return out;
}

/// Row i holds d k(centers_i, x) / dx = -(x - centers_i) / sigma^2 * k(centers_i, x).
inline Matrix rbf_gradient_rows(const RbfKernel& k, const Matrix& centers, const Vector& at) {
    require_finite(centers, "rbf_gradient_rows");
    require_finite(at, "rbf_gradient_rows");
    if (centers.cols() != at.size()) throw InvalidInput("rbf_gradient_rows: dimension mismatch");
    const double inv_sq = 1.0 / (k.bandwidth() * k.bandwidth());
    Matrix rows(centers.rows(), centers.cols());
    for (Eigen::Index i = 0; i < centers.rows(); ++i) {
        const Eigen::RowVectorXd diff = at.transpose() - centers.row(i);
        rows.row(i) = -inv_sq * k.from_sq_distance(diff.squaredNorm()) * diff;
    }
    return rows;
}

/// Median of all pairwise Euclidean distances. Above 2000 rows a fixed-seed
/// subsample of 2000 rows is used. If more than half of the pairs coincide the
/// median of the nonzero distances is returned so the result stays positive.
inline double median_pairwise_distance(const Matrix& points) {
    require_finite(points, "median_pairwise_distance");
    constexpr Eigen::Index kExactLimit = 2000;
    if (points.rows() < 2) throw InvalidInput("median_pairwise_distance: need at least two points");

    Matrix sample;
    const Matrix* used = &points;
    if (points.rows() > kExactLimit) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(points.rows()));
        for (Eigen::Index i = 0; i < points.rows(); ++i) idx[static_cast<std::size_t>(i)] = i;
        std::mt19937_64 rng(0x5eedULL);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(kExactLimit);
        std::sort(idx.begin(), idx.end());
        sample.resize(kExactLimit, points.cols());
        for (Eigen::Index i = 0; i < kExactLimit; ++i) sample.row(i) = points.row(idx[static_cast<std::size_t>(i)]);
        used = &sample;
    }

    const Eigen::Index n = used->rows();
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back((used->row(i) - used->row(j)).norm());

    auto median_of = [](std::vector<double>& v) {
        const std::size_t mid = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
        const double upper = v[mid];
        if (v.size() % 2 == 1) return upper;
        const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        return 0.5 * (lower + upper);
    };

    double med = median_of(dist);
    if (med > 0.0) return med;
    std::vector<double> positive;
    for (double d : dist)
        if (d > 0.0) positive.push_back(d);
    if (positive.empty()) throw DegenerateData("median_pairwise_distance: all points identical");
    return median_of(positive);
}

}  // namespace dremu

#endif  // DREMU_KERNELS_HPP
