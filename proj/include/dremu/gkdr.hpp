// SPDX-License-Identifier: Apache-2.0
//
// Gradient-based kernel dimension reduction.
//
// Given samples (X_i, Y_i) the estimator averages, over the samples, the
// outer product of the kernel-regression gradient of E[g(Y) | X = x]:
//
//   M = 1/n sum_i grad_k(X_i)^T (G_X + n eps I)^-1 G_Y (G_X + n eps I)^-1 grad_k(X_i)
//
// where grad_k(x) is the n x m matrix whose row j is d k_X(X_j, x) / dx. The
// leading eigenvectors of M span the estimated sufficient subspace.

#ifndef DREMU_GKDR_HPP
#define DREMU_GKDR_HPP

#include "dremu/core.hpp"
#include "dremu/kernels.hpp"

#include <numeric>

namespace dremu {

struct GkdrConfig {
    double c1 = 1.0;    // input bandwidth = c1 * median pairwise distance of X
    double c2 = 1.0;    // response bandwidth = c2 * median pairwise distance of Y
    double eps = 1e-5;  // regularization eps_n
    Eigen::Index d = 1;
    bool standardize = false;  // center and scale each input column first

    void validate(Eigen::Index m) const {
        if (!(c1 > 0.0) || !std::isfinite(c1)) throw InvalidConfig("gkdr: c1 must be positive");
        if (!(c2 > 0.0) || !std::isfinite(c2)) throw InvalidConfig("gkdr: c2 must be positive");
        if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidConfig("gkdr: eps must be positive");
        if (d < 1 || d > m)
            throw InvalidConfig("gkdr: d must lie in [1, " + std::to_string(m) + "], got " + std::to_string(d));
    }
};

/// Output of every subspace estimator. `directions` holds all m eigen-directions
/// sorted by descending eigenvalue; `basis` is the leading d of them.
struct ProjectionResult {
    std::string method;
    Matrix basis;       // m x d, orthonormal columns
    Matrix directions;  // m x m
    Vector eigenvalues;  // descending, length m
    double matrix_trace = 0.0;

    [[nodiscard]] Eigen::Index input_dim() const { return basis.rows(); }
    [[nodiscard]] Eigen::Index dim() const { return basis.cols(); }

    /// Same estimate keeping the leading `d` directions.
    [[nodiscard]] ProjectionResult truncated(Eigen::Index d) const {
        if (d < 1 || d > directions.cols())
            throw InvalidConfig("projection: d must lie in [1, " + std::to_string(directions.cols()) + "]");
        ProjectionResult out = *this;
        out.basis = directions.leftCols(d);
        return out;
    }

    [[nodiscard]] Matrix project(const Matrix& inputs) const {
        if (inputs.cols() != basis.rows()) throw InvalidInput("projection: input dimension mismatch");
        return inputs * basis;
    }
};

/// Builds a ProjectionResult from a symmetric PSD kernel matrix.
inline ProjectionResult projection_from_matrix(const Matrix& kernel_matrix, Eigen::Index d, std::string method) {
    const SortedEigen eig = sorted_eigen(kernel_matrix);
    ProjectionResult out;
    out.method = std::move(method);
    out.directions = eig.vectors;
    out.eigenvalues = eig.values;
    out.matrix_trace = kernel_matrix.trace();
    out.basis = out.directions.leftCols(d);
    return out;
}

/// Share of the spectrum captured by the leading d eigenvalues.
inline double eigenvalue_ratio(const ProjectionResult& result, Eigen::Index d) {
    const Eigen::Index m = result.eigenvalues.size();
    if (d < 1 || d > m) throw InvalidConfig("eigenvalue_ratio: d must lie in [1, " + std::to_string(m) + "]");
    const Vector clipped = result.eigenvalues.cwiseMax(0.0);
    const double total = clipped.sum();
    if (!(total > 0.0)) throw DegenerateData("eigenvalue_ratio: zero trace");
    return std::clamp(clipped.head(d).sum() / total, 0.0, 1.0);
}

/// Resolved kernel bandwidths for a dataset under a config.
struct GkdrBandwidths {
    double input = 1.0;
    double response = 1.0;
};

inline GkdrBandwidths resolve_bandwidths(const Matrix& inputs, const Matrix& responses, const GkdrConfig& config) {
    GkdrBandwidths bw;
    bw.input = config.c1 * median_pairwise_distance(inputs);
    try {
        bw.response = config.c2 * median_pairwise_distance(responses);
    } catch (const DegenerateData&) {
        warn("gkdr: all responses identical; estimator carries no information");
        bw.response = config.c2;
    }
    return bw;
}

namespace detail {

inline Matrix standardized_columns(const Matrix& x) {
    Matrix z = x.rowwise() - x.colwise().mean();
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, z.rows() - 1)));
        if (sd > 0.0) z.col(j) /= sd;
    }
    return z;
}

}  // namespace detail

/// The m x m gKDR matrix with explicit bandwidths.
///
/// (G_X + n eps I)^-1 G_Y (G_X + n eps I)^-1 is applied in factored form: the
/// response Gram is split as U U^T by pivoted Cholesky, so each sample
/// contributes (Phi^T D_i)^T (Phi^T D_i) with Phi = (G_X + n eps I)^-1 U.
/// Accumulation is done over fixed blocks of samples and summed in block
/// order, so the result does not depend on the thread count.
namespace detail {
/// Low-rank factor L (n x r) with L L^T = A up to a residual whose largest
/// diagonal entry is at most tol * max(diag A). A must be symmetric PSD.
inline Matrix pivoted_cholesky(const Matrix& a, double tol) {
    const Eigen::Index n = a.rows();
    Vector resid = a.diagonal();
    const double stop = tol * std::max(resid.maxCoeff(), 0.0);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    Matrix l = Matrix::Zero(n, std::min<Eigen::Index>(n, 16));
    Eigen::Index r = 0;
    while (r < n) {
        Eigen::Index piv = r;
        for (Eigen::Index k = r + 1; k < n; ++k)
            if (resid(perm[static_cast<std::size_t>(k)]) > resid(perm[static_cast<std::size_t>(piv)])) piv = k;
        std::swap(perm[static_cast<std::size_t>(r)], perm[static_cast<std::size_t>(piv)]);
        const Eigen::Index p = perm[static_cast<std::size_t>(r)];
        const double d = resid(p);
        if (!(d > stop)) break;
        if (r == l.cols()) l.conservativeResize(n, std::min<Eigen::Index>(n, 2 * l.cols()));
        l.col(r).setZero();
        const double root = std::sqrt(d);
        l(p, r) = root;
        for (Eigen::Index k = r + 1; k < n; ++k) {
            const Eigen::Index j = perm[static_cast<std::size_t>(k)];
            const double v = (a(j, p) - l.row(j).head(r).dot(l.row(p).head(r))) / root;
            l(j, r) = v;
            resid(j) -= v * v;
        }
        resid(p) = 0.0;
        ++r;
    }
    return l.leftCols(r);
}
}  // namespace detail

inline Matrix gkdr_matrix(const Matrix& inputs, const Matrix& responses, const GkdrBandwidths& bw, double eps) {
    require_finite(inputs, "gkdr_matrix");
    require_finite(responses, "gkdr_matrix");
    const Eigen::Index n = inputs.rows();
    const Eigen::Index m = inputs.cols();
    if (n < 2) throw InvalidInput("gkdr_matrix: need at least two samples");
    if (responses.rows() != n) throw InvalidInput("gkdr_matrix: response row count mismatch");

    const RbfKernel kx(bw.input);
    const RbfKernel ky(bw.response);
    const Matrix gx = gram_matrix(kx, inputs);
    const Matrix gy = gram_matrix(ky, responses);

    Matrix reg = gx;
    reg.diagonal().array() += static_cast<double>(n) * eps;
    const Eigen::LLT<Matrix> chol(reg);
    if (chol.info() != Eigen::Success) throw NumericalError("gkdr_matrix: regularized input Gram is not positive definite");

    const Matrix root = detail::pivoted_cholesky(gy, 1e-14);
    // Phi^T as r x n.
    const Matrix phi_t = chol.solve(root).transpose();

    constexpr Eigen::Index kBlock = 32;
    const Eigen::Index blocks = (n + kBlock - 1) / kBlock;
    std::vector<Matrix> partial(static_cast<std::size_t>(blocks), Matrix::Zero(m, m));
    const double inv_sq = 1.0 / (bw.input * bw.input);
    parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
        Matrix& acc = partial[b];
        Matrix grad(n, m);
        const Eigen::Index begin = static_cast<Eigen::Index>(b) * kBlock;
        const Eigen::Index end = std::min(n, begin + kBlock);
        for (Eigen::Index i = begin; i < end; ++i) {
            // Row j: d k(X_j, x)/dx at x = X_i = (X_j - X_i) / sigma^2 * G(j, i).
            grad = (inputs.rowwise() - inputs.row(i)).array().colwise() * (gx.col(i).array() * inv_sq);
            const Matrix proj = phi_t * grad;
            acc.noalias() += proj.transpose() * proj;
        }
    });
    Matrix total = Matrix::Zero(m, m);
    for (const Matrix& p : partial) total += p;
    total /= static_cast<double>(n);
    return 0.5 * (total + total.transpose());
}

/// The gKDR matrix with bandwidths from the median heuristic.
inline Matrix gkdr_matrix(const Dataset& data, const GkdrConfig& config) {
    data.validate();
    config.validate(data.input_dim());
    const Matrix x = config.standardize ? detail::standardized_columns(data.inputs) : data.inputs;
    return gkdr_matrix(x, data.responses, resolve_bandwidths(x, data.responses, config), config.eps);
}

/// Leading-d eigenvectors of the gKDR matrix. When inputs are standardized
/// the directions are mapped back to the original coordinates and
/// re-orthonormalized.
inline ProjectionResult estimate_projection(const Dataset& data, const GkdrConfig& config) {
    config.validate(data.input_dim());
    ProjectionResult out = projection_from_matrix(gkdr_matrix(data, config), config.d, "gkdr");
    if (config.standardize) {
        Vector scale(data.input_dim());
        const Matrix centered = data.inputs.rowwise() - data.inputs.colwise().mean();
        for (Eigen::Index j = 0; j < scale.size(); ++j) {
            const double sd = std::sqrt(centered.col(j).squaredNorm() /
                                        static_cast<double>(std::max<Eigen::Index>(1, data.size() - 1)));
            scale(j) = sd > 0.0 ? sd : 1.0;
        }
        // A direction w on standardized z = x / s is w / s on x.
        Matrix mapped = scale.cwiseInverse().asDiagonal() * out.directions;
        Eigen::HouseholderQR<Matrix> qr(mapped);
        Matrix q = qr.householderQ() * Matrix::Identity(mapped.rows(), mapped.cols());
        canonicalize_signs(q);
        out.directions = q;
        out.basis = q.leftCols(config.d);
    }
    return out;
}

}  // namespace dremu

#endif  // DREMU_GKDR_HPP
