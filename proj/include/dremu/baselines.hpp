// SPDX-License-Identifier: Apache-2.0
//
// Classical subspace estimators: sliced inverse regression (SIR), its
// second-moment variant SIR-II, sliced average variance estimation (SAVE),
// and active subspaces from gradient samples.

#ifndef DREMU_BASELINES_HPP
#define DREMU_BASELINES_HPP

#include "dremu/core.hpp"
#include "dremu/gkdr.hpp"

#include <numeric>

namespace dremu {

/// Equal-frequency slicing of the sorted responses.
struct SliceSpec {
    int num_slices = 10;

    void validate(Eigen::Index n) const {
        if (num_slices < 2) throw InvalidConfig("slices: need at least 2 slices");
        if (n < 2 * static_cast<Eigen::Index>(num_slices))
            throw InvalidInput("slices: need at least 2 samples per slice (n = " + std::to_string(n) + ", H = " +
                               std::to_string(num_slices) + ")");
    }
};

/// Slice labels in [0, H) for each sample. Ties keep sample order.
inline std::vector<int> assign_slices(const Vector& y, const SliceSpec& spec) {
    const Eigen::Index n = y.size();
    spec.validate(n);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return y(a) < y(b); });
    std::vector<int> label(static_cast<std::size_t>(n));
    const Eigen::Index h = spec.num_slices;
    for (Eigen::Index r = 0; r < n; ++r) label[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] =
        static_cast<int>((r * h) / n);
    return label;
}

namespace detail {

/// Whitening of X: z = (x - mean) S^{-1/2}. `inv_root` maps directions found
/// on z back to x (a direction eta on z is S^{-1/2} eta on x).
struct Whitening {
    Matrix z;
    Matrix inv_root;
};

inline Whitening whiten(const Matrix& x) {
    const Eigen::Index n = x.rows();
    const Eigen::Index m = x.cols();
    const Matrix centered = x.rowwise() - x.colwise().mean();
    Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const double trace = cov.trace();
    if (eig.eigenvalues().minCoeff() <= 1e-12 * std::max(trace, 1e-300)) {
        warn("sliced estimator: input covariance is singular; adding a small ridge");
        cov.diagonal().array() += 1e-10 * trace / static_cast<double>(m);
        eig.compute(cov);
    }
    const Matrix inv_root = eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                            eig.eigenvectors().transpose();
    return {centered * inv_root, inv_root};
}

/// Directions found on whitened inputs mapped back to x and orthonormalized
/// in eigenvalue order.
inline ProjectionResult back_transform(const Matrix& kernel, const Matrix& inv_root, Eigen::Index d,
                                       std::string method) {
    ProjectionResult res = projection_from_matrix(kernel, d, std::move(method));
    const Matrix mapped = inv_root * res.directions;
    Eigen::HouseholderQR<Matrix> qr(mapped);
    Matrix q = qr.householderQ() * Matrix::Identity(mapped.rows(), mapped.cols());
    canonicalize_signs(q);
    res.directions = q;
    res.basis = q.leftCols(d);
    return res;
}

struct SliceMoments {
    std::vector<double> weight;
    std::vector<Vector> mean;
    std::vector<Matrix> cov;
};

inline SliceMoments slice_moments(const Matrix& z, const std::vector<int>& label, int h) {
    const Eigen::Index m = z.cols();
    SliceMoments out;
    out.weight.assign(static_cast<std::size_t>(h), 0.0);
    out.mean.assign(static_cast<std::size_t>(h), Vector::Zero(m));
    out.cov.assign(static_cast<std::size_t>(h), Matrix::Zero(m, m));
    std::vector<Eigen::Index> count(static_cast<std::size_t>(h), 0);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const auto s = static_cast<std::size_t>(label[static_cast<std::size_t>(i)]);
        out.mean[s] += z.row(i).transpose();
        ++count[s];
    }
    for (std::size_t s = 0; s < count.size(); ++s) out.mean[s] /= static_cast<double>(count[s]);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const auto s = static_cast<std::size_t>(label[static_cast<std::size_t>(i)]);
        const Vector dev = z.row(i).transpose() - out.mean[s];
        out.cov[s].noalias() += dev * dev.transpose();
    }
    for (std::size_t s = 0; s < count.size(); ++s) {
        out.cov[s] /= static_cast<double>(std::max<Eigen::Index>(1, count[s] - 1));
        out.weight[s] = static_cast<double>(count[s]) / static_cast<double>(z.rows());
    }
    return out;
}

inline void check_sliced_inputs(const Dataset& data, const SliceSpec& slices, Eigen::Index d) {
    data.validate();
    if (!data.scalar_response()) throw InvalidInput("sliced estimators need a scalar response");
    slices.validate(data.size());
    if (d < 1 || d > data.input_dim())
        throw InvalidConfig("d must lie in [1, " + std::to_string(data.input_dim()) + "]");
}

}  // namespace detail

/// Sliced inverse regression: eigenvectors of the weighted covariance of slice means.
inline ProjectionResult sir(const Dataset& data, const SliceSpec& slices, Eigen::Index d) {
    detail::check_sliced_inputs(data, slices, d);
    const auto w = detail::whiten(data.inputs);
    const auto mom = detail::slice_moments(w.z, assign_slices(data.response(), slices), slices.num_slices);
    const Eigen::Index m = data.input_dim();
    Matrix kernel = Matrix::Zero(m, m);
    for (std::size_t s = 0; s < mom.weight.size(); ++s)
        kernel.noalias() += mom.weight[s] * mom.mean[s] * mom.mean[s].transpose();
    return detail::back_transform(kernel, w.inv_root, d, "sir");
}

/// SIR-II: weighted average of (Cov(Z | slice) - average slice covariance)^2.
inline ProjectionResult sir2(const Dataset& data, const SliceSpec& slices, Eigen::Index d) {
    detail::check_sliced_inputs(data, slices, d);
    const auto w = detail::whiten(data.inputs);
    const auto mom = detail::slice_moments(w.z, assign_slices(data.response(), slices), slices.num_slices);
    const Eigen::Index m = data.input_dim();
    Matrix avg = Matrix::Zero(m, m);
    for (std::size_t s = 0; s < mom.weight.size(); ++s) avg += mom.weight[s] * mom.cov[s];
    Matrix kernel = Matrix::Zero(m, m);
    for (std::size_t s = 0; s < mom.weight.size(); ++s) {
        const Matrix dev = mom.cov[s] - avg;
        kernel.noalias() += mom.weight[s] * dev * dev;
    }
    return detail::back_transform(kernel, w.inv_root, d, "sir2");
}

/// SAVE: weighted average of (I - Cov(Z | slice))^2.
inline ProjectionResult save(const Dataset& data, const SliceSpec& slices, Eigen::Index d) {
    detail::check_sliced_inputs(data, slices, d);
    const auto w = detail::whiten(data.inputs);
    const auto mom = detail::slice_moments(w.z, assign_slices(data.response(), slices), slices.num_slices);
    const Eigen::Index m = data.input_dim();
    Matrix kernel = Matrix::Zero(m, m);
    for (std::size_t s = 0; s < mom.weight.size(); ++s) {
        const Matrix dev = Matrix::Identity(m, m) - mom.cov[s];
        kernel.noalias() += mom.weight[s] * dev * dev;
    }
    return detail::back_transform(kernel, w.inv_root, d, "save");
}

/// Active subspace: eigenvectors of (1/n) sum_i grad_i grad_i^T.
inline ProjectionResult active_subspace(const Matrix& inputs, const Matrix& gradients, Eigen::Index d) {
    if (gradients.rows() != inputs.rows() || gradients.cols() != inputs.cols())
        throw InvalidInput("active_subspace: gradients must match inputs in shape");
    require_finite(gradients, "active_subspace gradients");
    if (gradients.rows() < 1) throw InvalidInput("active_subspace: need at least one gradient");
    if (d < 1 || d > inputs.cols()) throw InvalidConfig("d must lie in [1, " + std::to_string(inputs.cols()) + "]");
    const Matrix c = gradients.transpose() * gradients / static_cast<double>(gradients.rows());
    return projection_from_matrix(c, d, "as");
}

/// Central finite differences with step h_i = rel_step (1 + |x_i|).
template <class Fn>
Vector central_difference_gradient(Fn&& f, const Vector& x, double rel_step = 1e-4) {
    if (!(rel_step > 0.0)) throw InvalidConfig("finite differences: step must be positive");
    Vector g(x.size());
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = rel_step * (1.0 + std::abs(x(i)));
        probe(i) = x(i) + h;
        const double up = f(probe);
        probe(i) = x(i) - h;
        const double down = f(probe);
        probe(i) = x(i);
        g(i) = (up - down) / (2.0 * h);
    }
    return g;
}

/// Gradient source for active subspaces: an analytic callback or central
/// finite differences of the function itself.
struct GradientSource {
    enum class Kind { analytic, finite_difference } kind = Kind::finite_difference;
    std::function<Vector(const Vector&)> gradient;  // analytic only
    double step = 1e-4;

    static GradientSource analytic(std::function<Vector(const Vector&)> g) {
        return {Kind::analytic, std::move(g), 1e-4};
    }
    static GradientSource finite_difference(double step = 1e-4) { return {Kind::finite_difference, {}, step}; }
};

/// Gradients at each row, computed concurrently one row per task.
inline Matrix gradient_batch(const std::function<double(const Vector&)>& f, const Matrix& inputs,
                             const GradientSource& source) {
    if (source.kind == GradientSource::Kind::finite_difference && !(source.step > 0.0))
        throw InvalidConfig("finite differences: step must be positive");
    Matrix out(inputs.rows(), inputs.cols());
    parallel_for(static_cast<std::size_t>(inputs.rows()), [&](std::size_t i) {
        const Vector x = inputs.row(static_cast<Eigen::Index>(i)).transpose();
        out.row(static_cast<Eigen::Index>(i)) = source.kind == GradientSource::Kind::analytic
                                                    ? source.gradient(x).transpose()
                                                    : central_difference_gradient(f, x, source.step).transpose();
    });
    return out;
}

}  // namespace dremu

#endif  // DREMU_BASELINES_HPP
