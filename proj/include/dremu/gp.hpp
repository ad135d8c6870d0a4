// SPDX-License-Identifier: Apache-2.0
//
// Gaussian-process emulator with a linear-in-parameters trend, ARD
// squared-exponential correlation and an optional nugget.
//
// The trend coefficients and the process variance are integrated/profiled out
// under a vague prior, which leaves a likelihood in the correlation parameters
// only:
//
//   L = -1/2 log|A| - 1/2 log|H^T A^-1 H| - (n-q)/2 log(2 pi s2) - S / (2 s2)
//
// with A the (nugget-extended) correlation matrix, beta = (H^T A^-1 H)^-1 H^T A^-1 y,
// S = (y - H beta)^T A^-1 (y - H beta) and s2 = S / (n - q).

#ifndef DREMU_GP_HPP
#define DREMU_GP_HPP

#include "dremu/core.hpp"
#include "dremu/kernels.hpp"
#include "dremu/optim.hpp"

#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

namespace dremu {

enum class TrendKind { constant, linear };

inline std::string to_string(TrendKind k) { return k == TrendKind::constant ? "constant" : "linear"; }

inline TrendKind trend_from_string(const std::string& s) {
    if (s == "constant") return TrendKind::constant;
    if (s == "linear") return TrendKind::linear;
    throw InvalidConfig("unknown trend kind '" + s + "' (expected constant or linear)");
}

/// Regression functions h(x): (1) or (1, x_1, ..., x_d).
struct TrendBasis {
    TrendKind kind = TrendKind::linear;

    [[nodiscard]] Eigen::Index size(Eigen::Index input_dim) const {
        return kind == TrendKind::constant ? 1 : input_dim + 1;
    }

    /// n x q matrix whose rows are h(x_i)^T.
    [[nodiscard]] Matrix design(const Matrix& x) const {
        Matrix h(x.rows(), size(x.cols()));
        h.col(0).setOnes();
        if (kind == TrendKind::linear) h.rightCols(x.cols()) = x;
        return h;
    }
};

struct GpHyperparameters {
    Vector log_lengthscales;
    double log_variance = 0.0;
    double nugget = 0.0;

    [[nodiscard]] Vector lengthscales() const { return log_lengthscales.array().exp(); }

    void validate() const {
        if (log_lengthscales.size() == 0 || !log_lengthscales.allFinite())
            throw InvalidConfig("gp: length scales must be finite");
        if (!std::isfinite(log_variance)) throw InvalidConfig("gp: variance must be finite");
        if (!(nugget >= 0.0 && nugget <= 0.5)) throw InvalidConfig("gp: nugget must lie in [0, 0.5]");
    }
};

struct NuggetPolicy {
    bool optimize = false;
    double value = 1e-8;  // fixed value, or the floor when optimized

    static NuggetPolicy fixed(double nu) { return {false, nu}; }
    static NuggetPolicy optimized(double floor = 1e-8) { return {true, floor}; }
};

struct GpFitOptions {
    NuggetPolicy nugget = NuggetPolicy::fixed(1e-8);
    int starts = 8;
    std::uint64_t seed = 0;
    BoxMinimizerOptions optimizer{};
};

namespace detail {

inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-6;

inline double variance_floor(const Vector& y) { return 1e-12 * (1.0 + y.squaredNorm() / static_cast<double>(y.size())); }

/// Correlation matrix without the nugget.
inline Matrix correlation(const Matrix& x, const Vector& lengthscales) {
    return gram_matrix(ArdSqExpCorrelation(lengthscales), x);
}

/// Cholesky of A with escalating diagonal jitter. Returns the jitter used.
inline double factorize_with_jitter(const Matrix& a, Eigen::LLT<Matrix>& llt) {
    llt.compute(a);
    if (llt.info() == Eigen::Success) return 0.0;
    for (double jitter = kJitterStart; jitter <= kJitterMax * 1.0000001; jitter *= 10.0) {
        Matrix shifted = a;
        shifted.diagonal().array() += jitter;
        llt.compute(shifted);
        if (llt.info() == Eigen::Success) return jitter;
    }
    throw NumericalError("gp: correlation matrix not positive definite after jitter up to " +
                         std::to_string(kJitterMax) + " (n = " + std::to_string(a.rows()) + ")");
}

/// Everything derived from (X, y, trend, length scales, nugget).
struct ProfileState {
    Matrix corr;  // C without nugget
    Eigen::LLT<Matrix> llt;
    Eigen::LLT<Matrix> trend_llt;  // of G = H^T A^-1 H
    Matrix h;
    Matrix ainv_h;
    Vector beta;
    Vector alpha;  // A^-1 (y - H beta)
    double quad = 0.0;
    double sigma2 = 0.0;
    double jitter = 0.0;
    double value = 0.0;
};

inline ProfileState profile(const Matrix& x, const Vector& y, const TrendBasis& trend, const Vector& lengthscales,
                            double nugget) {
    const Eigen::Index n = x.rows();
    ProfileState st;
    st.h = trend.design(x);
    const Eigen::Index q = st.h.cols();
    if (n <= q) throw InvalidInput("gp: need more samples (" + std::to_string(n) + ") than trend terms (" +
                                   std::to_string(q) + ")");
    st.corr = correlation(x, lengthscales);
    Matrix a = (1.0 - nugget) * st.corr;
    a.diagonal().array() += nugget;
    st.jitter = factorize_with_jitter(a, st.llt);

    st.ainv_h = st.llt.solve(st.h);
    const Matrix g = st.h.transpose() * st.ainv_h;
    st.trend_llt.compute(g);
    if (st.trend_llt.info() != Eigen::Success) throw NumericalError("gp: trend design is rank deficient");
    st.beta = st.trend_llt.solve(st.ainv_h.transpose() * y);
    const Vector resid = y - st.h * st.beta;
    st.alpha = st.llt.solve(resid);
    st.quad = std::max(0.0, resid.dot(st.alpha));
    const double dof = static_cast<double>(n - q);
    st.sigma2 = std::max(st.quad / dof, variance_floor(y));

    const double logdet_a = 2.0 * st.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double logdet_g = 2.0 * st.trend_llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    st.value = -0.5 * logdet_a - 0.5 * logdet_g - 0.5 * dof * std::log(2.0 * std::numbers::pi * st.sigma2) -
               0.5 * st.quad / st.sigma2;
    return st;
}

/// Gradient of the profile likelihood with respect to log length scales and,
/// when `with_nugget`, log nugget. dL = 1/2 sum_ij W_ij dA_ij with
/// W = alpha alpha^T / s2 - P and P = A^-1 - A^-1 H G^-1 H^T A^-1.
inline Vector profile_gradient(const ProfileState& st, const Matrix& x, const Vector& lengthscales, double nugget,
                               bool with_nugget) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    Matrix w = -st.llt.solve(Matrix::Identity(n, n));
    w.noalias() += st.ainv_h * st.trend_llt.solve(st.ainv_h.transpose());
    w.noalias() += (st.alpha / st.sigma2) * st.alpha.transpose();

    Vector grad = Vector::Zero(d + (with_nugget ? 1 : 0));
    const Vector inv_sq = lengthscales.array().square().inverse();
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double wc = 2.0 * w(i, j) * st.corr(i, j);  // both triangles
            if (wc == 0.0) continue;
            for (Eigen::Index k = 0; k < d; ++k) {
                const double diff = x(i, k) - x(j, k);
                grad(k) += wc * diff * diff * inv_sq(k);
            }
        }
    }
    // dA/dlog(delta_k) = (1 - nu) C 2 diff^2 / delta^2; the 1/2 in dL cancels the 2.
    grad.head(d) *= (1.0 - nugget);
    if (with_nugget) {
        // dA/dlog(nu) = nu (I - C); diagonal of I - C is zero.
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                if (i != j) s -= w(i, j) * st.corr(i, j);
        grad(d) = 0.5 * nugget * s;
    }
    return grad;
}

}  // namespace detail

/// Profile likelihood together with the quantities profiled out.
struct ProfileSummary {
    double log_likelihood = 0.0;
    double sigma2 = 0.0;
    Vector beta;
};

inline ProfileSummary profile_likelihood(const GpHyperparameters& hyper, const TrendBasis& trend, const Dataset& data) {
    hyper.validate();
    data.validate();
    if (hyper.log_lengthscales.size() != data.input_dim())
        throw InvalidInput("gp: " + std::to_string(hyper.log_lengthscales.size()) + " length scales for " +
                           std::to_string(data.input_dim()) + " inputs");
    const auto st = detail::profile(data.inputs, data.response(), trend, hyper.lengthscales(), hyper.nugget);
    return {st.value, st.sigma2, st.beta};
}

/// The profile likelihood value; hyper.log_variance is ignored (profiled).
inline double log_marginal_likelihood(const GpHyperparameters& hyper, const TrendBasis& trend, const Dataset& data) {
    return profile_likelihood(hyper, trend, data).log_likelihood;
}

/// Analytic gradient of the profile likelihood with respect to the log length
/// scales (and log nugget as the last entry when `with_nugget`).
inline Vector log_marginal_likelihood_gradient(const GpHyperparameters& hyper, const TrendBasis& trend,
                                               const Dataset& data, bool with_nugget) {
    hyper.validate();
    const Vector ls = hyper.lengthscales();
    const auto st = detail::profile(data.inputs, data.response(), trend, ls, hyper.nugget);
    return detail::profile_gradient(st, data.inputs, ls, hyper.nugget, with_nugget);
}

struct GpPrediction {
    Vector mean;
    Matrix covariance;
};

/// A fitted emulator. Immutable once built; predict is safe to call concurrently.
class GpModel {
public:
    /// Builds the cached factorization for given data and correlation parameters.
    static GpModel assemble(Matrix inputs, Vector outputs, TrendBasis trend, Vector log_lengthscales, double nugget) {
        GpModel m;
        m.inputs_ = std::move(inputs);
        m.outputs_ = std::move(outputs);
        m.trend_ = trend;
        m.hyper_.log_lengthscales = std::move(log_lengthscales);
        m.hyper_.nugget = nugget;
        m.hyper_.validate();
        if (m.hyper_.log_lengthscales.size() != m.inputs_.cols()) throw InvalidInput("gp: length scale count mismatch");
        m.state_ = detail::profile(m.inputs_, m.outputs_, m.trend_, m.hyper_.lengthscales(), nugget);
        m.hyper_.log_variance = std::log(m.state_.sigma2);
        return m;
    }

    [[nodiscard]] const GpHyperparameters& hyperparameters() const { return hyper_; }
    [[nodiscard]] const TrendBasis& trend() const { return trend_; }
    [[nodiscard]] const Vector& trend_coefficients() const { return state_.beta; }
    [[nodiscard]] const Matrix& training_inputs() const { return inputs_; }
    [[nodiscard]] const Vector& training_outputs() const { return outputs_; }
    [[nodiscard]] double variance() const { return state_.sigma2; }
    [[nodiscard]] double variance_floor() const { return detail::variance_floor(outputs_); }
    [[nodiscard]] double log_likelihood() const { return state_.value; }
    [[nodiscard]] double jitter() const { return state_.jitter; }
    [[nodiscard]] Eigen::Index input_dim() const { return inputs_.cols(); }
    [[nodiscard]] const Eigen::LLT<Matrix>& covariance_factor() const { return state_.llt; }

    [[nodiscard]] Vector predict_mean(const Matrix& x) const {
        const Matrix cross = cross_correlation(x);
        return trend_.design(x) * state_.beta + cross * state_.alpha;
    }

    [[nodiscard]] GpPrediction predict(const Matrix& x) const {
        const Matrix cross = cross_correlation(x);  // n* x n
        const Matrix hstar = trend_.design(x);      // n* x q
        GpPrediction out;
        out.mean = hstar * state_.beta + cross * state_.alpha;

        const Matrix w = state_.llt.matrixL().solve(cross.transpose());           // L^-1 C*^T
        const Matrix v = state_.llt.matrixU().solve(w);                           // A^-1 C*^T
        const Matrix p = hstar.transpose() - state_.h.transpose() * v;            // q x n*
        const Matrix z = state_.trend_llt.matrixL().solve(p);
        Matrix cov = (1.0 - hyper_.nugget) * detail::correlation(x, hyper_.lengthscales());
        cov.diagonal().array() += hyper_.nugget;
        cov.noalias() -= w.transpose() * w;
        cov.noalias() += z.transpose() * z;
        cov *= state_.sigma2;
        out.covariance = 0.5 * (cov + cov.transpose());
        return out;
    }

private:
    [[nodiscard]] Matrix cross_correlation(const Matrix& x) const {
        if (x.cols() != inputs_.cols())
            throw InvalidInput("gp predict: expected " + std::to_string(inputs_.cols()) + " inputs, got " +
                               std::to_string(x.cols()));
        require_finite(x, "gp predict");
        return (1.0 - hyper_.nugget) * cross_matrix(ArdSqExpCorrelation(hyper_.lengthscales()), x, inputs_);
    }

    Matrix inputs_;
    Vector outputs_;
    TrendBasis trend_;
    GpHyperparameters hyper_;
    detail::ProfileState state_;
};

namespace detail {

inline void check_no_conflicting_duplicates(const Matrix& x, const Vector& y) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) order[static_cast<std::size_t>(i)] = i;
    auto less = [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index k = 0; k < x.cols(); ++k)
            if (x(a, k) != x(b, k)) return x(a, k) < x(b, k);
        return false;
    };
    std::sort(order.begin(), order.end(), less);
    for (std::size_t i = 1; i < order.size(); ++i) {
        const auto a = order[i - 1];
        const auto b = order[i];
        if (!less(a, b) && !less(b, a) && y(a) != y(b))
            throw NumericalError("gp fit: repeated input rows " + std::to_string(a) + " and " + std::to_string(b) +
                                 " have different outputs; use a positive nugget");
    }
}

}  // namespace detail

/// Plug-in maximum likelihood fit with seeded multi-start local search over
/// log length scales in [log(1e-3 range), log(10 range)] per input.
/// Starts are drawn from the seed up front, so the result does not depend on
/// how the starts are scheduled across threads.
inline GpModel fit(const Dataset& data, const TrendBasis& trend, const GpFitOptions& options = {}) {
    data.validate();
    const Vector y = data.response();
    const Matrix& x = data.inputs;
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    const Eigen::Index q = trend.size(d);
    if (n < q + 2)
        throw InvalidInput("gp fit: need at least " + std::to_string(q + 2) + " samples, got " + std::to_string(n));
    if (options.starts < 1) throw InvalidConfig("gp fit: at least one start required");
    const auto& nug = options.nugget;
    if (!(nug.value >= 0.0 && nug.value <= 0.5)) throw InvalidConfig("gp fit: nugget must lie in [0, 0.5]");
    if (nug.optimize && !(nug.value > 0.0)) throw InvalidConfig("gp fit: optimized nugget needs a positive floor");

    const Vector range = x.colwise().maxCoeff() - x.colwise().minCoeff();
    for (Eigen::Index k = 0; k < d; ++k)
        if (!(range(k) > 0.0)) throw InvalidInput("gp fit: input column " + std::to_string(k) + " has no spread");
    if (!nug.optimize && nug.value == 0.0) detail::check_no_conflicting_duplicates(x, y);

    const Eigen::Index p = d + (nug.optimize ? 1 : 0);
    Vector lower(p), upper(p);
    lower.head(d) = (1e-3 * range).array().log();
    upper.head(d) = (10.0 * range).array().log();
    if (nug.optimize) {
        lower(d) = std::log(nug.value);
        upper(d) = std::log(0.5);
    }

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vector> starts(static_cast<std::size_t>(options.starts), Vector(p));
    for (int s = 0; s < options.starts; ++s) {
        Vector& v = starts[static_cast<std::size_t>(s)];
        // Typical squared distances grow like d, so starting scales grow like sqrt(d).
        for (Eigen::Index k = 0; k < d; ++k) {
            const double scale = range(k) * std::sqrt(static_cast<double>(d));
            const double lo = std::log(0.05 * scale);
            const double hi = std::log(2.0 * scale);
            const double v0 = s == 0 ? std::log(0.5 * scale) : lo + (hi - lo) * unit(rng);
            v(k) = std::clamp(v0, lower(k), upper(k));
        }
        if (nug.optimize) {
            const double lo = lower(d);
            const double hi = std::log(0.1);
            v(d) = s == 0 ? std::max(lo, std::log(1e-4)) : lo + (hi - lo) * unit(rng);
        }
    }

    auto objective = [&](const Vector& theta, Vector& grad) -> double {
        const Vector ls = theta.head(d).array().exp();
        const double nu = nug.optimize ? std::exp(theta(d)) : nug.value;
        try {
            const auto st = detail::profile(x, y, trend, ls, nu);
            if (!std::isfinite(st.value)) return std::numeric_limits<double>::infinity();
            grad = -detail::profile_gradient(st, x, ls, nu, nug.optimize);
            return -st.value;
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    std::vector<MinimizeResult> results(starts.size());
    parallel_for(starts.size(), [&](std::size_t s) {
        results[s] = minimize_box(objective, starts[s], lower, upper, options.optimizer);
    });
    std::size_t best = 0;
    for (std::size_t s = 1; s < results.size(); ++s)
        if (results[s].value < results[best].value) best = s;
    if (!std::isfinite(results[best].value))
        throw NumericalError("gp fit: likelihood could not be evaluated at any start");

    const Vector& theta = results[best].x;
    const double nu = nug.optimize ? std::exp(theta(d)) : nug.value;
    return GpModel::assemble(x, y, trend, theta.head(d), nu);
}

}  // namespace dremu

#endif  // DREMU_GP_HPP
