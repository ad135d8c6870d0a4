// SPDX-License-Identifier: Apache-2.0
//
// Test simulators with known structure.
//
// Elliptic problem: -div(a grad u) = 1 on the unit square, u = 0 on the left,
// top and bottom sides, zero flux on the right side, and output
// f(x) = mean of u over the right side. The log-coefficient is a truncated
// Karhunen-Loeve expansion log a(s, x) = sum_i x_i gamma_i phi_i(s) of the
// correlation exp(-|s - t|_1 / beta).
//
// KL convention: the correlation is sampled on the cell centres of a
// kl_resolution^2 grid with quadrature weight w = 1 / kl_resolution^2. gamma_i
// are the eigenvalues of w C (so they sum to the domain area, 1) and the
// modes satisfy w sum_j phi_i(t_j) phi_k(t_j) = delta_ik. On a different
// solver grid the modes are extended by the Nystrom formula
// gamma_i phi_i(s) = w sum_j C(s, t_j) phi_i(t_j).
//
// Discretization: cell-centred finite volumes, 5-point stencil, harmonic
// averaging of a on interior faces, Dirichlet data imposed at the face
// (half-cell distance). The right-side trace is extrapolated with the
// quadratic that has zero normal derivative.

#ifndef DREMU_BENCHMARKS_HPP
#define DREMU_BENCHMARKS_HPP

#include "dremu/baselines.hpp"
#include "dremu/core.hpp"
#include "dremu/design.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <random>

namespace dremu {

struct EllipticProblem {
    int grid_resolution = 32;  // N cells per side for the solver
    int kl_resolution = 32;    // cells per side of the KL quadrature grid
    double correlation_length = 1.0;
    int num_modes = 100;
    std::uint64_t seed = 0;
    Vector kl_values;  // gamma_i, descending
    Matrix kl_modes;   // kl_resolution^2 x m, phi_i on the KL grid
    Matrix field;      // N^2 x m, gamma_i phi_i at solver cell centres

    [[nodiscard]] std::string convention() const {
        return "kl: eigenpairs of w*C on a " + std::to_string(kl_resolution) + "x" + std::to_string(kl_resolution) +
               " cell-centre grid, w=1/" + std::to_string(kl_resolution * kl_resolution) +
               ", sum(gamma)=1, w*sum(phi_i^2)=1, log a = sum x_i gamma_i phi_i; solver: " +
               std::to_string(grid_resolution) + "x" + std::to_string(grid_resolution) +
               " cell-centred FV, harmonic faces";
    }
};

enum class BoundaryKind {
    mixed,          // Dirichlet left/top/bottom, zero flux right
    all_dirichlet,  // Dirichlet on every side
};

/// Cell centres of an N x N grid, index k = j N + i with i along s1.
inline Matrix cell_centers(int n) {
    Matrix c(static_cast<Eigen::Index>(n) * n, 2);
    const double h = 1.0 / n;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            c(j * n + i, 0) = (i + 0.5) * h;
            c(j * n + i, 1) = (j + 0.5) * h;
        }
    return c;
}

inline EllipticProblem build_elliptic(int grid_resolution, double correlation_length, int num_modes,
                                      std::uint64_t seed = 0, int kl_resolution = 0) {
    if (grid_resolution < 8) throw InvalidConfig("elliptic: grid resolution must be at least 8");
    if (!(correlation_length > 0.0)) throw InvalidConfig("elliptic: correlation length must be positive");
    if (kl_resolution == 0) kl_resolution = std::min(grid_resolution, 32);
    if (kl_resolution < 2 || kl_resolution > 48) throw InvalidConfig("elliptic: kl resolution must lie in [2, 48]");
    const int points = kl_resolution * kl_resolution;
    if (num_modes < 1 || num_modes > points)
        throw InvalidConfig("elliptic: num_modes must lie in [1, " + std::to_string(points) + "]");

    EllipticProblem p;
    p.grid_resolution = grid_resolution;
    p.kl_resolution = kl_resolution;
    p.correlation_length = correlation_length;
    p.num_modes = num_modes;
    p.seed = seed;

    const Matrix t = cell_centers(kl_resolution);
    const double w = 1.0 / points;
    auto corr = [&](const auto& a, const auto& b) {
        return std::exp(-((a - b).cwiseAbs().sum()) / correlation_length);
    };
    Matrix c(points, points);
    for (int j = 0; j < points; ++j)
        for (int i = j; i < points; ++i) c(i, j) = c(j, i) = corr(t.row(i), t.row(j));
    const SortedEigen eig = sorted_eigen(w * c);
    p.kl_values = eig.values.head(num_modes).cwiseMax(0.0);
    p.kl_modes = eig.vectors.leftCols(num_modes) / std::sqrt(w);

    if (grid_resolution == kl_resolution) {
        p.field = p.kl_modes * p.kl_values.asDiagonal();
    } else {
        const Matrix s = cell_centers(grid_resolution);
        Matrix cross(s.rows(), points);
        for (int j = 0; j < points; ++j)
            for (Eigen::Index i = 0; i < s.rows(); ++i) cross(i, j) = corr(s.row(i), t.row(j));
        p.field = w * cross * p.kl_modes;
    }
    return p;
}

/// Solves -div(a grad u) = source with a = exp(log_a) per cell. Returns u at cell centres.
inline Vector solve_diffusion(int n, const Vector& log_a, const Vector& source, BoundaryKind bc) {
    const Eigen::Index cells = static_cast<Eigen::Index>(n) * n;
    if (log_a.size() != cells || source.size() != cells) throw InvalidInput("solve_diffusion: field size mismatch");
    if (!log_a.allFinite() || !source.allFinite()) throw InvalidInput("solve_diffusion: non-finite field");
    const Vector a = log_a.array().exp();
    const double inv_h2 = static_cast<double>(n) * n;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(cells) * 5);
    auto idx = [n](int i, int j) { return static_cast<Eigen::Index>(j) * n + i; };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const Eigen::Index k = idx(i, j);
            double diag = 0.0;
            auto interior = [&](int ii, int jj) {
                const Eigen::Index nb = idx(ii, jj);
                const double t = 2.0 * a(k) * a(nb) / (a(k) + a(nb)) * inv_h2;
                diag += t;
                trip.emplace_back(k, nb, -t);
            };
            const double wall = 2.0 * a(k) * inv_h2;
            if (i > 0) interior(i - 1, j); else diag += wall;
            if (i < n - 1) interior(i + 1, j); else if (bc == BoundaryKind::all_dirichlet) diag += wall;
            if (j > 0) interior(i, j - 1); else diag += wall;
            if (j < n - 1) interior(i, j + 1); else diag += wall;
            trip.emplace_back(k, k, diag);
        }
    }
    Eigen::SparseMatrix<double> op(cells, cells);
    op.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(op);
    if (solver.info() != Eigen::Success) throw NumericalError("elliptic: factorization failed");
    Vector u = solver.solve(source);
    if (solver.info() != Eigen::Success || !u.allFinite()) throw NumericalError("elliptic: linear solve failed");
    return u;
}

/// Mean of u over the right side, using the zero-slope quadratic trace (9 u_N - u_{N-1}) / 8.
inline double right_side_mean(int n, const Vector& u) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
        const double last = u(static_cast<Eigen::Index>(j) * n + n - 1);
        const double prev = u(static_cast<Eigen::Index>(j) * n + n - 2);
        s += (9.0 * last - prev) / 8.0;
    }
    return s / n;
}

struct EllipticSolveOptions {
    double log_offset = 0.0;    // added to log a everywhere (a -> e^offset a)
    double source_scale = 1.0;  // right-hand side multiplier
};

inline double solve_elliptic(const EllipticProblem& problem, const Vector& x, const EllipticSolveOptions& opt = {}) {
    if (x.size() != problem.num_modes)
        throw InvalidInput("elliptic: expected " + std::to_string(problem.num_modes) + " inputs, got " +
                           std::to_string(x.size()));
    if (!x.allFinite()) throw InvalidInput("elliptic: non-finite input");
    const int n = problem.grid_resolution;
    const Vector log_a = (problem.field * x).array() + opt.log_offset;
    const Vector source = Vector::Constant(static_cast<Eigen::Index>(n) * n, opt.source_scale);
    return right_side_mean(n, solve_diffusion(n, log_a, source, BoundaryKind::mixed));
}

/// Gradient of solve_elliptic by central differences (2m solves).
inline Vector elliptic_gradient(const EllipticProblem& problem, const Vector& x, const EllipticSolveOptions& opt = {},
                                double rel_step = 1e-4) {
    return central_difference_gradient([&](const Vector& v) { return solve_elliptic(problem, v, opt); }, x, rel_step);
}

/// Evaluates the simulator on every row, concurrently.
inline Vector solve_elliptic_batch(const EllipticProblem& problem, const Matrix& inputs) {
    Vector out(inputs.rows());
    parallel_for(static_cast<std::size_t>(inputs.rows()), [&](std::size_t i) {
        out(static_cast<Eigen::Index>(i)) = solve_elliptic(problem, inputs.row(static_cast<Eigen::Index>(i)).transpose());
    });
    return out;
}

// ---------------------------------------------------------------------------
// Ridge functions f(x) = link(B^T x) + noise.

struct RidgeFunction {
    Matrix true_basis;  // m x d, orthonormal
    std::string link_name;
    std::function<double(const Vector&)> link;
    double noise_sd = 0.0;
};

/// Random m x d matrix with orthonormal columns.
inline Matrix random_orthonormal(Eigen::Index m, Eigen::Index d, std::uint64_t seed) {
    if (d < 1 || d > m) throw InvalidConfig("random_orthonormal: need 1 <= d <= m");
    const Matrix g = gaussian_sample(m, d, seed);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(m, d);
    canonicalize_signs(q);
    return q;
}

/// Named links: identity (z1), square (z1^2), sin (sin z1),
/// sin_plus_squares (sin z1 + z2^2 + ... + zd^2).
inline RidgeFunction make_ridge(Matrix basis, const std::string& link, double noise_sd = 0.0) {
    if (orthonormality_error(basis) > 1e-8) throw InvalidInput("ridge: basis is not orthonormal");
    if (!(noise_sd >= 0.0)) throw InvalidConfig("ridge: noise_sd must be nonnegative");
    RidgeFunction f;
    f.true_basis = std::move(basis);
    f.link_name = link;
    f.noise_sd = noise_sd;
    if (link == "identity") {
        f.link = [](const Vector& z) { return z(0); };
    } else if (link == "square") {
        f.link = [](const Vector& z) { return z(0) * z(0); };
    } else if (link == "sin") {
        f.link = [](const Vector& z) { return std::sin(z(0)); };
    } else if (link == "sin_plus_squares") {
        f.link = [](const Vector& z) { return std::sin(z(0)) + z.tail(z.size() - 1).squaredNorm(); };
    } else {
        throw InvalidConfig("ridge: unknown link '" + link + "'");
    }
    return f;
}

/// Noise-free value link(B^T x).
inline double ridge_eval(const RidgeFunction& fn, const Vector& x) {
    if (x.size() != fn.true_basis.rows()) throw InvalidInput("ridge: input dimension mismatch");
    return fn.link(fn.true_basis.transpose() * x);
}

/// Standard-normal inputs and noisy responses, reproducible under seed.
inline Dataset ridge_batch(const RidgeFunction& fn, Eigen::Index n, std::uint64_t seed) {
    Matrix x = gaussian_sample(n, fn.true_basis.rows(), seed);
    Vector y(n);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = ridge_eval(fn, x.row(i).transpose());
        if (fn.noise_sd > 0.0) y(i) += fn.noise_sd * normal(rng);
    }
    return Dataset(std::move(x), y);
}

}  // namespace dremu

#endif  // DREMU_BENCHMARKS_HPP
