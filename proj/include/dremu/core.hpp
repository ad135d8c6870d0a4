// SPDX-License-Identifier: Apache-2.0
//
// Shared types, error classes and small utilities used across dremu.

#ifndef DREMU_CORE_HPP
#define DREMU_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace dremu {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr const char* kVersion = "0.3.1";

// ---------------------------------------------------------------------------
// Errors. The CLI maps the first three to exit code 2, NumericalError to 3.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class DegenerateData : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Warnings go through a replaceable sink so tests can capture them.

using WarningSink = std::function<void(const std::string&)>;

namespace detail {
inline WarningSink& warning_sink() {
    static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return sink;
}
inline std::mutex& warning_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

inline void set_warning_sink(WarningSink sink) {
    std::lock_guard lock(detail::warning_mutex());
    detail::warning_sink() = std::move(sink);
}

inline void warn(const std::string& msg) {
    std::lock_guard lock(detail::warning_mutex());
    if (detail::warning_sink()) detail::warning_sink()(msg);
}

// ---------------------------------------------------------------------------
// Dataset: n rows of m inputs with a k-column response (k = 1 for scalar).

struct Dataset {
    Matrix inputs;     // n x m
    Matrix responses;  // n x k

    Dataset() = default;
    Dataset(Matrix x, Matrix y) : inputs(std::move(x)), responses(std::move(y)) { validate(); }

    [[nodiscard]] Eigen::Index size() const { return inputs.rows(); }
    [[nodiscard]] Eigen::Index input_dim() const { return inputs.cols(); }
    [[nodiscard]] Eigen::Index response_dim() const { return responses.cols(); }
    [[nodiscard]] bool scalar_response() const { return responses.cols() == 1; }

    [[nodiscard]] Vector response() const {
        if (!scalar_response()) throw InvalidInput("dataset: scalar response required, got " +
                                                   std::to_string(responses.cols()) + " columns");
        return responses.col(0);
    }

    [[nodiscard]] Dataset subset(const std::vector<Eigen::Index>& rows) const {
        Dataset out;
        out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
        out.responses.resize(static_cast<Eigen::Index>(rows.size()), responses.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(rows[i]);
            out.responses.row(static_cast<Eigen::Index>(i)) = responses.row(rows[i]);
        }
        return out;
    }

    void validate() const {
        if (inputs.rows() != responses.rows())
            throw InvalidInput("dataset: " + std::to_string(inputs.rows()) + " input rows but " +
                               std::to_string(responses.rows()) + " response rows");
        if (!inputs.allFinite() || !responses.allFinite())
            throw InvalidInput("dataset: non-finite value");
    }
};

// ---------------------------------------------------------------------------
// Threading. Work is split into a fixed set of tasks whose results land in
// their own slots, so output never depends on the thread count.

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
    static std::atomic<unsigned> n{0};
    return n;
}
}  // namespace detail

/// 0 means "use hardware concurrency".
inline void set_num_threads(unsigned n) { detail::thread_setting() = n; }

inline unsigned num_threads() {
    const unsigned n = detail::thread_setting();
    if (n > 0) return n;
    return std::max(1u, std::thread::hardware_concurrency());
}

template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(num_threads(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Small linear-algebra helpers.

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw InvalidInput(std::string(what) + ": non-finite value");
}

/// Flips each column so its entry of largest magnitude is positive.
inline void canonicalize_signs(Matrix& columns) {
    for (Eigen::Index j = 0; j < columns.cols(); ++j) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < columns.rows(); ++i) {
            // Near-ties resolve to the first index so the choice is reproducible.
            if (std::abs(columns(i, j)) > best * (1.0 + 1e-9)) {
                best = std::abs(columns(i, j));
                arg = i;
            }
        }
        if (columns(arg, j) < 0.0) columns.col(j) = -columns.col(j);
    }
}

/// Largest deviation of BᵀB from the identity.
inline double orthonormality_error(const Matrix& basis) {
    const Matrix gram = basis.transpose() * basis;
    return (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
/// Equal eigenvalues keep the solver's order (stable sort).
struct SortedEigen {
    Vector values;
    Matrix vectors;
};

inline SortedEigen sorted_eigen(const Matrix& symmetric) {
    const Matrix sym = 0.5 * (symmetric + symmetric.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigendecomposition failed");
    const Eigen::Index m = sym.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = m - 1 - i;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return solver.eigenvalues()(a) > solver.eigenvalues()(b);
    });
    SortedEigen out{Vector(m), Matrix(m, m)};
    for (Eigen::Index i = 0; i < m; ++i) {
        out.values(i) = solver.eigenvalues()(order[static_cast<std::size_t>(i)]);
        out.vectors.col(i) = solver.eigenvectors().col(order[static_cast<std::size_t>(i)]);
    }
    canonicalize_signs(out.vectors);
    return out;
}

}  // namespace dremu

#endif  // DREMU_CORE_HPP
