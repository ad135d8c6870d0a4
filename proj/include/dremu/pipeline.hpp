// SPDX-License-Identifier: Apache-2.0
//
// Dimension-reduced emulation: estimate a projection on a set of simulator
// runs, keep its leading d directions, and train a GP on the projected inputs
// (either the same runs, or fresh runs designed on the reduced space and
// lifted back to full inputs). Also: evaluation metrics, cross-validated
// selection of (c1, c2, d), and the elliptic benchmark study.

#ifndef DREMU_PIPELINE_HPP
#define DREMU_PIPELINE_HPP

#include "dremu/baselines.hpp"
#include "dremu/benchmarks.hpp"
#include "dremu/core.hpp"
#include "dremu/design.hpp"
#include "dremu/gkdr.hpp"
#include "dremu/gp.hpp"

#include "json.hpp"

#include <chrono>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace dremu {

// ---------------------------------------------------------------------------
// Metrics

/// Root-mean-square error divided by the range of the true values.
inline double nprmse(const Vector& truth, const Vector& predictions) {
    if (truth.size() != predictions.size()) throw InvalidInput("nprmse: length mismatch");
    if (truth.size() < 2) throw InvalidInput("nprmse: need at least two values");
    if (!truth.allFinite() || !predictions.allFinite()) throw InvalidInput("nprmse: non-finite value");
    const double range = truth.maxCoeff() - truth.minCoeff();
    if (!(range > 0.0)) throw DegenerateData("nprmse: true values are constant");
    const double rmse = std::sqrt((truth - predictions).squaredNorm() / static_cast<double>(truth.size()));
    return rmse / range;
}

/// Spectral norm of A A^T - B B^T for orthonormal A, B: the sine of the largest
/// principal angle when the dimensions agree.
inline double subspace_distance(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw InvalidInput("subspace_distance: ambient dimensions differ");
    if (orthonormality_error(a) > 1e-8 || orthonormality_error(b) > 1e-8)
        throw InvalidInput("subspace_distance: inputs must have orthonormal columns");
    const Matrix diff = a * a.transpose() - b * b.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(diff, Eigen::EigenvaluesOnly);
    return std::min(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
}

// ---------------------------------------------------------------------------
// Reducers

enum class ReducerKind { gkdr, sir, sir2, save, as, identity };

inline std::string to_string(ReducerKind k) {
    switch (k) {
        case ReducerKind::gkdr: return "gkdr";
        case ReducerKind::sir: return "sir";
        case ReducerKind::sir2: return "sir2";
        case ReducerKind::save: return "save";
        case ReducerKind::as: return "as";
        case ReducerKind::identity: return "identity";
    }
    return "unknown";
}

inline ReducerKind reducer_from_string(const std::string& s) {
    for (auto k : {ReducerKind::gkdr, ReducerKind::sir, ReducerKind::sir2, ReducerKind::save, ReducerKind::as,
                   ReducerKind::identity})
        if (to_string(k) == s) return k;
    throw InvalidConfig("unknown reduction method '" + s + "'");
}

struct ReducerConfig {
    ReducerKind kind = ReducerKind::gkdr;
    Eigen::Index d = 1;
    double c1 = 1.0;
    double c2 = 1.0;
    double eps = 1e-5;
    bool standardize = false;
    SliceSpec slices{};
    double fd_step = 1e-4;
    /// Inputs kept unreduced. Reduction acts on the other inputs with the
    /// response augmented by the retained ones (gkdr only).
    std::vector<Eigen::Index> retained;

    [[nodiscard]] GkdrConfig gkdr_config() const { return {c1, c2, eps, d, standardize}; }
};

/// Columns of an m-input dataset that are not retained.
inline std::vector<Eigen::Index> reduced_columns(Eigen::Index m, const std::vector<Eigen::Index>& retained) {
    std::set<Eigen::Index> keep(retained.begin(), retained.end());
    if (keep.size() != retained.size()) throw InvalidConfig("retained inputs contain duplicates");
    for (auto r : retained)
        if (r < 0 || r >= m) throw InvalidConfig("retained input index " + std::to_string(r) + " out of range");
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < m; ++j)
        if (!keep.count(j)) out.push_back(j);
    if (out.empty()) throw InvalidConfig("every input is retained; nothing to reduce");
    return out;
}

inline Matrix select_columns(const Matrix& x, const std::vector<Eigen::Index>& cols) {
    Matrix out(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(cols[j]);
    return out;
}

inline ProjectionResult identity_projection(Eigen::Index m) {
    ProjectionResult p;
    p.method = "identity";
    p.directions = Matrix::Identity(m, m);
    p.basis = p.directions;
    p.eigenvalues = Vector::Ones(m);
    p.matrix_trace = static_cast<double>(m);
    return p;
}

/// Runs the configured estimator on the non-retained inputs. `gradients` are
/// needed for active subspaces and must cover the non-retained inputs.
inline ProjectionResult estimate_reduction(const Dataset& data, const ReducerConfig& cfg,
                                           const std::optional<Matrix>& gradients = std::nullopt) {
    data.validate();
    const auto cols = reduced_columns(data.input_dim(), cfg.retained);
    const auto mr = static_cast<Eigen::Index>(cols.size());
    if (cfg.kind != ReducerKind::identity && (cfg.d < 1 || cfg.d > mr))
        throw InvalidConfig("d must lie in [1, " + std::to_string(mr) + "], got " + std::to_string(cfg.d));
    if (!cfg.retained.empty() && cfg.kind != ReducerKind::gkdr)
        throw InvalidConfig("retained inputs are only supported with gkdr");

    switch (cfg.kind) {
        case ReducerKind::identity: return identity_projection(data.input_dim());
        case ReducerKind::gkdr: {
            if (cfg.retained.empty()) return estimate_projection(data, cfg.gkdr_config());
            Matrix aug(data.size(), data.response_dim() + static_cast<Eigen::Index>(cfg.retained.size()));
            aug << data.responses, select_columns(data.inputs, cfg.retained);
            return estimate_projection(Dataset(select_columns(data.inputs, cols), aug), cfg.gkdr_config());
        }
        case ReducerKind::sir: return sir(data, cfg.slices, cfg.d);
        case ReducerKind::sir2: return sir2(data, cfg.slices, cfg.d);
        case ReducerKind::save: return save(data, cfg.slices, cfg.d);
        case ReducerKind::as:
            if (!gradients) throw InvalidConfig("active subspaces need gradients");
            return active_subspace(data.inputs, *gradients, cfg.d);
    }
    throw InvalidConfig("unknown reducer");
}

/// GP inputs for a projection: [retained inputs, projected remaining inputs].
inline Matrix reduced_features(const Matrix& x, const ProjectionResult& proj,
                               const std::vector<Eigen::Index>& retained) {
    if (retained.empty()) return proj.project(x);
    const auto cols = reduced_columns(x.cols(), retained);
    if (static_cast<Eigen::Index>(cols.size()) != proj.input_dim())
        throw InvalidInput("reduced features: input dimension mismatch");
    Matrix out(x.rows(), static_cast<Eigen::Index>(retained.size()) + proj.dim());
    out << select_columns(x, retained), select_columns(x, cols) * proj.basis;
    return out;
}

// ---------------------------------------------------------------------------
// Reduced emulator

using Simulator = std::function<double(const Vector&)>;

/// GP options for emulating a reduced simulator: the dropped directions look
/// like noise, so the nugget is optimized above a 1e-8 floor.
inline GpFitOptions reduced_gp_options(int starts = 8, std::uint64_t seed = 0) {
    GpFitOptions o;
    o.nugget = NuggetPolicy::optimized(1e-8);
    o.starts = starts;
    o.seed = seed;
    return o;
}

struct EmulatorProvenance {
    ReducerConfig reducer;
    std::string training_mode;  // "projected-pairs" or "lifted-lhs"
    Eigen::Index design_size = 0;
    std::uint64_t seed = 0;
};

class ReducedEmulator {
public:
    ReducedEmulator(ProjectionResult projection, std::vector<Eigen::Index> retained, Eigen::Index input_dim,
                    GpModel gp, EmulatorProvenance provenance)
        : projection_(std::move(projection)),
          retained_(std::move(retained)),
          input_dim_(input_dim),
          gp_(std::move(gp)),
          provenance_(std::move(provenance)) {
        if (gp_.input_dim() != projection_.dim() + static_cast<Eigen::Index>(retained_.size()))
            throw InvalidInput("reduced emulator: GP input dimension does not match projection");
    }

    [[nodiscard]] Matrix features(const Matrix& x) const {
        if (x.cols() != input_dim_) throw InvalidInput("reduced emulator: input dimension mismatch");
        return reduced_features(x, projection_, retained_);
    }

    [[nodiscard]] Vector predict_mean(const Matrix& x) const { return gp_.predict_mean(features(x)); }
    [[nodiscard]] GpPrediction predict(const Matrix& x) const { return gp_.predict(features(x)); }

    [[nodiscard]] const ProjectionResult& projection() const { return projection_; }
    [[nodiscard]] const std::vector<Eigen::Index>& retained() const { return retained_; }
    [[nodiscard]] const GpModel& gp() const { return gp_; }
    [[nodiscard]] const EmulatorProvenance& provenance() const { return provenance_; }
    [[nodiscard]] Eigen::Index input_dim() const { return input_dim_; }

private:
    ProjectionResult projection_;
    std::vector<Eigen::Index> retained_;
    Eigen::Index input_dim_;
    GpModel gp_;
    EmulatorProvenance provenance_;
};

struct DesignRequest {
    Simulator simulator;
    Eigen::Index budget = 0;  // 0 means 10 x (GP input dimension)
    std::uint64_t seed = 0;
};

/// Step 1: projection on `train`. Step 2: keep the leading d directions.
/// Step 3: GP on the projected pairs, or, when a simulator is supplied, on a
/// Latin hypercube over the (padded) range of the projected training inputs
/// lifted to full inputs and run through the simulator.
inline ReducedEmulator fit_reduced_emulator(const Dataset& train, const ReducerConfig& reducer,
                                            const TrendBasis& trend, const GpFitOptions& gp_options,
                                            const std::optional<DesignRequest>& design = std::nullopt,
                                            const std::optional<Matrix>& gradients = std::nullopt) {
    std::optional<Matrix> grads = gradients;
    if (reducer.kind == ReducerKind::as && !grads) {
        if (!design || !design->simulator) throw InvalidConfig("active subspaces need gradients or a simulator");
        grads = gradient_batch(design->simulator, train.inputs, GradientSource::finite_difference(reducer.fd_step));
    }
    ProjectionResult proj = estimate_reduction(train, reducer, grads);
    const Eigen::Index m = train.input_dim();
    std::vector<Eigen::Index> retained = reducer.retained;

    EmulatorProvenance prov{reducer, "projected-pairs", train.size(), design ? design->seed : 0};
    auto features = [&](const Matrix& x) { return reduced_features(x, proj, retained); };

    Dataset gp_data;
    if (design && design->simulator) {
        const Matrix train_features = features(train.inputs);
        const Eigen::Index k = train_features.cols();
        const Eigen::Index budget = design->budget > 0 ? design->budget : 10 * k;
        const Matrix z = latin_hypercube({padded_box(train_features), budget, design->seed});
        const auto r = static_cast<Eigen::Index>(retained.size());
        Matrix x(budget, m);
        const Matrix lifted = preimage_design(z.rightCols(proj.dim()), proj.basis,
                                              standard_normal_complement(design->seed ^ 0xc0ffeeULL));
        if (retained.empty()) {
            x = lifted;
        } else {
            const auto cols = reduced_columns(m, retained);
            for (Eigen::Index j = 0; j < r; ++j) x.col(retained[static_cast<std::size_t>(j)]) = z.col(j);
            for (std::size_t j = 0; j < cols.size(); ++j) x.col(cols[j]) = lifted.col(static_cast<Eigen::Index>(j));
        }
        Vector y(budget);
        parallel_for(static_cast<std::size_t>(budget), [&](std::size_t i) {
            y(static_cast<Eigen::Index>(i)) = design->simulator(x.row(static_cast<Eigen::Index>(i)).transpose());
        });
        gp_data = Dataset(z, y);
        prov.training_mode = "lifted-lhs";
        prov.design_size = budget;
    } else {
        gp_data = Dataset(features(train.inputs), train.response());
    }
    GpModel gp = fit(gp_data, trend, gp_options);
    return ReducedEmulator(std::move(proj), std::move(retained), m, std::move(gp), std::move(prov));
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CvPlan {
    int folds = 10;
    std::vector<double> c1_grid{0.5, 1, 5, 10, 15, 20};
    std::vector<double> c2_grid{0.5, 1, 5, 10, 15, 20};
    std::vector<Eigen::Index> d_grid{1, 2, 3, 4, 5};
    std::uint64_t seed = 0;

    void validate(Eigen::Index n) const {
        if (folds < 2) throw InvalidConfig("cv: need at least 2 folds");
        if (c1_grid.empty() || c2_grid.empty() || d_grid.empty()) throw InvalidConfig("cv: empty candidate grid");
        if (n < 2 * folds) throw InvalidInput("cv: need at least 2 samples per fold");
    }
};

/// Fold label of each sample: a seeded permutation dealt round-robin.
inline std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> label(static_cast<std::size_t>(n));
    for (std::size_t r = 0; r < perm.size(); ++r)
        label[static_cast<std::size_t>(perm[r])] = static_cast<int>(r % static_cast<std::size_t>(folds));
    return label;
}

struct CvRow {
    double c1 = 0.0;
    double c2 = 0.0;
    Eigen::Index d = 0;
    double mean_nprmse = 0.0;
    std::vector<double> fold_nprmse;  // NaN where a fold was skipped
};

struct CvResult {
    std::vector<CvRow> table;
    CvRow best;
};

/// Grid search over (c1, c2, d) by k-fold predictive NPRMSE of the reduced
/// emulator trained on the projected pairs of the other folds. For methods
/// other than gkdr the (c1, c2) grid collapses to the configured values.
/// Ties prefer smaller d, then smaller c1, then smaller c2.
inline CvResult cross_validate(const Dataset& data, const CvPlan& plan, const ReducerConfig& base,
                               const TrendBasis& trend, const GpFitOptions& gp_options,
                               const std::optional<Matrix>& gradients = std::nullopt) {
    data.validate();
    plan.validate(data.size());
    const auto mr = static_cast<Eigen::Index>(reduced_columns(data.input_dim(), base.retained).size());
    std::vector<Eigen::Index> d_grid = plan.d_grid;
    std::sort(d_grid.begin(), d_grid.end());
    d_grid.erase(std::unique(d_grid.begin(), d_grid.end()), d_grid.end());
    for (auto d : d_grid)
        if (d < 1 || d > mr) throw InvalidConfig("cv: candidate d = " + std::to_string(d) + " outside [1, " +
                                                 std::to_string(mr) + "]");

    std::vector<std::pair<double, double>> cpairs;
    if (base.kind == ReducerKind::gkdr) {
        auto c1s = plan.c1_grid, c2s = plan.c2_grid;
        std::sort(c1s.begin(), c1s.end());
        std::sort(c2s.begin(), c2s.end());
        for (double a : c1s)
            for (double b : c2s) cpairs.emplace_back(a, b);
    } else {
        cpairs.emplace_back(base.c1, base.c2);
    }

    const auto labels = fold_assignment(data.size(), plan.folds, plan.seed);
    const std::size_t nc = cpairs.size();
    const std::size_t nd = d_grid.size();
    const auto nf = static_cast<std::size_t>(plan.folds);
    // score[(c * nd + di) * nf + f]
    std::vector<double> score(nc * nd * nf, std::numeric_limits<double>::quiet_NaN());

    parallel_for(nc * nf, [&](std::size_t task) {
        const std::size_t c = task / nf;
        const std::size_t f = task % nf;
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < data.size(); ++i)
            (labels[static_cast<std::size_t>(i)] == static_cast<int>(f) ? te : tr).push_back(i);
        const Dataset train = data.subset(tr);
        const Dataset test = data.subset(te);
        const Vector truth = test.response();
        if (!(truth.maxCoeff() > truth.minCoeff())) {
            warn("cv: fold " + std::to_string(f) + " has constant responses; skipped");
            return;
        }
        std::optional<Matrix> fold_grads;
        if (gradients) {
            fold_grads = Matrix(static_cast<Eigen::Index>(tr.size()), gradients->cols());
            for (std::size_t i = 0; i < tr.size(); ++i) fold_grads->row(static_cast<Eigen::Index>(i)) = gradients->row(tr[i]);
        }
        ReducerConfig cfg = base;
        cfg.c1 = cpairs[c].first;
        cfg.c2 = cpairs[c].second;
        cfg.d = d_grid.back();
        const ProjectionResult full = estimate_reduction(train, cfg, fold_grads);
        for (std::size_t di = 0; di < nd; ++di) {
            const ProjectionResult proj = full.truncated(d_grid[di]);
            GpFitOptions opts = gp_options;
            opts.seed = gp_options.seed + f;
            try {
                GpModel gp =
                    fit(Dataset(reduced_features(train.inputs, proj, cfg.retained), train.response()), trend, opts);
                const ReducedEmulator em(proj, cfg.retained, data.input_dim(), std::move(gp),
                                         {cfg, "projected-pairs", train.size(), opts.seed});
                score[(c * nd + di) * nf + f] = nprmse(truth, em.predict_mean(test.inputs));
            } catch (const NumericalError& e) {
                warn("cv: fold " + std::to_string(f) + ", d = " + std::to_string(d_grid[di]) + " skipped: " + e.what());
            }
        }
    });

    CvResult out;
    for (std::size_t c = 0; c < nc; ++c) {
        for (std::size_t di = 0; di < nd; ++di) {
            CvRow row{cpairs[c].first, cpairs[c].second, d_grid[di], 0.0, {}};
            double sum = 0.0;
            int used = 0;
            for (std::size_t f = 0; f < nf; ++f) {
                const double s = score[(c * nd + di) * nf + f];
                row.fold_nprmse.push_back(s);
                if (std::isfinite(s)) {
                    sum += s;
                    ++used;
                }
            }
            row.mean_nprmse = used > 0 ? sum / used : std::numeric_limits<double>::infinity();
            out.table.push_back(std::move(row));
        }
    }
    auto better = [](const CvRow& a, const CvRow& b) {
        if (a.mean_nprmse != b.mean_nprmse) return a.mean_nprmse < b.mean_nprmse;
        if (a.d != b.d) return a.d < b.d;
        if (a.c1 != b.c1) return a.c1 < b.c1;
        return a.c2 < b.c2;
    };
    out.best = *std::min_element(out.table.begin(), out.table.end(), better);
    if (!std::isfinite(out.best.mean_nprmse)) throw DegenerateData("cv: every fold was skipped");
    return out;
}

}  // namespace dremu

#endif  // DREMU_PIPELINE_HPP
