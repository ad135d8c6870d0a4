#include "dremu/pipeline.hpp"
#include "dremu/study.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <string>

using namespace dremu;

TEST(Nprmse, HandValues) {
    EXPECT_EQ(nprmse(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3)), 0.0);
    EXPECT_DOUBLE_EQ(nprmse(Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 0)), 1.0);
    EXPECT_DOUBLE_EQ(nprmse(Eigen::Vector2d(0, 2), Eigen::Vector2d(1, 1)), 0.5);
}

TEST(Nprmse, JointAffineInvariance) {
    const Vector t = oracle::standard_normal(30, 1, 1).col(0);
    const Vector p = t + 0.1 * oracle::standard_normal(30, 1, 2).col(0);
    const double base = nprmse(t, p);
    EXPECT_NEAR(nprmse(Vector(t.array() + 5.0), Vector(p.array() + 5.0)), base, 1e-12);
    EXPECT_NEAR(nprmse(Vector(-3.0 * t), Vector(-3.0 * p)), base, 1e-12);
}

TEST(Nprmse, Errors) {
    EXPECT_THROW(nprmse(Eigen::Vector2d(1, 1), Eigen::Vector2d(0, 1)), DegenerateData);
    EXPECT_THROW(nprmse(Vector::Zero(1), Vector::Zero(1)), InvalidInput);
    EXPECT_THROW(nprmse(Eigen::Vector2d(0, 1), Eigen::Vector3d(0, 1, 2)), InvalidInput);
}

TEST(SubspaceDistance, HandValues) {
    const Matrix e1 = Matrix::Identity(3, 1);
    const Matrix e2 = Matrix::Identity(3, 2).rightCols(1);
    Matrix mid(3, 1);
    mid << 1, 1, 0;
    mid /= std::sqrt(2.0);
    EXPECT_EQ(subspace_distance(e1, e1), 0.0);
    EXPECT_NEAR(subspace_distance(e1, e2), 1.0, 1e-15);
    EXPECT_NEAR(subspace_distance(e1, mid), std::sqrt(2.0) / 2.0, 1e-12);
    EXPECT_NEAR(oracle::projector_distance(e1, mid), std::sqrt(2.0) / 2.0, 1e-12);
    EXPECT_THROW(subspace_distance(Matrix::Ones(3, 1), e1), InvalidInput);
}

TEST(SubspaceDistance, SymmetricAndSpanOnly) {
    for (unsigned s = 0; s < 20; ++s) {
        const Matrix a = oracle::orthonormal(7, 3, s);
        const Matrix b = oracle::orthonormal(7, 3, 100 + s);
        const Matrix r = oracle::orthonormal(3, 3, 200 + s);
        const double d = subspace_distance(a, b);
        EXPECT_NEAR(d, subspace_distance(b, a), 1e-12);
        EXPECT_NEAR(d, subspace_distance(Matrix(a * r), b), 1e-10);
        EXPECT_NEAR(d, oracle::projector_distance(a, b), 1e-10);
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 1.0);
    }
}

TEST(Reducers, NamesRoundTrip) {
    for (auto k : {ReducerKind::gkdr, ReducerKind::sir, ReducerKind::sir2, ReducerKind::save, ReducerKind::as,
                   ReducerKind::identity})
        EXPECT_EQ(reducer_from_string(to_string(k)), k);
    EXPECT_THROW(reducer_from_string("mave"), InvalidConfig);
}

TEST(ReducedEmulator, IdentityReducerMatchesFullGp) {
    const auto f = make_ridge(random_orthonormal(4, 2, 1), "sin_plus_squares");
    const Dataset train = ridge_batch(f, 40, 2);
    const Matrix test = gaussian_sample(25, 4, 3);
    ReducerConfig cfg;
    cfg.kind = ReducerKind::identity;
    cfg.d = 4;
    GpFitOptions opts;
    opts.seed = 5;
    const auto em = fit_reduced_emulator(train, cfg, TrendBasis{}, opts);
    const GpModel direct = fit(train, TrendBasis{}, opts);
    EXPECT_LT((em.predict_mean(test) - direct.predict_mean(test)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ(em.provenance().training_mode, "projected-pairs");
}

TEST(ReducedEmulator, RidgeFunctionIsEmulatedAccurately) {
    const Matrix b = random_orthonormal(20, 2, 7);
    const auto f = make_ridge(b, "sin_plus_squares");
    const Dataset train = ridge_batch(f, 400, 8);
    const Dataset test = ridge_batch(f, 200, 9);
    ReducerConfig cfg;
    cfg.d = 2;
    cfg.c2 = 10;
    const auto em = fit_reduced_emulator(train, cfg, TrendBasis{}, reduced_gp_options(2, 1));
    EXPECT_EQ(em.gp().input_dim(), 2);
    EXPECT_LT(nprmse(test.response(), em.predict_mean(test.inputs)), 0.05);
}

TEST(ReducedEmulator, RetainedInputsMatchManualComposition) {
    const Matrix x = gaussian_sample(80, 6, 10);
    Vector y(80);
    for (Eigen::Index i = 0; i < 80; ++i) y(i) = x(i, 0) * std::sin(x(i, 2) - x(i, 3)) + 0.2 * x(i, 5);
    const Dataset train(x, y);
    ReducerConfig cfg;
    cfg.d = 2;
    cfg.retained = {0};
    const GpFitOptions opts = reduced_gp_options(2, 3);
    const auto em = fit_reduced_emulator(train, cfg, TrendBasis{}, opts);

    const std::vector<Eigen::Index> rest{1, 2, 3, 4, 5};
    Matrix sub(80, 5), aug(80, 2);
    for (std::size_t j = 0; j < rest.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = x.col(rest[j]);
    aug << y, x.col(0);
    const auto proj = estimate_projection(Dataset(sub, aug), GkdrConfig{1, 1, 1e-5, 2, false});
    Matrix features(80, 3);
    features << x.col(0), sub * proj.basis;
    const GpModel manual = fit(Dataset(features, y), TrendBasis{}, opts);

    const Matrix xt = gaussian_sample(15, 6, 11);
    Matrix ft(15, 3);
    Matrix subt(15, 5);
    for (std::size_t j = 0; j < rest.size(); ++j) subt.col(static_cast<Eigen::Index>(j)) = xt.col(rest[j]);
    ft << xt.col(0), subt * proj.basis;
    EXPECT_EQ(em.gp().input_dim(), 3);
    EXPECT_LT((em.predict_mean(xt) - manual.predict_mean(ft)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReducedEmulator, LiftedDesignUsesSimulator) {
    const Matrix b = random_orthonormal(8, 1, 12);
    const auto f = make_ridge(b, "sin");
    const Dataset train = ridge_batch(f, 100, 13);
    ReducerConfig cfg;
    cfg.d = 1;
    std::atomic<int> calls{0};
    DesignRequest req{[&](const Vector& v) {
                          ++calls;
                          return ridge_eval(f, v);
                      },
                      0, 4};
    const auto em = fit_reduced_emulator(train, cfg, TrendBasis{}, reduced_gp_options(2, 1), req);
    EXPECT_EQ(calls.load(), 10);
    EXPECT_EQ(em.provenance().training_mode, "lifted-lhs");
    EXPECT_EQ(em.provenance().design_size, 10);
    EXPECT_EQ(em.gp().training_inputs().rows(), 10);
}

TEST(ReducedEmulator, ActiveSubspaceWithSimulatorGradients) {
    const Matrix b = random_orthonormal(6, 1, 14);
    const auto f = make_ridge(b, "sin");
    const Dataset train = ridge_batch(f, 60, 15);
    ReducerConfig cfg;
    cfg.kind = ReducerKind::as;
    cfg.d = 1;
    const auto em = fit_reduced_emulator(train, cfg, TrendBasis{}, reduced_gp_options(1, 1),
                                         DesignRequest{[&](const Vector& v) { return ridge_eval(f, v); }, 12, 2});
    EXPECT_LT(subspace_distance(em.projection().basis, b), 1e-3);
    EXPECT_THROW(fit_reduced_emulator(train, cfg, TrendBasis{}, reduced_gp_options(1, 1)), InvalidConfig);
}

TEST(ReducedEmulator, Validation) {
    const Dataset d = ridge_batch(make_ridge(random_orthonormal(4, 1, 1), "sin"), 30, 1);
    ReducerConfig cfg;
    cfg.d = 5;
    EXPECT_THROW(estimate_reduction(d, cfg), InvalidConfig);
    cfg.d = 1;
    cfg.retained = {0, 0};
    EXPECT_THROW(estimate_reduction(d, cfg), InvalidConfig);
    cfg.retained = {0, 1, 2, 3};
    EXPECT_THROW(estimate_reduction(d, cfg), InvalidConfig);
    cfg.retained = {7};
    EXPECT_THROW(estimate_reduction(d, cfg), InvalidConfig);
    cfg.retained = {0};
    cfg.kind = ReducerKind::sir;
    EXPECT_THROW(estimate_reduction(d, cfg), InvalidConfig);
}

TEST(FoldAssignment, PartitionAndDeterminism) {
    const auto a = fold_assignment(53, 10, 4);
    EXPECT_EQ(a, fold_assignment(53, 10, 4));
    EXPECT_NE(a, fold_assignment(53, 10, 5));
    std::vector<int> count(10, 0);
    for (int l : a) {
        ASSERT_GE(l, 0);
        ASSERT_LT(l, 10);
        ++count[static_cast<std::size_t>(l)];
    }
    EXPECT_EQ(std::accumulate(count.begin(), count.end(), 0), 53);
    EXPECT_LE(*std::max_element(count.begin(), count.end()) - *std::min_element(count.begin(), count.end()), 1);
}

TEST(CrossValidate, SingleCandidate) {
    const Dataset d = ridge_batch(make_ridge(random_orthonormal(5, 1, 2), "sin"), 40, 3);
    CvPlan plan;
    plan.folds = 4;
    plan.c1_grid = {1};
    plan.c2_grid = {5};
    plan.d_grid = {1};
    const auto res = cross_validate(d, plan, ReducerConfig{}, TrendBasis{}, reduced_gp_options(1, 0));
    ASSERT_EQ(res.table.size(), 1u);
    EXPECT_EQ(res.best.d, 1);
    EXPECT_EQ(res.best.c1, 1);
    EXPECT_EQ(res.best.c2, 5);
    EXPECT_EQ(res.table[0].fold_nprmse.size(), 4u);
    EXPECT_TRUE(std::isfinite(res.best.mean_nprmse));
}

TEST(CrossValidate, DeterministicAcrossThreads) {
    const Dataset d = ridge_batch(make_ridge(random_orthonormal(5, 2, 4), "sin_plus_squares"), 60, 5);
    CvPlan plan;
    plan.folds = 3;
    plan.c1_grid = {1, 5};
    plan.c2_grid = {1};
    plan.d_grid = {1, 2};
    plan.seed = 9;
    set_num_threads(1);
    const auto a = cross_validate(d, plan, ReducerConfig{}, TrendBasis{}, reduced_gp_options(1, 0));
    set_num_threads(4);
    const auto b = cross_validate(d, plan, ReducerConfig{}, TrendBasis{}, reduced_gp_options(1, 0));
    set_num_threads(0);
    ASSERT_EQ(a.table.size(), 4u);
    for (std::size_t i = 0; i < a.table.size(); ++i) EXPECT_EQ(a.table[i].fold_nprmse, b.table[i].fold_nprmse);
}

TEST(CrossValidate, SelectsPlantedDimension) {
    int hits = 0;
    std::string picked;
    for (unsigned s = 0; s < 10; ++s) {
        const Matrix b = random_orthonormal(10, 2, 300 + s);
        const Dataset d = ridge_batch(make_ridge(b, "sin_plus_squares"), 200, 400 + s);
        CvPlan plan;
        plan.folds = 5;
        plan.c1_grid = {1};
        plan.c2_grid = {10};
        plan.d_grid = {1, 2, 3, 4, 5};
        plan.seed = s;
        const auto res = cross_validate(d, plan, ReducerConfig{}, TrendBasis{}, reduced_gp_options(1, s));
        if (res.best.d == 2) ++hits;
        picked += std::to_string(res.best.d) + " ";
    }
    EXPECT_GE(hits, 7) << "selected d per seed: " << picked;
}

TEST(CrossValidate, Validation) {
    const Dataset d = ridge_batch(make_ridge(random_orthonormal(3, 1, 2), "sin"), 10, 3);
    CvPlan plan;
    plan.folds = 1;
    EXPECT_THROW(cross_validate(d, plan, ReducerConfig{}, TrendBasis{}, GpFitOptions{}), InvalidConfig);
    plan.folds = 6;
    EXPECT_THROW(cross_validate(d, plan, ReducerConfig{}, TrendBasis{}, GpFitOptions{}), InvalidInput);
    plan.folds = 2;
    plan.d_grid.clear();
    EXPECT_THROW(cross_validate(d, plan, ReducerConfig{}, TrendBasis{}, GpFitOptions{}), InvalidConfig);
}

namespace {

Study1Spec small_study() {
    Study1Spec s;
    s.grid_resolution = 8;
    s.num_modes = 10;
    s.M = 40;
    s.d_list = {1, 2};
    s.methods = {"gkdr", "sir", "full"};
    s.n_test = 30;
    s.gp_starts = 1;
    return s;
}

}  // namespace

TEST(Study1, ReportStructure) {
    const auto report = run_study1(small_study());
    ASSERT_EQ(report.rows.size(), 6u);
    for (const auto& r : report.rows) {
        EXPECT_GE(r.nprmse, 0.0);
        EXPECT_GE(r.t1_seconds, 0.0);
        EXPECT_GE(r.t2_seconds, 0.0);
        EXPECT_GE(r.t3_seconds, 0.0);
        if (r.method == "full") {
            EXPECT_EQ(r.t2_seconds, 0.0);
        } else {
            EXPECT_GT(r.t2_seconds, 0.0);
        }
    }
    EXPECT_TRUE(std::is_sorted(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
        return std::tie(a.method, a.d) < std::tie(b.method, b.d);
    }));
    EXPECT_NE(report.find("gkdr", 2), nullptr);
    EXPECT_TRUE(report.metadata.contains("convention"));
}

TEST(Study1, FullOnlyHasOneRowPerD) {
    Study1Spec s = small_study();
    s.methods = {"full"};
    s.d_list = {1, 2, 3};
    const auto report = run_study1(s);
    ASSERT_EQ(report.rows.size(), 3u);
    std::set<Eigen::Index> ds;
    for (const auto& r : report.rows) ds.insert(r.d);
    EXPECT_EQ(ds.size(), 3u);
}

TEST(Study1, ReportRoundTrips) {
    const auto report = run_study1(small_study());
    const auto back = report_from_json(nlohmann::json::parse(report_to_json(report).dump()));
    EXPECT_EQ(back.rows, report.rows);
    EXPECT_EQ(back.metadata, report.metadata);
    const std::string csv = report_to_csv(report);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,d,nprmse,t1_seconds,t2_seconds,t3_seconds");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    EXPECT_NE(render_nprmse_svg(report).find("<svg"), std::string::npos);
}

TEST(Study1, Validation) {
    Study1Spec s = small_study();
    s.methods = {"mave"};
    EXPECT_THROW(run_study1(s), InvalidConfig);
    s = small_study();
    s.d_list = {11};
    EXPECT_THROW(run_study1(s), InvalidConfig);
}
