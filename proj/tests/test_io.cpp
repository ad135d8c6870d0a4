#include "dremu/io.hpp"
#include "dremu/benchmarks.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace dremu;

TEST(Numbers, FormatParseRoundTrip) {
    for (double v : {0.0, -1.5, 1e-300, 123456.789, 0.1, std::nextafter(1.0, 2.0)})
        EXPECT_EQ(parse_double(format_double(v), "t"), v);
    EXPECT_EQ(parse_double(" +2.5\r", "t"), 2.5);
    EXPECT_THROW(parse_double("nan", "t"), InvalidInput);
    EXPECT_THROW(parse_double("1e999", "t"), InvalidInput);
    EXPECT_THROW(parse_double("1,5", "t"), InvalidInput);
    EXPECT_THROW(parse_double("", "t"), InvalidInput);
}

TEST(Csv, ParsesScalarAndVectorResponses) {
    const Dataset a = dataset_from_csv("x1,x2,y\n1,2,3\n4,5,6\n");
    EXPECT_EQ(a.input_dim(), 2);
    EXPECT_EQ(a.response_dim(), 1);
    EXPECT_EQ(a.responses(1, 0), 6.0);
    const Dataset b = dataset_from_csv("\xEF\xBB\xBFx1,y1,y2\r\n1,2,3\r\n");
    EXPECT_EQ(b.input_dim(), 1);
    EXPECT_EQ(b.response_dim(), 2);
}

TEST(Csv, Rejections) {
    EXPECT_THROW(dataset_from_csv("x1,x2\n1,2\n"), InvalidInput);
    EXPECT_THROW(dataset_from_csv("x1,y\n1,2,3\n"), InvalidInput);
    EXPECT_THROW(dataset_from_csv("x1,y\n1,abc\n"), InvalidInput);
    EXPECT_THROW(dataset_from_csv("x1,y\n1,inf\n"), InvalidInput);
    EXPECT_THROW(dataset_from_csv(""), InvalidInput);
}

TEST(Csv, DatasetRoundTripIsExact) {
    const Dataset d(oracle::standard_normal(7, 3, 1), Vector(oracle::standard_normal(7, 1, 2).col(0)));
    const Dataset back = dataset_from_csv(dataset_to_csv(d));
    EXPECT_EQ(back.inputs, d.inputs);
    EXPECT_EQ(back.responses, d.responses);
    EXPECT_EQ(dataset_to_csv(back), dataset_to_csv(d));
}

TEST(Files, WriteAndReadBack) {
    const auto dir = std::filesystem::temp_directory_path() / "dremu_io_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "d.csv").string();
    const Dataset d(oracle::standard_normal(4, 2, 3), Vector::LinSpaced(4, 0, 1));
    write_dataset(path, d);
    EXPECT_EQ(read_dataset(path).inputs, d.inputs);
    EXPECT_THROW(read_text_file((dir / "missing.csv").string()), InvalidInput);
    std::filesystem::remove_all(dir);
}

TEST(ProjectionDocument, RoundTrip) {
    const Dataset d = ridge_batch(make_ridge(random_orthonormal(5, 2, 1), "sin_plus_squares"), 60, 2);
    const auto p = estimate_projection(d, GkdrConfig{1, 1, 1e-5, 2, false});
    const nlohmann::json j = projection_to_json(p, {}, reducer_config_to_json(ReducerConfig{}), 7);
    EXPECT_EQ(j.at("format"), "dremu-projection");
    EXPECT_EQ(j.at("basis").size(), 5u);
    EXPECT_EQ(j.at("basis")[0].size(), 2u);
    const auto back = projection_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.projection.basis, p.basis);
    EXPECT_EQ(back.projection.eigenvalues, p.eigenvalues);
    EXPECT_EQ(j.at("seed"), 7);
    nlohmann::json bad = j;
    bad["d"] = 3;
    EXPECT_THROW(projection_from_json(bad), InvalidInput);
    bad.erase("basis");
    EXPECT_THROW(projection_from_json(bad), InvalidInput);
}

TEST(EmulatorDocument, FullGpRoundTripPredictions) {
    const Dataset d = ridge_batch(make_ridge(random_orthonormal(3, 1, 3), "sin"), 30, 4);
    GpFitOptions opts;
    opts.starts = 2;
    const EmulatorDocument em{fit(d, TrendBasis{}, opts), std::nullopt, 3, {{"seed", 1}}};
    const auto back = emulator_from_json(nlohmann::json::parse(emulator_to_json(em).dump()));
    const Matrix xt = gaussian_sample(20, 3, 5);
    const auto a = em.predict(xt);
    const auto b = back.predict(xt);
    EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.covariance - b.covariance).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EmulatorDocument, ReducedRoundTripPredictions) {
    const Dataset d = ridge_batch(make_ridge(random_orthonormal(6, 2, 6), "sin_plus_squares"), 80, 7);
    ReducerConfig cfg;
    cfg.d = 2;
    cfg.retained = {5};
    const auto em = fit_reduced_emulator(d, cfg, TrendBasis{}, reduced_gp_options(2, 1));
    const auto doc = to_document(em);
    const auto back = emulator_from_json(nlohmann::json::parse(emulator_to_json(doc).dump()));
    const Matrix xt = gaussian_sample(20, 6, 8);
    EXPECT_LT((em.predict_mean(xt) - back.predict_mean(xt)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(back.provenance.at("reducer").at("retained"), nlohmann::json::array({5}));
    EXPECT_THROW(back.predict_mean(Matrix::Zero(1, 5)), InvalidInput);
}

TEST(EmulatorDocument, RejectsInconsistentDocuments) {
    const Dataset d = ridge_batch(make_ridge(random_orthonormal(3, 1, 3), "sin"), 20, 4);
    GpFitOptions opts;
    opts.starts = 1;
    nlohmann::json j = emulator_to_json({fit(d, TrendBasis{}, opts), std::nullopt, 3, {}});
    j["input_dim"] = 4;
    EXPECT_THROW(emulator_from_json(j), InvalidInput);
    j["format"] = "other";
    EXPECT_THROW(emulator_from_json(j), InvalidInput);
}
