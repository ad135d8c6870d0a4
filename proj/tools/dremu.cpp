// SPDX-License-Identifier: Apache-2.0
//
// dremu: command-line front end.
//
// Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.
// Errors are printed as a single line starting with "error:".

#include "dremu/io.hpp"
#include "dremu/study.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <iostream>

using dremu::Matrix;
using dremu::Vector;
using nlohmann::json;

namespace {

struct Common {
    std::uint64_t seed = 0;
    std::string config;
    unsigned threads = 0;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    sub->add_option("--config", c.config, "JSON file with default values for this command's flags");
    sub->add_option("--threads", c.threads, "Worker threads (0 = all cores)")->capture_default_str();
}

template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& flag) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = dremu::detail::trim(item);
        if (item.empty()) continue;
        if constexpr (std::is_same_v<T, std::string>) {
            out.push_back(item);
        } else {
            const double v = dremu::parse_double(item, flag);
            if constexpr (std::is_integral_v<T>) {
                if (v != std::floor(v)) throw dremu::InvalidConfig(flag + ": '" + item + "' is not an integer");
            }
            out.push_back(static_cast<T>(v));
        }
    }
    return out;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw dremu::InvalidConfig(message);
}

// ---------------------------------------------------------------------------
// Shared reducer and GP flags

struct ReducerFlags {
    std::string method = "gkdr";
    long d = 1;
    double c1 = 1.0;
    double c2 = 1.0;
    double eps = 1e-5;
    int slices = 10;
    bool standardize = false;
    std::string retained;
    std::string gradients;
    double fd_step = 1e-4;

    void add(CLI::App* sub, bool with_d) {
        if (with_d) sub->add_option("--d", d, "Number of retained directions")->capture_default_str();
        sub->add_option("--c1", c1, "gKDR input bandwidth multiplier")->capture_default_str();
        sub->add_option("--c2", c2, "gKDR response bandwidth multiplier")->capture_default_str();
        sub->add_option("--eps", eps, "gKDR regularization")->capture_default_str();
        sub->add_option("--slices", slices, "Slices for SIR, SIR-II and SAVE")->capture_default_str();
        sub->add_flag("--standardize", standardize, "Standardize inputs before gKDR");
        sub->add_option("--retained", retained, "Comma-separated 0-based input columns kept unreduced");
        sub->add_option("--gradients", gradients, "CSV of gradients, one row per sample (for --method as)");
    }

    [[nodiscard]] dremu::ReducerConfig config(Eigen::Index m) const {
        dremu::ReducerConfig cfg;
        cfg.kind = dremu::reducer_from_string(method);
        require(d >= 1, "--d must be at least 1");
        cfg.d = d;
        require(c1 > 0.0, "--c1 must be positive");
        require(c2 > 0.0, "--c2 must be positive");
        require(eps > 0.0, "--eps must be positive");
        require(slices >= 2, "--slices must be at least 2");
        cfg.c1 = c1;
        cfg.c2 = c2;
        cfg.eps = eps;
        cfg.slices.num_slices = slices;
        cfg.standardize = standardize;
        cfg.fd_step = fd_step;
        cfg.retained = parse_list<Eigen::Index>(retained, "--retained");
        const auto mr = static_cast<Eigen::Index>(dremu::reduced_columns(m, cfg.retained).size());
        require(cfg.kind == dremu::ReducerKind::identity || d <= mr,
                "--d (" + std::to_string(d) + ") exceeds the number of reduced inputs (" + std::to_string(mr) + ")");
        require(cfg.retained.empty() || cfg.kind == dremu::ReducerKind::gkdr, "--retained requires --method gkdr");
        return cfg;
    }

    [[nodiscard]] std::optional<Matrix> load_gradients(const dremu::Dataset& data,
                                                       const dremu::ReducerConfig& cfg) const {
        if (cfg.kind != dremu::ReducerKind::as) return std::nullopt;
        require(!gradients.empty(), "--method as requires --gradients");
        Matrix g = dremu::read_matrix(gradients);
        if (g.rows() != data.size() || g.cols() != data.input_dim())
            throw dremu::InvalidInput("--gradients: expected " + std::to_string(data.size()) + " x " +
                                      std::to_string(data.input_dim()) + ", got " + std::to_string(g.rows()) + " x " +
                                      std::to_string(g.cols()));
        return g;
    }
};

struct GpFlags {
    std::string trend = "linear";
    std::optional<double> nugget;
    bool optimize_nugget = false;
    int starts = 8;

    void add(CLI::App* sub) {
        sub->add_option("--trend", trend, "GP trend: constant or linear")->capture_default_str();
        sub->add_option("--nugget", nugget, "Fixed nugget in [0, 0.5]");
        sub->add_flag("--optimize-nugget", optimize_nugget, "Estimate the nugget (floor 1e-8)");
        sub->add_option("--starts", starts, "Optimizer starts")->capture_default_str();
    }

    /// Fixed 1e-8 for raw inputs; optimized for reduced inputs unless given.
    [[nodiscard]] dremu::GpFitOptions options(std::uint64_t seed, bool reduced) const {
        require(starts >= 1, "--starts must be at least 1");
        require(!(nugget && optimize_nugget), "--nugget and --optimize-nugget are mutually exclusive");
        dremu::GpFitOptions o;
        o.starts = starts;
        o.seed = seed;
        if (nugget) {
            require(*nugget >= 0.0 && *nugget <= 0.5, "--nugget must lie in [0, 0.5]");
            o.nugget = dremu::NuggetPolicy::fixed(*nugget);
        } else if (optimize_nugget || reduced) {
            o.nugget = dremu::NuggetPolicy::optimized(1e-8);
        }
        return o;
    }

    [[nodiscard]] dremu::TrendBasis basis() const { return {dremu::trend_from_string(trend)}; }
};

// ---------------------------------------------------------------------------
// Commands

struct ReduceCmd {
    Common common;
    ReducerFlags reducer;
    std::string data, out;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("reduce", "Estimate a projection from a dataset");
        add_common(sub, common);
        sub->add_option("--data", data, "Dataset CSV")->required();
        sub->add_option("--method", reducer.method, "gkdr, sir, sir2, save or as")->capture_default_str();
        reducer.add(sub, true);
        sub->add_option("--out", out, "Projection JSON")->required();
        sub->callback([this] { run(); });
    }

    void run() const {
        const dremu::Dataset ds = dremu::read_dataset(data);
        const auto cfg = reducer.config(ds.input_dim());
        require(cfg.kind != dremu::ReducerKind::identity, "--method identity is not a reduction");
        const auto grads = reducer.load_gradients(ds, cfg);
        const auto proj = dremu::estimate_reduction(ds, cfg, grads);
        dremu::write_json_file(out, dremu::projection_to_json(proj, cfg.retained, dremu::reducer_config_to_json(cfg),
                                                              common.seed));
    }
};

struct FitCmd {
    Common common;
    ReducerFlags reducer;
    GpFlags gp;
    std::string data, out;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("fit", "Fit a GP emulator, optionally on reduced inputs");
        add_common(sub, common);
        sub->add_option("--data", data, "Dataset CSV")->required();
        reducer.method = "identity";
        sub->add_option("--method", reducer.method, "identity (no reduction), gkdr, sir, sir2, save or as")
            ->capture_default_str();
        reducer.add(sub, true);
        gp.add(sub);
        sub->add_option("--out", out, "Emulator JSON")->required();
        sub->callback([this] { run(); });
    }

    void run() const {
        const dremu::Dataset ds = dremu::read_dataset(data);
        const auto cfg = reducer.config(ds.input_dim());
        const bool reduced = cfg.kind != dremu::ReducerKind::identity;
        const auto opts = gp.options(common.seed, reduced);
        if (!reduced) {
            dremu::GpModel model = dremu::fit(ds, gp.basis(), opts);
            dremu::EmulatorDocument doc{std::move(model), std::nullopt, ds.input_dim(),
                                        {{"reducer", "identity"}, {"seed", common.seed}}};
            dremu::write_json_file(out, dremu::emulator_to_json(doc));
            return;
        }
        const auto grads = reducer.load_gradients(ds, cfg);
        const auto em = dremu::fit_reduced_emulator(ds, cfg, gp.basis(), opts, std::nullopt, grads);
        auto doc = dremu::to_document(em);
        doc.provenance["seed"] = common.seed;
        dremu::write_json_file(out, dremu::emulator_to_json(doc));
    }
};

struct PredictCmd {
    Common common;
    std::string model, inputs, out;
    bool variance = false;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("predict", "Predict with a fitted emulator");
        add_common(sub, common);
        sub->add_option("--model", model, "Emulator JSON")->required();
        sub->add_option("--inputs", inputs, "CSV of inputs (x1..xm columns; other columns ignored)")->required();
        sub->add_flag("--variance", variance, "Also write the predictive variance");
        sub->add_option("--out", out, "Predictions CSV")->required();
        sub->callback([this] { run(); });
    }

    void run() const {
        const auto em = dremu::emulator_from_json(dremu::read_json_file(model));
        const auto table = dremu::parse_csv(dremu::read_text_file(inputs), inputs);
        std::vector<Eigen::Index> xcols;
        for (std::size_t j = 0; j < table.header.size(); ++j)
            if (table.header[j] == "x" + std::to_string(xcols.size() + 1)) xcols.push_back(static_cast<Eigen::Index>(j));
        const Matrix x = xcols.empty() ? table.values : dremu::select_columns(table.values, xcols);
        if (x.rows() == 0) throw dremu::InvalidInput(inputs + ": no data rows");

        Matrix result(x.rows(), variance ? 2 : 1);
        result.col(0) = em.predict_mean(x);
        if (variance) {
            constexpr Eigen::Index block = 256;
            for (Eigen::Index start = 0; start < x.rows(); start += block) {
                const Eigen::Index len = std::min(block, x.rows() - start);
                const Matrix cov = em.predict(x.middleRows(start, len)).covariance;
                result.col(1).segment(start, len) = cov.diagonal().cwiseMax(0.0);
            }
        }
        std::vector<std::string> header{"mean"};
        if (variance) header.emplace_back("variance");
        dremu::write_text_file(out, dremu::format_csv(header, result));
    }
};

struct CvCmd {
    Common common;
    ReducerFlags reducer;
    GpFlags gp;
    std::string data, out;
    int folds = 10;
    std::string c1_grid = "0.5,1,5,10,15,20";
    std::string c2_grid = "0.5,1,5,10,15,20";
    std::string d_grid = "1,2,3,4,5";

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("cv", "Select (c1, c2, d) by k-fold cross-validation");
        add_common(sub, common);
        sub->add_option("--data", data, "Dataset CSV")->required();
        sub->add_option("--method", reducer.method, "gkdr, sir, sir2, save or as")->capture_default_str();
        reducer.add(sub, false);
        gp.add(sub);
        sub->add_option("--folds", folds, "Number of folds")->capture_default_str();
        sub->add_option("--c1-grid", c1_grid, "Candidate c1 values")->capture_default_str();
        sub->add_option("--c2-grid", c2_grid, "Candidate c2 values")->capture_default_str();
        sub->add_option("--d-grid", d_grid, "Candidate d values")->capture_default_str();
        sub->add_option("--out", out, "CV result JSON")->required();
        sub->callback([this] { run(); });
    }

    void run() const {
        const dremu::Dataset ds = dremu::read_dataset(data);
        auto cfg = reducer.config(ds.input_dim());
        require(cfg.kind != dremu::ReducerKind::identity, "--method identity is not a reduction");
        dremu::CvPlan plan;
        plan.folds = folds;
        plan.c1_grid = parse_list<double>(c1_grid, "--c1-grid");
        plan.c2_grid = parse_list<double>(c2_grid, "--c2-grid");
        plan.d_grid = parse_list<Eigen::Index>(d_grid, "--d-grid");
        plan.seed = common.seed;
        for (double c : plan.c1_grid) require(c > 0.0, "--c1-grid values must be positive");
        for (double c : plan.c2_grid) require(c > 0.0, "--c2-grid values must be positive");
        const auto grads = reducer.load_gradients(ds, cfg);
        const auto res = dremu::cross_validate(ds, plan, cfg, gp.basis(), gp.options(common.seed, true), grads);

        auto row_json = [](const dremu::CvRow& r) {
            return json{{"c1", r.c1}, {"c2", r.c2}, {"d", r.d}, {"mean_nprmse", r.mean_nprmse},
                        {"fold_nprmse", r.fold_nprmse}};
        };
        json table = json::array();
        for (const auto& r : res.table) table.push_back(row_json(r));
        const json doc = {{"format", "dremu-cv"},
                          {"version", dremu::kVersion},
                          {"method", reducer.method},
                          {"folds", folds},
                          {"seed", common.seed},
                          {"best", {{"c1", res.best.c1}, {"c2", res.best.c2}, {"d", res.best.d},
                                    {"mean_nprmse", res.best.mean_nprmse}}},
                          {"table", table}};
        dremu::write_json_file(out, doc);
    }
};

struct BenchCmd {
    Common common;
    dremu::Study1Spec spec;
    std::string d_list = "1,2,3,4,5";
    std::string methods = "gkdr,as,sir,sir2,save,full";
    std::string trend = "linear";
    std::string out, plot;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("bench-study1", "Elliptic benchmark: reduced vs full emulation");
        add_common(sub, common);
        sub->add_option("--grid", spec.grid_resolution, "Solver cells per side")->capture_default_str();
        sub->add_option("--kl-grid", spec.kl_resolution, "KL grid cells per side (0 = min(grid, 32))")
            ->capture_default_str();
        sub->add_option("--beta", spec.correlation_length, "Correlation length")->capture_default_str();
        sub->add_option("--modes", spec.num_modes, "Number of KL modes (input dimension)")->capture_default_str();
        sub->add_option("--M", spec.M, "Samples for estimating the reduction")->capture_default_str();
        sub->add_option("--d-list", d_list, "Reduced dimensions")->capture_default_str();
        sub->add_option("--methods", methods, "Methods: gkdr, as, sir, sir2, save, full")->capture_default_str();
        sub->add_option("--n-test", spec.n_test, "Test set size")->capture_default_str();
        sub->add_option("--c1", spec.c1, "gKDR input bandwidth multiplier")->capture_default_str();
        sub->add_option("--c2", spec.c2, "gKDR response bandwidth multiplier")->capture_default_str();
        sub->add_option("--eps", spec.eps, "gKDR regularization")->capture_default_str();
        sub->add_option("--slices", spec.slices, "Slices for SIR, SIR-II and SAVE")->capture_default_str();
        sub->add_option("--trend", trend, "GP trend: constant or linear")->capture_default_str();
        sub->add_option("--starts", spec.gp_starts, "GP optimizer starts")->capture_default_str();
        sub->add_option("--fd-step", spec.fd_step, "Relative finite-difference step for AS")->capture_default_str();
        sub->add_option("--out", out, "Output prefix; writes PREFIX.csv and PREFIX.json")->required();
        sub->add_option("--plot", plot, "Also write an SVG chart of NPRMSE vs d");
        sub->callback([this] { run(); });
    }

    void run() {
        spec.seed = common.seed;
        spec.d_list = parse_list<Eigen::Index>(d_list, "--d-list");
        spec.methods = parse_list<std::string>(methods, "--methods");
        spec.trend = dremu::trend_from_string(trend);
        require(spec.grid_resolution >= 8, "--grid must be at least 8");
        require(spec.correlation_length > 0.0, "--beta must be positive");
        require(spec.num_modes >= 1, "--modes must be at least 1");
        require(spec.gp_starts >= 1, "--starts must be at least 1");
        const auto report = dremu::run_study1(spec);
        dremu::write_text_file(out + ".csv", dremu::report_to_csv(report));
        dremu::write_json_file(out + ".json", dremu::report_to_json(report));
        if (!plot.empty()) dremu::write_text_file(plot, dremu::render_nprmse_svg(report));
    }
};

struct MakeDataCmd {
    Common common;
    std::string kind;
    long n = 400;
    long m = 20;
    long d = 2;
    std::string link = "sin_plus_squares";
    double noise = 0.0;
    int grid = 32;
    double beta = 1.0;
    int modes = 100;
    std::string out, basis_out, gradients_out;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("make-data", "Generate a dataset from a built-in simulator");
        add_common(sub, common);
        sub->add_option("kind", kind, "ridge or elliptic")->required()->check(CLI::IsMember({"ridge", "elliptic"}));
        sub->add_option("--n", n, "Number of samples")->capture_default_str();
        sub->add_option("--m", m, "Ridge: input dimension")->capture_default_str();
        sub->add_option("--d", d, "Ridge: true subspace dimension")->capture_default_str();
        sub->add_option("--link", link, "Ridge: identity, square, sin or sin_plus_squares")->capture_default_str();
        sub->add_option("--noise", noise, "Ridge: noise standard deviation")->capture_default_str();
        sub->add_option("--grid", grid, "Elliptic: solver cells per side")->capture_default_str();
        sub->add_option("--beta", beta, "Elliptic: correlation length")->capture_default_str();
        sub->add_option("--modes", modes, "Elliptic: number of KL modes")->capture_default_str();
        sub->add_option("--out", out, "Dataset CSV")->required();
        sub->add_option("--basis-out", basis_out, "Ridge: write the true basis as projection JSON");
        sub->add_option("--gradients-out", gradients_out, "Write finite-difference gradients as CSV");
        sub->callback([this] { run(); });
    }

    void run() const {
        require(n >= 1, "--n must be at least 1");
        dremu::Dataset ds;
        std::function<double(const Vector&)> f;
        if (kind == "ridge") {
            require(m >= 1, "--m must be at least 1");
            require(d >= 1 && d <= m, "--d must lie in [1, --m]");
            require(noise >= 0.0, "--noise must be nonnegative");
            const auto fn = dremu::make_ridge(dremu::random_orthonormal(m, d, common.seed), link, noise);
            ds = dremu::ridge_batch(fn, n, common.seed + 1);
            f = [fn](const Vector& x) { return dremu::ridge_eval(fn, x); };
            if (!basis_out.empty()) {
                dremu::ProjectionResult truth;
                truth.method = "truth";
                truth.basis = fn.true_basis;
                truth.eigenvalues = Vector::Zero(0);
                dremu::write_json_file(basis_out, dremu::projection_to_json(truth, {}, {{"link", link}}, common.seed));
            }
        } else {
            require(basis_out.empty(), "--basis-out applies to ridge data only");
            const auto problem = std::make_shared<dremu::EllipticProblem>(dremu::build_elliptic(grid, beta, modes));
            const Matrix x = dremu::gaussian_sample(n, modes, common.seed);
            ds = dremu::Dataset(x, dremu::solve_elliptic_batch(*problem, x));
            f = [problem](const Vector& v) { return dremu::solve_elliptic(*problem, v); };
        }
        dremu::write_dataset(out, ds);
        if (!gradients_out.empty()) {
            const Matrix g = dremu::gradient_batch(f, ds.inputs, dremu::GradientSource::finite_difference());
            dremu::write_text_file(gradients_out, dremu::format_csv(dremu::numbered_header("g", g.cols()), g));
        }
    }
};

struct VerifyCmd {
    Common common;
    std::string file, against;
    double tol = 1e-8;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("verify", "Check a projection, emulator or benchmark report");
        add_common(sub, common);
        sub->add_option("file", file, "JSON document")->required();
        sub->add_option("--against", against, "Projection JSON to measure subspace distance to");
        sub->add_option("--tol", tol, "Orthonormality tolerance")->capture_default_str();
        sub->callback([this] { run(); });
    }

    void run() const {
        const json doc = dremu::read_json_file(file);
        const std::string format = doc.is_object() ? doc.value("format", "") : "";
        json summary = {{"file", file}};
        if (format == "dremu-projection") {
            const auto p = dremu::projection_from_json(doc);
            const double err = dremu::orthonormality_error(p.projection.basis);
            summary["orthonormality_error"] = err;
            if (!against.empty()) {
                const auto q = dremu::projection_from_json(dremu::read_json_file(against));
                summary["subspace_distance"] = dremu::subspace_distance(p.projection.basis, q.projection.basis);
            }
            if (!(err <= tol)) throw dremu::InvalidInput("basis is not orthonormal (error " + std::to_string(err) + ")");
        } else if (format == "dremu-emulator") {
            const auto em = dremu::emulator_from_json(doc);
            const Vector fitted = em.gp.predict_mean(em.gp.training_inputs());
            summary["max_training_residual"] = (fitted - em.gp.training_outputs()).lpNorm<Eigen::Infinity>();
            if (em.projection) {
                const double err = dremu::orthonormality_error(em.projection->projection.basis);
                summary["orthonormality_error"] = err;
                if (!(err <= tol)) throw dremu::InvalidInput("emulator basis is not orthonormal");
            }
        } else if (doc.is_object() && doc.contains("rows") && doc.contains("metadata")) {
            const auto report = dremu::report_from_json(doc);
            for (const auto& r : report.rows) {
                if (!(r.nprmse >= 0.0) || r.t1_seconds < 0.0 || r.t2_seconds < 0.0 || r.t3_seconds < 0.0)
                    throw dremu::InvalidInput("report row " + r.method + "/" + std::to_string(r.d) +
                                              " has a negative entry");
                if (r.method == "full" && r.t2_seconds != 0.0)
                    throw dremu::InvalidInput("report: full emulation must have t2 = 0");
            }
            summary["rows"] = report.rows.size();
        } else {
            throw dremu::InvalidInput(file + ": unrecognized document");
        }
        summary["status"] = "ok";
        std::cout << summary.dump() << '\n';
    }
};

// Flags from --config are inserted ahead of the command-line flags, so that
// explicit flags win. Keys are flag names without the leading dashes.
std::vector<std::string> expand_config(CLI::App& app, const std::vector<std::string>& args) {
    if (args.empty()) return args;
    CLI::App* sub = nullptr;
    std::size_t sub_pos = 0;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i].rfind("-", 0) == 0) continue;
        sub = app.get_subcommand_no_throw(args[i]);
        sub_pos = i;
        break;
    }
    if (sub == nullptr) return args;
    std::string path;
    for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;

    const json cfg = dremu::read_json_file(path);
    if (!cfg.is_object()) throw dremu::InvalidConfig("--config: top level must be an object");
    std::vector<std::string> injected;
    for (const auto& [key, value] : cfg.items()) {
        const CLI::Option* opt = key == "config" ? nullptr : sub->get_option_no_throw("--" + key);
        if (opt == nullptr) throw dremu::InvalidConfig("--config: unknown key '" + key + "' for " + sub->get_name());
        if (value.is_boolean()) {
            if (opt->get_expected_min() != 0) throw dremu::InvalidConfig("--config: key '" + key + "' is not a flag");
            if (value.get<bool>()) injected.push_back("--" + key);
            continue;
        }
        std::string text;
        if (value.is_string()) {
            text = value.get<std::string>();
        } else if (value.is_number()) {
            text = value.dump();
        } else if (value.is_array()) {
            for (const auto& v : value) {
                if (!text.empty()) text += ',';
                if (!(v.is_number() || v.is_string()))
                    throw dremu::InvalidConfig("--config: key '" + key + "' must list numbers or strings");
                text += v.is_string() ? v.get<std::string>() : v.dump();
            }
        } else {
            throw dremu::InvalidConfig("--config: unsupported value for key '" + key + "'");
        }
        injected.push_back("--" + key);
        injected.push_back(text);
    }
    std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1));
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1), args.end());
    return out;
}

int fail(int code, const std::string& message) {
    std::string line = message;
    std::replace(line.begin(), line.end(), '\n', ' ');
    std::cerr << "error: " << line << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dimension-reduced Gaussian-process emulation"};
    app.set_version_flag("--version", std::string("dremu ") + dremu::kVersion);
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    ReduceCmd reduce;
    FitCmd fit;
    PredictCmd predict;
    CvCmd cv;
    BenchCmd bench;
    MakeDataCmd make_data;
    VerifyCmd verify;
    reduce.add(app);
    fit.add(app);
    predict.add(app);
    cv.add(app);
    bench.add(app);
    make_data.add(app);
    verify.add(app);

    // Thread count must be in place before the command callback runs.
    for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) {
        auto* opt = sub->get_option_no_throw("--threads");
        if (opt != nullptr) opt->trigger_on_parse()->each([](const std::string& v) {
            dremu::set_num_threads(static_cast<unsigned>(std::stoul(v)));
        });
    }

    dremu::set_warning_sink([](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; });

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(app, args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(2, e.what());
    } catch (const dremu::NumericalError& e) {
        return fail(3, e.what());
    } catch (const dremu::Error& e) {
        return fail(2, e.what());
    } catch (const std::exception& e) {
        return fail(3, e.what());
    }
    return 0;
}
