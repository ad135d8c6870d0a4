// SPDX-License-Identifier: Apache-2.0
//
// Benchmark of reduced emulation against full-space emulation on the elliptic
// problem. For each method and d: the projection is estimated on M standard
// normal runs, a GP is trained on 10 d runs designed on the reduced space, and
// NPRMSE is measured on a fresh test set. Full emulation trains directly on
// M + 10 d runs. Timings:
//   t1  simulator runs for the M samples (plus gradients for AS, plus the
//       extra 10 d runs for full emulation)
//   t2  projection estimate (zero for full emulation)
//   t3  design runs, GP training and prediction

#ifndef DREMU_STUDY_HPP
#define DREMU_STUDY_HPP

#include "dremu/pipeline.hpp"

#include <fstream>

namespace dremu {

struct BenchmarkRow {
    std::string method;
    Eigen::Index d = 0;
    double nprmse = 0.0;
    double t1_seconds = 0.0;
    double t2_seconds = 0.0;
    double t3_seconds = 0.0;

    bool operator==(const BenchmarkRow&) const = default;
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;
    nlohmann::json metadata = nlohmann::json::object();

    void sort_rows() {
        std::sort(rows.begin(), rows.end(), [](const BenchmarkRow& a, const BenchmarkRow& b) {
            return std::tie(a.method, a.d) < std::tie(b.method, b.d);
        });
    }

    [[nodiscard]] const BenchmarkRow* find(const std::string& method, Eigen::Index d) const {
        for (const auto& r : rows)
            if (r.method == method && r.d == d) return &r;
        return nullptr;
    }
};

/// Seconds rounded to millisecond resolution.
inline double to_millis(double seconds) { return std::round(seconds * 1000.0) / 1000.0; }

inline std::string report_to_csv(const BenchmarkReport& report) {
    std::ostringstream os;
    os << "method,d,nprmse,t1_seconds,t2_seconds,t3_seconds\n";
    for (const auto& r : report.rows) {
        os << r.method << ',' << r.d << ',' << std::setprecision(17) << r.nprmse << std::fixed << std::setprecision(3)
           << ',' << r.t1_seconds << ',' << r.t2_seconds << ',' << r.t3_seconds << '\n';
        os.unsetf(std::ios::floatfield);
    }
    return os.str();
}

inline nlohmann::json report_to_json(const BenchmarkReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows)
        rows.push_back({{"method", r.method},
                        {"d", r.d},
                        {"nprmse", r.nprmse},
                        {"t1_seconds", r.t1_seconds},
                        {"t2_seconds", r.t2_seconds},
                        {"t3_seconds", r.t3_seconds}});
    return {{"metadata", report.metadata}, {"rows", rows}};
}

inline BenchmarkReport report_from_json(const nlohmann::json& j) {
    BenchmarkReport report;
    try {
        report.metadata = j.at("metadata");
        for (const auto& r : j.at("rows"))
            report.rows.push_back({r.at("method").get<std::string>(), r.at("d").get<Eigen::Index>(),
                                   r.at("nprmse").get<double>(), r.at("t1_seconds").get<double>(),
                                   r.at("t2_seconds").get<double>(), r.at("t3_seconds").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("benchmark report: ") + e.what());
    }
    return report;
}

struct Study1Spec {
    int grid_resolution = 32;
    int kl_resolution = 0;  // 0: min(grid_resolution, 32)
    double correlation_length = 1.0;
    int num_modes = 100;
    int M = 300;
    std::vector<Eigen::Index> d_list{1, 2, 3, 4, 5};
    std::vector<std::string> methods{"gkdr", "as", "sir", "sir2", "save", "full"};
    int n_test = 500;
    std::uint64_t seed = 1;
    double c1 = 1.0;
    double c2 = 1.0;
    double eps = 1e-5;
    int slices = 10;
    TrendKind trend = TrendKind::linear;
    int gp_starts = 8;
    double fd_step = 1e-4;

    void validate() const {
        if (M < 2) throw InvalidConfig("study1: M must be at least 2");
        if (n_test < 2) throw InvalidConfig("study1: n_test must be at least 2");
        if (d_list.empty()) throw InvalidConfig("study1: empty d list");
        if (methods.empty()) throw InvalidConfig("study1: empty method list");
        for (auto d : d_list)
            if (d < 1 || d > num_modes) throw InvalidConfig("study1: d = " + std::to_string(d) + " out of range");
        for (const auto& m : methods)
            if (m != "full") {
                const auto k = reducer_from_string(m);
                if (k == ReducerKind::identity) throw InvalidConfig("study1: use 'full' for no reduction");
            }
    }
};

namespace detail {
class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};
}  // namespace detail

inline BenchmarkReport run_study1(const Study1Spec& spec) {
    spec.validate();
    const EllipticProblem problem =
        build_elliptic(spec.grid_resolution, spec.correlation_length, spec.num_modes, spec.seed, spec.kl_resolution);
    const Simulator simulator = [&problem](const Vector& x) { return solve_elliptic(problem, x); };
    const TrendBasis trend{spec.trend};
    const auto m = static_cast<Eigen::Index>(spec.num_modes);

    BenchmarkReport report;
    report.metadata = {{"study", "elliptic"},
                       {"grid_resolution", spec.grid_resolution},
                       {"kl_resolution", problem.kl_resolution},
                       {"correlation_length", spec.correlation_length},
                       {"num_modes", spec.num_modes},
                       {"M", spec.M},
                       {"n_test", spec.n_test},
                       {"seed", spec.seed},
                       {"gkdr", {{"c1", spec.c1}, {"c2", spec.c2}, {"eps", spec.eps}}},
                       {"slices", spec.slices},
                       {"trend", to_string(spec.trend)},
                       {"gp_starts", spec.gp_starts},
                       {"convention", problem.convention()}};

    const Matrix x_test = gaussian_sample(spec.n_test, m, spec.seed + 1);
    const Vector y_test = solve_elliptic_batch(problem, x_test);

    const Matrix x_train = gaussian_sample(spec.M, m, spec.seed);
    detail::Stopwatch t1_clock;
    const Vector y_train = solve_elliptic_batch(problem, x_train);
    const double t1_base = t1_clock.seconds();
    const Dataset train(x_train, y_train);

    for (const auto& method : spec.methods) {
        if (method == "full") {
            for (auto d : spec.d_list) {
                const Eigen::Index extra = 10 * d;
                const Matrix x_extra = gaussian_sample(extra, m, spec.seed + 1000 + static_cast<std::uint64_t>(d));
                detail::Stopwatch t1_extra;
                const Vector y_extra = solve_elliptic_batch(problem, x_extra);
                const double t1 = t1_base + t1_extra.seconds();
                Matrix x_all(spec.M + extra, m);
                x_all << x_train, x_extra;
                Vector y_all(spec.M + extra);
                y_all << y_train, y_extra;

                detail::Stopwatch t3_clock;
                GpFitOptions opts;
                opts.nugget = NuggetPolicy::fixed(1e-8);
                opts.starts = spec.gp_starts;
                opts.seed = spec.seed;
                const GpModel gp = fit(Dataset(x_all, y_all), trend, opts);
                const Vector pred = gp.predict_mean(x_test);
                const double t3 = t3_clock.seconds();
                report.rows.push_back({"full", d, nprmse(y_test, pred), to_millis(t1), 0.0, to_millis(t3)});
            }
            continue;
        }

        ReducerConfig cfg;
        cfg.kind = reducer_from_string(method);
        cfg.c1 = spec.c1;
        cfg.c2 = spec.c2;
        cfg.eps = spec.eps;
        cfg.slices.num_slices = spec.slices;
        cfg.fd_step = spec.fd_step;
        cfg.d = *std::max_element(spec.d_list.begin(), spec.d_list.end());

        double t1 = t1_base;
        std::optional<Matrix> grads;
        if (cfg.kind == ReducerKind::as) {
            detail::Stopwatch g_clock;
            grads = gradient_batch(simulator, x_train, GradientSource::finite_difference(spec.fd_step));
            t1 += g_clock.seconds();
        }
        detail::Stopwatch t2_clock;
        const ProjectionResult full_proj = estimate_reduction(train, cfg, grads);
        const double t2 = t2_clock.seconds();

        for (auto d : spec.d_list) {
            const ProjectionResult proj = full_proj.truncated(d);
            detail::Stopwatch t3_clock;
            const Matrix train_features = proj.project(x_train);
            const std::uint64_t design_seed = spec.seed + 2000 + static_cast<std::uint64_t>(d);
            const Matrix z = latin_hypercube({padded_box(train_features), 10 * d, design_seed});
            const Matrix x_design =
                preimage_design(z, proj.basis, standard_normal_complement(design_seed ^ 0xc0ffeeULL));
            const Vector y_design = solve_elliptic_batch(problem, x_design);
            const GpModel gp = fit(Dataset(z, y_design), trend, reduced_gp_options(spec.gp_starts, spec.seed));
            const Vector pred = gp.predict_mean(proj.project(x_test));
            const double t3 = t3_clock.seconds();
            report.rows.push_back({method, d, nprmse(y_test, pred), to_millis(t1), std::max(0.001, to_millis(t2)),
                                   to_millis(t3)});
        }
    }
    report.sort_rows();
    return report;
}

/// Static SVG line chart of NPRMSE against d, one polyline per method.
inline std::string render_nprmse_svg(const BenchmarkReport& report) {
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    double dmin = 1e300, dmax = -1e300, ymax = 0.0;
    for (const auto& r : report.rows) {
        series[r.method].emplace_back(static_cast<double>(r.d), r.nprmse);
        dmin = std::min(dmin, static_cast<double>(r.d));
        dmax = std::max(dmax, static_cast<double>(r.d));
        ymax = std::max(ymax, r.nprmse);
    }
    if (dmax <= dmin) dmax = dmin + 1.0;
    if (ymax <= 0.0) ymax = 1.0;
    const double w = 640, h = 400, pad = 60;
    auto px = [&](double d) { return pad + (d - dmin) / (dmax - dmin) * (w - 2 * pad); };
    auto py = [&](double y) { return h - pad - y / (1.05 * ymax) * (h - 2 * pad); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"" << h - 15 << "\" text-anchor=\"middle\">d</text>\n";
    os << "<text x=\"15\" y=\"" << h / 2 << "\" transform=\"rotate(-90 15 " << h / 2
       << ")\" text-anchor=\"middle\">NPRMSE</text>\n";
    for (double d = dmin; d <= dmax + 1e-9; d += 1.0)
        os << "<text x=\"" << px(d) << "\" y=\"" << h - pad + 18 << "\" text-anchor=\"middle\">" << d << "</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double y = 1.05 * ymax * k / 4.0;
        os << "<text x=\"" << pad - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << std::setprecision(3)
           << y << std::setprecision(2) << "</text>\n";
    }
    std::size_t idx = 0;
    for (auto& [name, pts] : series) {
        std::sort(pts.begin(), pts.end());
        const char* color = colors[idx % (sizeof(colors) / sizeof(colors[0]))];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [d, y] : pts) os << px(d) << ',' << py(y) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << w - pad + 5 << "\" y=\"" << pad + 16.0 * static_cast<double>(idx) << "\" fill=\"" << color
           << "\">" << name << "</text>\n";
        ++idx;
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace dremu

#endif  // DREMU_STUDY_HPP
