// SPDX-License-Identifier: Apache-2.0
//
// File formats: CSV datasets (header x1..xm, then y or y1..yk), CSV matrices,
// and JSON documents for projections and fitted emulators. Numbers are written
// in shortest round-trip form so that reloading is exact.

#ifndef DREMU_IO_HPP
#define DREMU_IO_HPP

#include "dremu/pipeline.hpp"

#include "json.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace dremu {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw InvalidInput(where + ": cannot parse '" + std::string(s) + "' as a finite number");
    return v;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + path + "'");
    out << text;
    if (!out) throw InvalidInput("error writing '" + path + "'");
}

inline nlohmann::json read_json_file(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) { write_text_file(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
    std::vector<std::string> header;
    Matrix values;
};

namespace detail {
inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}
}  // namespace detail

inline CsvTable parse_csv(const std::string& text, const std::string& name = "csv") {
    CsvTable table;
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_commas(line);
        if (table.header.empty()) {
            for (auto c : cells) table.header.push_back(detail::trim(c));
            continue;
        }
        if (cells.size() != table.header.size())
            throw InvalidInput(name + " line " + std::to_string(lineno) + ": expected " +
                               std::to_string(table.header.size()) + " fields, got " + std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (auto c : cells) row.push_back(parse_double(c, name + " line " + std::to_string(lineno)));
        rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw InvalidInput(name + ": empty file");
    table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return table;
}

inline std::string format_csv(const std::vector<std::string>& header, const Matrix& values) {
    if (static_cast<Eigen::Index>(header.size()) != values.cols()) throw InvalidInput("csv: header width mismatch");
    std::string out;
    for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
    out += '\n';
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            if (j) out += ',';
            out += format_double(values(i, j));
        }
        out += '\n';
    }
    return out;
}

inline std::vector<std::string> numbered_header(const std::string& prefix, Eigen::Index count) {
    std::vector<std::string> h;
    for (Eigen::Index j = 1; j <= count; ++j) h.push_back(prefix + std::to_string(j));
    return h;
}

/// Dataset columns: x1..xm, then either a single `y` or y1..yk.
inline Dataset dataset_from_csv(const std::string& text, const std::string& name = "dataset") {
    const CsvTable t = parse_csv(text, name);
    Eigen::Index m = 0;
    while (m < static_cast<Eigen::Index>(t.header.size()) && t.header[static_cast<std::size_t>(m)] == "x" + std::to_string(m + 1))
        ++m;
    const auto rest = static_cast<Eigen::Index>(t.header.size()) - m;
    if (m == 0) throw InvalidInput(name + ": header must start with x1");
    if (rest == 0) throw InvalidInput(name + ": no response column");
    const bool single = rest == 1 && t.header.back() == "y";
    if (!single)
        for (Eigen::Index k = 0; k < rest; ++k)
            if (t.header[static_cast<std::size_t>(m + k)] != "y" + std::to_string(k + 1))
                throw InvalidInput(name + ": unexpected column '" + t.header[static_cast<std::size_t>(m + k)] +
                                   "' (expected x1..xm then y or y1..yk)");
    if (t.values.rows() == 0) throw InvalidInput(name + ": no data rows");
    Dataset d(Matrix(t.values.leftCols(m)), Matrix(t.values.rightCols(rest)));
    d.validate();
    return d;
}

inline std::string dataset_to_csv(const Dataset& data) {
    auto header = numbered_header("x", data.input_dim());
    if (data.response_dim() == 1) {
        header.emplace_back("y");
    } else {
        const auto ys = numbered_header("y", data.response_dim());
        header.insert(header.end(), ys.begin(), ys.end());
    }
    Matrix all(data.size(), data.input_dim() + data.response_dim());
    all << data.inputs, data.responses;
    return format_csv(header, all);
}

inline Dataset read_dataset(const std::string& path) { return dataset_from_csv(read_text_file(path), path); }
inline void write_dataset(const std::string& path, const Dataset& data) { write_text_file(path, dataset_to_csv(data)); }

/// Plain numeric matrix with any header (used for gradients and prediction inputs).
inline Matrix read_matrix(const std::string& path) {
    const CsvTable t = parse_csv(read_text_file(path), path);
    if (t.values.rows() == 0) throw InvalidInput(path + ": no data rows");
    return t.values;
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace detail {
inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw InvalidInput(what + ": expected a nonempty array of rows");
    const auto cols = j.front().size();
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw InvalidInput(what + ": ragged rows");
        for (std::size_t k = 0; k < cols; ++k) {
            if (!j[i][k].is_number()) throw InvalidInput(what + ": non-numeric entry");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
        }
    }
    return m;
}

inline nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw InvalidInput(what + ": expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InvalidInput(what + ": non-numeric entry");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Projection documents

inline nlohmann::json reducer_config_to_json(const ReducerConfig& cfg) {
    return {{"method", to_string(cfg.kind)},
            {"d", cfg.d},
            {"c1", cfg.c1},
            {"c2", cfg.c2},
            {"eps", cfg.eps},
            {"standardize", cfg.standardize},
            {"slices", cfg.slices.num_slices},
            {"fd_step", cfg.fd_step},
            {"retained", cfg.retained}};
}

/// Basis is stored row-major as m rows of d entries.
inline nlohmann::json projection_to_json(const ProjectionResult& proj, const std::vector<Eigen::Index>& retained = {},
                                         const nlohmann::json& config = nullptr,
                                         std::optional<std::uint64_t> seed = std::nullopt) {
    nlohmann::json j = {{"format", "dremu-projection"},
                        {"version", kVersion},
                        {"method", proj.method},
                        {"input_dim", proj.input_dim()},
                        {"d", proj.dim()},
                        {"basis", detail::matrix_to_json(proj.basis)},
                        {"eigenvalues", detail::vector_to_json(proj.eigenvalues)},
                        {"matrix_trace", proj.matrix_trace},
                        {"retained", retained}};
    if (!config.is_null()) j["config"] = config;
    if (seed) j["seed"] = *seed;
    return j;
}

struct ProjectionDocument {
    ProjectionResult projection;
    std::vector<Eigen::Index> retained;
};

inline ProjectionDocument projection_from_json(const nlohmann::json& j) {
    try {
        ProjectionDocument doc;
        doc.projection.method = j.at("method").get<std::string>();
        doc.projection.basis = detail::matrix_from_json(j.at("basis"), "projection basis");
        doc.projection.eigenvalues = detail::vector_from_json(j.at("eigenvalues"), "projection eigenvalues");
        doc.projection.matrix_trace = j.value("matrix_trace", 0.0);
        doc.projection.directions = doc.projection.basis;
        if (j.contains("retained")) doc.retained = j.at("retained").get<std::vector<Eigen::Index>>();
        if (doc.projection.basis.cols() != j.at("d").get<Eigen::Index>())
            throw InvalidInput("projection: basis width does not match d");
        return doc;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("projection document: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Emulator documents

inline nlohmann::json gp_to_json(const GpModel& gp) {
    return {{"trend", to_string(gp.trend().kind)},
            {"log_lengthscales", detail::vector_to_json(gp.hyperparameters().log_lengthscales)},
            {"nugget", gp.hyperparameters().nugget},
            {"variance", gp.variance()},
            {"log_likelihood", gp.log_likelihood()},
            {"training_inputs", detail::matrix_to_json(gp.training_inputs())},
            {"training_outputs", detail::vector_to_json(gp.training_outputs())}};
}

inline GpModel gp_from_json(const nlohmann::json& j) {
    try {
        return GpModel::assemble(detail::matrix_from_json(j.at("training_inputs"), "gp training inputs"),
                                 detail::vector_from_json(j.at("training_outputs"), "gp training outputs"),
                                 TrendBasis{trend_from_string(j.at("trend").get<std::string>())},
                                 detail::vector_from_json(j.at("log_lengthscales"), "gp length scales"),
                                 j.at("nugget").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("gp document: ") + e.what());
    }
}

/// A GP on raw inputs, or on reduced features when a projection is attached.
struct EmulatorDocument {
    GpModel gp;
    std::optional<ProjectionDocument> projection;
    Eigen::Index input_dim = 0;
    nlohmann::json provenance = nlohmann::json::object();

    [[nodiscard]] Matrix features(const Matrix& x) const {
        if (x.cols() != input_dim)
            throw InvalidInput("emulator expects " + std::to_string(input_dim) + " inputs, got " +
                               std::to_string(x.cols()));
        if (!projection) return x;
        return reduced_features(x, projection->projection, projection->retained);
    }
    [[nodiscard]] Vector predict_mean(const Matrix& x) const { return gp.predict_mean(features(x)); }
    [[nodiscard]] GpPrediction predict(const Matrix& x) const { return gp.predict(features(x)); }
};

inline nlohmann::json emulator_to_json(const EmulatorDocument& em) {
    nlohmann::json j = {{"format", "dremu-emulator"},
                        {"version", kVersion},
                        {"input_dim", em.input_dim},
                        {"gp", gp_to_json(em.gp)},
                        {"provenance", em.provenance}};
    if (em.projection) j["projection"] = projection_to_json(em.projection->projection, em.projection->retained);
    return j;
}

inline EmulatorDocument emulator_from_json(const nlohmann::json& j) {
    try {
        if (j.value("format", "") != "dremu-emulator") throw InvalidInput("not an emulator document");
        std::optional<ProjectionDocument> proj;
        if (j.contains("projection")) proj = projection_from_json(j.at("projection"));
        EmulatorDocument em{gp_from_json(j.at("gp")), std::move(proj), j.at("input_dim").get<Eigen::Index>(),
                            j.value("provenance", nlohmann::json::object())};
        const Eigen::Index expected =
            em.projection ? em.projection->projection.dim() + static_cast<Eigen::Index>(em.projection->retained.size())
                          : em.input_dim;
        if (em.gp.input_dim() != expected) throw InvalidInput("emulator: GP input dimension inconsistent");
        return em;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("emulator document: ") + e.what());
    }
}

inline EmulatorDocument to_document(const ReducedEmulator& em) {
    const auto& p = em.provenance();
    nlohmann::json prov = {{"reducer", reducer_config_to_json(p.reducer)},
                           {"training_mode", p.training_mode},
                           {"design_size", p.design_size},
                           {"seed", p.seed}};
    return {em.gp(), ProjectionDocument{em.projection(), em.retained()}, em.input_dim(), prov};
}

}  // namespace dremu

#endif  // DREMU_IO_HPP
