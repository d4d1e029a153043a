// SPDX-License-Identifier: MIT
//
// Serialization for the library's value types: JSON codecs for tensor series
// (floating-point or exact rational coefficients), rough-path and controlled-
// path dumps, polynomial jet specifications, driver/field/scenario documents
// and chart atlases, plus the `t,x1,..,xd` CSV format for sampled paths.
//
// Readers validate shapes eagerly and throw std::invalid_argument with a
// context-carrying message on malformed input.  Rational coefficients are
// written as exact "numerator/denominator" strings, so a rational round trip
// is bit-exact; doubles go through the JSON number shortest-round-trip
// encoding of the vendored parser.
//
// This header depends on the vendored single-header nlohmann/json; keep the
// vendor directory on the include path when consuming it.

#pragma once

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rough/controlled.hpp"
#include "rough/manifold.hpp"
#include "rough/rde.hpp"
#include "rough/roughpath.hpp"
#include "rough/tensor.hpp"

namespace rough::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Scalar codecs
// ---------------------------------------------------------------------------

/// Coefficient encoding per scalar mode.  Doubles are JSON numbers; exact
/// rationals are "p/q" strings (or plain "p" for integers) and reparse to the
/// identical value.
template <class Scalar>
struct ScalarCodec;

template <>
struct ScalarCodec<double> {
    static constexpr const char* mode() { return "double"; }
    static json encode(double v) { return v; }
    static double decode(const json& j, const std::string& where) {
        if (!j.is_number())
            throw std::invalid_argument(where + ": expected a numeric coefficient");
        return j.get<double>();
    }
};

template <>
struct ScalarCodec<tensor::Rational> {
    static constexpr const char* mode() { return "rational"; }
    static json encode(const tensor::Rational& v) { return v.str(); }
    static tensor::Rational decode(const json& j, const std::string& where) {
        if (!j.is_string())
            throw std::invalid_argument(where + ": expected a \"p/q\" string coefficient");
        try {
            return tensor::Rational(j.get<std::string>());
        } catch (const std::exception&) {
            throw std::invalid_argument(where + ": malformed rational literal " + j.dump());
        }
    }
};

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key))
        throw std::invalid_argument(where + ": missing required key \"" + key + "\"");
    return j.at(key);
}

inline double number(const json& j, const char* key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_number()) throw std::invalid_argument(where + ": \"" + key + "\" must be a number");
    return v.get<double>();
}

inline int integer(const json& j, const char* key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_number_integer())
        throw std::invalid_argument(where + ": \"" + key + "\" must be an integer");
    return v.get<int>();
}

inline std::string text(const json& j, const char* key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_string()) throw std::invalid_argument(where + ": \"" + key + "\" must be a string");
    return v.get<std::string>();
}

inline std::vector<double> number_list(const json& v, const std::string& where) {
    if (!v.is_array()) throw std::invalid_argument(where + ": expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const json& e : v) {
        if (!e.is_number()) throw std::invalid_argument(where + ": expected an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tensor series
// ---------------------------------------------------------------------------

/// {"d": .., "N": .., "scalar": "double"|"rational", "levels": [[..] per n]}
/// with level-n coefficients in lexicographic word order (the library's
/// storage order), so index r at level n is the word word_unrank(r, n, d).
template <class Scalar>
json tensor_to_json(const tensor::TensorSeries<Scalar>& a) {
    json levels = json::array();
    for (int n = 0; n <= a.cap(); ++n) {
        json block = json::array();
        for (const Scalar& c : a.level(n)) block.push_back(ScalarCodec<Scalar>::encode(c));
        levels.push_back(std::move(block));
    }
    return json{{"d", a.dim()}, {"N", a.cap()}, {"scalar", ScalarCodec<Scalar>::mode()},
                {"levels", std::move(levels)}};
}

template <class Scalar>
tensor::TensorSeries<Scalar> tensor_from_json(const json& j) {
    const std::string where = "tensor_from_json";
    const int d = detail::integer(j, "d", where);
    const int cap = detail::integer(j, "N", where);
    if (d < 1 || cap < 0) throw std::invalid_argument(where + ": need d >= 1 and N >= 0");
    if (j.contains("scalar") && j.at("scalar").get<std::string>() != ScalarCodec<Scalar>::mode())
        throw std::invalid_argument(where + ": scalar mode mismatch (document says " +
                                    j.at("scalar").get<std::string>() + ")");
    const json& levels = detail::require(j, "levels", where);
    if (!levels.is_array() || static_cast<int>(levels.size()) != cap + 1)
        throw std::invalid_argument(where + ": \"levels\" must hold N+1 blocks");
    tensor::TensorSeries<Scalar> out(d, cap);
    for (int n = 0; n <= cap; ++n) {
        const json& block = levels.at(static_cast<std::size_t>(n));
        if (!block.is_array() || block.size() != tensor::level_size(d, n))
            throw std::invalid_argument(where + ": level " + std::to_string(n) +
                                        " has the wrong number of coefficients");
        for (std::size_t r = 0; r < block.size(); ++r)
            out.level(n)[r] = ScalarCodec<Scalar>::decode(block.at(r), where);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sampled paths as CSV
// ---------------------------------------------------------------------------

/// A sampled path ready for pwl_signature: strictly increasing times and one
/// d-dimensional point per time.
struct PathSamples {
    std::vector<double> times;
    std::vector<std::vector<double>> points;

    int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
    std::size_t size() const { return times.size(); }
};

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream row(line);
    while (std::getline(row, cell, ',')) {
        // Trim surrounding blanks so "t, x1" headers are accepted.
        std::size_t b = 0, e = cell.size();
        while (b < e && std::isspace(static_cast<unsigned char>(cell[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(cell[e - 1]))) --e;
        cells.push_back(cell.substr(b, e - b));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace detail

/// Read the `t,x1,..,xd` format: a header row naming the columns, then rows
/// of numbers with strictly increasing t.  Lines starting with '#' and blank
/// lines are skipped.
inline PathSamples read_path_csv(std::istream& in, const std::string& source = "<stream>") {
    const std::string where = "read_path_csv(" + source + ")";
    std::string line;
    std::vector<std::string> header;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        header = detail::split_csv_row(line);
        break;
    }
    if (header.empty()) throw std::invalid_argument(where + ": missing header row");
    if (header.front() != "t" || header.size() < 2)
        throw std::invalid_argument(where + ": header must be t,x1,..,xd");
    for (std::size_t c = 1; c < header.size(); ++c)
        if (header[c] != "x" + std::to_string(c))
            throw std::invalid_argument(where + ": column " + std::to_string(c + 1) +
                                        " must be named x" + std::to_string(c));
    const std::size_t d = header.size() - 1;

    PathSamples out;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        const auto cells = detail::split_csv_row(line);
        if (cells.size() != d + 1)
            throw std::invalid_argument(where + ": row at line " + std::to_string(lineno) +
                                        " has " + std::to_string(cells.size()) +
                                        " cells, expected " + std::to_string(d + 1));
        std::vector<double> vals;
        vals.reserve(cells.size());
        for (const std::string& cell : cells) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument("trailing junk");
                vals.push_back(v);
            } catch (const std::exception&) {
                throw std::invalid_argument(where + ": bad number \"" + cell + "\" at line " +
                                            std::to_string(lineno));
            }
        }
        if (!out.times.empty() && !(vals.front() > out.times.back()))
            throw std::invalid_argument(where + ": times must strictly increase (line " +
                                        std::to_string(lineno) + ")");
        out.times.push_back(vals.front());
        out.points.emplace_back(vals.begin() + 1, vals.end());
    }
    if (out.times.size() < 2) throw std::invalid_argument(where + ": need at least two rows");
    return out;
}

inline PathSamples read_path_csv_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::invalid_argument("read_path_csv_file: cannot open " + file.string());
    return read_path_csv(in, file.string());
}

inline void write_path_csv(std::ostream& out, const PathSamples& samples) {
    const int d = samples.dim();
    if (samples.times.size() != samples.points.size() || d < 1)
        throw std::invalid_argument("write_path_csv: inconsistent samples");
    out << "t";
    for (int c = 1; c <= d; ++c) out << ",x" << c;
    out << "\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < samples.times.size(); ++i) {
        out << samples.times[i];
        for (double v : samples.points[i]) out << ',' << v;
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Rough-path and controlled-path dumps
// ---------------------------------------------------------------------------

/// Uniform sample grid over [a, b] with `points` nodes (endpoints included).
inline std::vector<double> uniform_grid(double a, double b, int points) {
    if (points < 2 || !(a < b)) throw std::invalid_argument("uniform_grid: bad range");
    std::vector<double> out(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        out[static_cast<std::size_t>(i)] =
            a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
    out.back() = b;
    return out;
}

/// Rough-path dump: header data plus one {s, t, tensor} record per ordered
/// grid pair, so Chen consistency can be re-checked from the file alone.
inline json roughpath_to_json(const path::RoughPath& x, int grid_points = 9) {
    const auto grid = uniform_grid(x.t0(), x.T(), grid_points);
    json records = json::array();
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = i + 1; j < grid.size(); ++j)
            records.push_back(json{{"s", grid[i]},
                                   {"t", grid[j]},
                                   {"tensor", tensor_to_json(x.eval(grid[i], grid[j]))}});
    json out{{"p", x.p()},       {"d", x.dim()},     {"level", x.level()},
             {"t0", x.t0()},     {"T", x.T()},       {"records", std::move(records)}};
    if (x.has_trace()) {
        json trace = json::array();
        for (double t : grid) trace.push_back(json{{"t", t}, {"x", x.trace(t)}});
        out["trace"] = std::move(trace);
    }
    return out;
}

/// Controlled-path dump: shape header plus one {t, jets} record per sample
/// time; jets hold the Gubinelli coefficient table level by level, each level
/// in lexicographic word order with the component index fastest.
inline json controlled_to_json(const controlled::ControlledPath& h,
                               const std::vector<double>& times) {
    json records = json::array();
    for (double t : times) {
        const controlled::ControlledJet jet = h.jet(t);
        json levels = json::array();
        for (const auto& lvl : jet.levels) levels.push_back(lvl);
        records.push_back(json{{"t", t}, {"jets", std::move(levels)}});
    }
    return json{{"d", h.reference().dim()},
                {"rows", h.rows()},
                {"cols", h.cols()},
                {"depth", h.depth()},
                {"records", std::move(records)}};
}

// ---------------------------------------------------------------------------
// Jet-function and field specifications
// ---------------------------------------------------------------------------

/// Polynomial map spec:
///   {"in": m, "out": w, "terms": [[{"coef": c, "exponents": [a1..am]}, ..]
///    one list per output component ..]}
inline controlled::JetFunction jetfunction_from_json(const json& j) {
    const std::string where = "jetfunction_from_json";
    const int in = detail::integer(j, "in", where);
    const int out = detail::integer(j, "out", where);
    const json& terms = detail::require(j, "terms", where);
    if (!terms.is_array() || static_cast<int>(terms.size()) != out)
        throw std::invalid_argument(where + ": \"terms\" must hold one list per component");
    std::vector<std::vector<std::pair<double, std::vector<int>>>> table;
    table.reserve(terms.size());
    for (const json& comp : terms) {
        if (!comp.is_array())
            throw std::invalid_argument(where + ": each component must be a term list");
        std::vector<std::pair<double, std::vector<int>>> parsed;
        parsed.reserve(comp.size());
        for (const json& term : comp) {
            const double coef = detail::number(term, "coef", where);
            const json& expo = detail::require(term, "exponents", where);
            if (!expo.is_array() || static_cast<int>(expo.size()) != in)
                throw std::invalid_argument(where + ": exponent tuples must have length " +
                                            std::to_string(in));
            std::vector<int> alpha;
            alpha.reserve(expo.size());
            for (const json& e : expo) {
                if (!e.is_number_integer() || e.get<int>() < 0)
                    throw std::invalid_argument(where + ": exponents must be integers >= 0");
                alpha.push_back(e.get<int>());
            }
            parsed.emplace_back(coef, std::move(alpha));
        }
        table.push_back(std::move(parsed));
    }
    return controlled::JetFunction::polynomial(in, out, table);
}

/// Vector-field spec for the solver:
///   {"kind": "polynomial", "driver_dim": d, "jets": <polynomial spec R^e -> R^{e d}>}
///   {"kind": "linear", "matrices": [A_1 .. A_d]}   (one e x e matrix per letter)
///   {"kind": "constant", "matrix": a}              (e x d)
inline rde::VectorFieldJet field_from_json(const json& j) {
    const std::string where = "field_from_json";
    const std::string kind = detail::text(j, "kind", where);
    if (kind == "polynomial") {
        const int d = detail::integer(j, "driver_dim", where);
        return rde::VectorFieldJet(jetfunction_from_json(detail::require(j, "jets", where)), d);
    }
    if (kind == "linear") {
        const json& mats = detail::require(j, "matrices", where);
        if (!mats.is_array() || mats.empty())
            throw std::invalid_argument(where + ": \"matrices\" must be a non-empty array");
        std::vector<std::vector<std::vector<double>>> a;
        for (const json& mat : mats) {
            if (!mat.is_array()) throw std::invalid_argument(where + ": matrices must be arrays");
            std::vector<std::vector<double>> rows;
            for (const json& row : mat) rows.push_back(detail::number_list(row, where));
            a.push_back(std::move(rows));
        }
        return rde::VectorFieldJet::linear(a);
    }
    if (kind == "constant") {
        const json& mat = detail::require(j, "matrix", where);
        if (!mat.is_array()) throw std::invalid_argument(where + ": \"matrix\" must be an array");
        std::vector<std::vector<double>> rows;
        for (const json& row : mat) rows.push_back(detail::number_list(row, where));
        return rde::VectorFieldJet::constant(rows);
    }
    throw std::invalid_argument(where + ": unknown field kind \"" + kind + "\"");
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

/// Driver spec -> rough path.
///   {"kind": "csv", "file": "path.csv", "p": 2.5, "level": 2?}
///   {"kind": "inline", "p": .., "level": ..?, "times": [..], "points": [[..] ..]}
///   {"kind": "pure_area", "a": <area rate>, "p": ..(2,3), "t0": ..?, "T": ..?}
/// The pure-area driver is planar: X^2_{st} = (t-s) a (e1^e2 - e2^e1)/.. with
/// zero trace.
/// Relative csv file names resolve against base_dir (the directory of the
/// document that referenced them).  Level defaults to floor(p).
inline path::RoughPath driver_from_json(const json& j,
                                             const std::filesystem::path& base_dir = ".") {
    const std::string where = "driver_from_json";
    const std::string kind = detail::text(j, "kind", where);
    if (kind == "pure_area") {
        const double a = detail::number(j, "a", where);
        const double p = detail::number(j, "p", where);
        const double t0 = j.value("t0", 0.0);
        const double T = j.value("T", 1.0);
        tensor::TensorSeries<double> area(2, 2);
        area.coeff({1, 2}) = a;
        area.coeff({2, 1}) = -a;
        return path::pure_area_path(area, p, t0, T);
    }
    const double p = detail::number(j, "p", where);
    const int level = j.contains("level") ? detail::integer(j, "level", where)
                                          : path::floor_p(p);
    PathSamples samples;
    if (kind == "csv") {
        std::filesystem::path file(detail::text(j, "file", where));
        if (file.is_relative()) file = base_dir / file;
        samples = read_path_csv_file(file);
    } else if (kind == "inline") {
        samples.times = detail::number_list(detail::require(j, "times", where), where);
        const json& pts = detail::require(j, "points", where);
        if (!pts.is_array()) throw std::invalid_argument(where + ": \"points\" must be an array");
        for (const json& row : pts) samples.points.push_back(detail::number_list(row, where));
    } else {
        throw std::invalid_argument(where + ": unknown driver kind \"" + kind + "\"");
    }
    return path::pwl_signature(samples.times, samples.points, level, p);
}

// ---------------------------------------------------------------------------
// Solver scenarios
// ---------------------------------------------------------------------------

/// Parsed `rde` scenario:
///   {"driver": <driver spec>, "field": <field spec>, "y0": [..],
///    "tol": ..?, "max_depth": ..?}
struct RdeScenario {
    path::RoughPath driver;
    rde::VectorFieldJet field;
    std::vector<double> y0;
    double tol = 1e-6;
    int max_depth = 14;
};

inline RdeScenario rde_scenario_from_json(const json& j,
                                          const std::filesystem::path& base_dir = ".") {
    const std::string where = "rde_scenario_from_json";
    RdeScenario out{driver_from_json(detail::require(j, "driver", where), base_dir),
                    field_from_json(detail::require(j, "field", where)),
                    detail::number_list(detail::require(j, "y0", where), where),
                    j.value("tol", 1e-6),
                    j.value("max_depth", 14)};
    if (out.field.driver_dim() != out.driver.dim())
        throw std::invalid_argument(where + ": field driver dimension " +
                                    std::to_string(out.field.driver_dim()) +
                                    " does not match the driver dimension " +
                                    std::to_string(out.driver.dim()));
    if (static_cast<int>(out.y0.size()) != out.field.state_dim())
        throw std::invalid_argument(where + ": y0 must have the field's state dimension");
    return out;
}

// ---------------------------------------------------------------------------
// Atlases and manifold documents
// ---------------------------------------------------------------------------

/// Axis-aligned chart domain: |pt_i - center_i| < half_widths_i * (1 - margin).
inline manifold::DomainPredicate box_domain(std::vector<double> center,
                                            std::vector<double> half_widths) {
    if (center.size() != half_widths.size() || center.empty())
        throw std::invalid_argument("box_domain: center/half_widths size mismatch");
    for (double h : half_widths)
        if (!(h > 0.0)) throw std::invalid_argument("box_domain: half widths must be positive");
    return [center = std::move(center), half_widths = std::move(half_widths)](
               const std::vector<double>& pt, double margin) {
        if (pt.size() < center.size()) return false;
        for (std::size_t i = 0; i < center.size(); ++i)
            if (!(std::abs(pt[i] - center[i]) < half_widths[i] * (1.0 - margin))) return false;
        return true;
    };
}

/// Chart spec variants:
///   {"kind": "angle", "id": .., "center": .., "gap": ..?}
///   {"kind": "stereographic", "id": .., "pole": +-1, "zmax": ..?}
///   {"kind": "flat", "id": .., "dim": .., "half_width": ..?}
///   {"kind": "polynomial", "id": .., "forward": <jets>, "inverse": <jets>,
///    "domain_box": {"center": [..], "half_widths": [..]}}
/// Polynomial charts carry forward: point -> coordinates and inverse:
/// coordinates -> point, with the box domain read on the ambient point.
inline manifold::Chart chart_from_json(const json& j) {
    const std::string where = "chart_from_json";
    const std::string kind = detail::text(j, "kind", where);
    const std::string id = detail::text(j, "id", where);
    if (kind == "angle") {
        const double center = detail::number(j, "center", where);
        if (j.contains("gap")) return manifold::angle_chart(id, center, j.at("gap").get<double>());
        return manifold::angle_chart(id, center);
    }
    if (kind == "stereographic") {
        const int pole = detail::integer(j, "pole", where);
        return manifold::stereographic_chart(id, pole, j.value("zmax", 0.8));
    }
    if (kind == "flat") {
        const int dim = detail::integer(j, "dim", where);
        const double half_width = j.value("half_width", 1e6);
        return manifold::Chart(id, controlled::JetFunction::identity(dim),
                               controlled::JetFunction::identity(dim),
                               box_domain(std::vector<double>(static_cast<std::size_t>(dim), 0.0),
                                          std::vector<double>(static_cast<std::size_t>(dim),
                                                              half_width)));
    }
    if (kind == "polynomial") {
        controlled::JetFunction fwd = jetfunction_from_json(detail::require(j, "forward", where));
        controlled::JetFunction inv = jetfunction_from_json(detail::require(j, "inverse", where));
        const json& box = detail::require(j, "domain_box", where);
        return manifold::Chart(
            id, std::move(fwd), std::move(inv),
            box_domain(detail::number_list(detail::require(box, "center", where), where),
                       detail::number_list(detail::require(box, "half_widths", where), where)));
    }
    throw std::invalid_argument(where + ": unknown chart kind \"" + kind + "\"");
}

/// {"name": .., "charts": [..]}, or the builtin names "circle", "sphere",
/// "sphere-frames" and {"name": "flat", "dim": .., "half_width": ..?}.
inline manifold::Atlas atlas_from_json(const json& j) {
    const std::string where = "atlas_from_json";
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        if (name == "circle") return manifold::circle_atlas();
        if (name == "sphere") return manifold::sphere_atlas();
        if (name == "sphere-frames") return manifold::sphere_frame_atlas();
        throw std::invalid_argument(where + ": unknown builtin atlas \"" + name + "\"");
    }
    const std::string name = detail::text(j, "name", where);
    if (name == "flat" && !j.contains("charts"))
        return manifold::flat_atlas(detail::integer(j, "dim", where), j.value("half_width", 1e6));
    const json& charts = detail::require(j, "charts", where);
    if (!charts.is_array() || charts.empty())
        throw std::invalid_argument(where + ": \"charts\" must be a non-empty array");
    std::vector<manifold::Chart> parsed;
    parsed.reserve(charts.size());
    for (const json& c : charts) parsed.push_back(chart_from_json(c));
    return manifold::Atlas(name, std::move(parsed));
}

/// Manifold path spec: coordinate drivers per chart piece.
///   {"pieces": [{"chart": id, "a": .., "b": .., "driver": <driver spec>}, ..]}
/// Each driver lives in the chart's coordinate space (dimension must equal
/// the atlas dimension).
inline manifold::ManifoldRoughPath manifold_path_from_json(
    const manifold::Atlas& atlas, const json& j,
    const std::filesystem::path& base_dir = ".") {
    const std::string where = "manifold_path_from_json";
    const json& pieces = detail::require(j, "pieces", where);
    if (!pieces.is_array() || pieces.empty())
        throw std::invalid_argument(where + ": \"pieces\" must be a non-empty array");
    std::vector<manifold::ChartPiece> parsed;
    parsed.reserve(pieces.size());
    for (const json& piece : pieces) {
        manifold::ChartPiece cp{detail::number(piece, "a", where),
                                detail::number(piece, "b", where),
                                detail::text(piece, "chart", where),
                                driver_from_json(detail::require(piece, "driver", where),
                                                 base_dir)};
        if (cp.path.dim() != atlas.dim())
            throw std::invalid_argument(where + ": piece driver dimension must equal the atlas "
                                        "coordinate dimension");
        parsed.push_back(std::move(cp));
    }
    return manifold::ManifoldRoughPath(atlas, std::move(parsed));
}

/// Manifold path dump: rough-path records per chart piece, tagged by chart id.
inline json manifold_path_to_json(const manifold::ManifoldRoughPath& X, int grid_points = 5) {
    json pieces = json::array();
    for (const manifold::ChartPiece& piece : X.pieces()) {
        json dump = roughpath_to_json(piece.path, grid_points);
        pieces.push_back(json{{"chart", piece.chart},
                              {"a", piece.a},
                              {"b", piece.b},
                              {"dump", std::move(dump)}});
    }
    return json{{"atlas", X.atlas().name()}, {"p", X.p()}, {"t0", X.t0()}, {"T", X.T()},
                {"pieces", std::move(pieces)}};
}

// ---------------------------------------------------------------------------
// Whole-file helpers
// ---------------------------------------------------------------------------

inline json read_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::invalid_argument("read_json_file: cannot open " + file.string());
    try {
        return json::parse(in, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
    } catch (const json::parse_error& err) {
        throw std::invalid_argument("read_json_file: " + file.string() + ": " + err.what());
    }
}

}  // namespace rough::io
