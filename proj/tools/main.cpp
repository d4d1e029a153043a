// SPDX-License-Identifier: MIT
//
// roughcli: command-line front end for the library.  Subcommands compute
// polyline signatures, verify rough-path axioms, lift controlled paths,
// evaluate rough integrals, solve differential equations, run the identity
// battery and operate on manifold-valued paths, all over the JSON/CSV
// formats of rough/io.hpp.
//
// Exit codes: 0 every requested check passed, 1 a tolerance was violated,
// 2 malformed input or arguments, 3 numerical non-convergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rough/identities.hpp"
#include "rough/io.hpp"
#include "rough/manifold.hpp"
#include "rough/rde.hpp"

namespace {

using rough::io::json;

constexpr int kExitPass = 0;
constexpr int kExitToleranceViolation = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitNoConvergence = 3;

struct RunConfig {
    double p = 2.5;
    int level = 0;  // 0 means floor(p)
    double tol = 1e-6;
    int max_depth = 14;
    std::string format = "json";
    unsigned seed = 0;
    std::string config_file;
    std::string output_file;
    std::string input;
    std::string suite = "core";
    int grid = 9;
    std::string command;
};

/// The config file overrides command-line flags for the shared options.
void apply_config_overrides(RunConfig& cfg) {
    if (cfg.config_file.empty()) return;
    const json doc = rough::io::read_json_file(cfg.config_file);
    if (!doc.is_object())
        throw std::invalid_argument("config file must hold a JSON object");
    if (doc.contains("p")) cfg.p = doc.at("p").get<double>();
    if (doc.contains("level")) cfg.level = doc.at("level").get<int>();
    if (doc.contains("tol")) cfg.tol = doc.at("tol").get<double>();
    if (doc.contains("depth")) cfg.max_depth = doc.at("depth").get<int>();
    if (doc.contains("format")) cfg.format = doc.at("format").get<std::string>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<unsigned>();
    if (doc.contains("grid")) cfg.grid = doc.at("grid").get<int>();
    if (doc.contains("suite")) cfg.suite = doc.at("suite").get<std::string>();
}

void validate_config(const RunConfig& cfg) {
    if (!(cfg.p >= 1.0 && cfg.p < 4.0))
        throw std::invalid_argument("p must lie in [1, 4)");
    if (cfg.level < 0 || cfg.level > 6)
        throw std::invalid_argument("level must lie in [0, 6]");
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (cfg.max_depth < 1 || cfg.max_depth > 30)
        throw std::invalid_argument("depth must lie in [1, 30]");
    if (cfg.format != "json" && cfg.format != "csv")
        throw std::invalid_argument("format must be json or csv");
    if (cfg.grid < 2) throw std::invalid_argument("grid must be >= 2");
}

int effective_level(const RunConfig& cfg) {
    return cfg.level > 0 ? cfg.level : rough::path::floor_p(cfg.p);
}

json meta_json(const RunConfig& cfg) {
    return json{{"command", cfg.command},
                {"p", cfg.p},
                {"level", effective_level(cfg)},
                {"tol", cfg.tol},
                {"depth", cfg.max_depth},
                {"format", cfg.format},
                {"seed", cfg.seed},
                {"config", cfg.config_file.empty() ? json(nullptr) : json(cfg.config_file)},
                {"input", cfg.input.empty() ? json(nullptr) : json(cfg.input)}};
}

/// Sink for the chosen output destination (file or stdout).
class OutputSink {
public:
    explicit OutputSink(const RunConfig& cfg) {
        if (!cfg.output_file.empty()) {
            file_.open(cfg.output_file);
            if (!file_)
                throw std::invalid_argument("cannot open output file " + cfg.output_file);
        }
    }

    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

    void write_json(const json& doc) { stream() << doc.dump(2) << "\n"; }

    /// CSV outputs carry the metadata as leading '#' comment lines so the
    /// data stays machine-readable by the CSV reader.
    void write_csv_meta(const RunConfig& cfg) {
        json meta = meta_json(cfg);
        for (const auto& [key, value] : meta.items())
            stream() << "# " << key << "=" << (value.is_string() ? value.get<std::string>()
                                                                 : value.dump())
                     << "\n";
    }

private:
    std::ofstream file_;
};

std::string word_label(const rough::words::Word& w) {
    std::string out;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) out.push_back('.');
        out += std::to_string(w[static_cast<std::size_t>(i)]);
    }
    return out;
}

json check_json(const rough::identities::CheckResult& r) {
    return json{{"name", r.name}, {"defect", r.defect}, {"threshold", r.threshold},
                {"pass", r.pass}};
}

std::filesystem::path base_dir_of(const std::string& input) {
    const std::filesystem::path p(input);
    return p.has_parent_path() ? p.parent_path() : std::filesystem::path(".");
}

// ---------------------------------------------------------------------------
// sig: CSV polyline -> signature tensor over the whole interval.
// ---------------------------------------------------------------------------

int cmd_sig(const RunConfig& cfg) {
    const rough::io::PathSamples samples = rough::io::read_path_csv_file(cfg.input);
    const rough::path::RoughPath x =
        rough::path::pwl_signature(samples.times, samples.points, effective_level(cfg), cfg.p);
    const auto tensor = x.eval(x.t0(), x.T());
    OutputSink sink(cfg);
    if (cfg.format == "csv") {
        sink.write_csv_meta(cfg);
        sink.stream() << "level,word,value\n" << std::setprecision(17);
        for (int n = 0; n <= tensor.cap(); ++n)
            for (std::size_t r = 0; r < tensor.level(n).size(); ++r)
                sink.stream() << n << ',' << word_label(rough::tensor::word_unrank(r, n, x.dim()))
                              << ',' << tensor.level(n)[r] << "\n";
    } else {
        sink.write_json(json{{"meta", meta_json(cfg)},
                             {"tensor", rough::io::tensor_to_json(tensor)}});
    }
    return kExitPass;
}

// ---------------------------------------------------------------------------
// check: CSV polyline -> axiom report.
// ---------------------------------------------------------------------------

int cmd_check(const RunConfig& cfg) {
    const rough::io::PathSamples samples = rough::io::read_path_csv_file(cfg.input);
    const rough::path::RoughPath x =
        rough::path::pwl_signature(samples.times, samples.points, effective_level(cfg), cfg.p);
    const auto grid = rough::io::uniform_grid(x.t0(), x.T(), cfg.grid);
    const rough::path::AxiomReport report = rough::path::check_rough_axioms(x, grid, cfg.tol);

    std::vector<rough::identities::CheckResult> checks{
        {"chen-multiplicativity", report.mult_defect, cfg.tol,
         report.mult_defect <= cfg.tol},
        {"shuffle-identity", report.shuffle_defect, cfg.tol, report.shuffle_defect <= cfg.tol}};
    bool pass = true;
    for (const auto& c : checks) pass = pass && c.pass;

    OutputSink sink(cfg);
    if (cfg.format == "csv") {
        sink.write_csv_meta(cfg);
        sink.stream() << "name,defect,threshold,pass\n" << std::setprecision(17);
        for (const auto& c : checks)
            sink.stream() << c.name << ',' << c.defect << ',' << c.threshold << ','
                          << (c.pass ? "true" : "false") << "\n";
    } else {
        json list = json::array();
        for (const auto& c : checks) list.push_back(check_json(c));
        sink.write_json(json{{"meta", meta_json(cfg)},
                             {"checks", std::move(list)},
                             {"regularity",
                              json{{"constant", report.regularity_constant},
                                   {"max_ratio", report.regularity_max_ratio}}},
                             {"pass", pass}});
    }
    return pass ? kExitPass : kExitToleranceViolation;
}

// ---------------------------------------------------------------------------
// lift / integrate: controlled-path specs.
// ---------------------------------------------------------------------------

/// {"driver": <driver spec>, "integrand": {"jets": <polynomial spec>,
///  "rows": ..?, "cols": ..?}}; the returned controlled path owns its driver.
rough::controlled::ControlledPath parse_integrand(const json& spec, const RunConfig& cfg) {
    const json& driver_spec = rough::io::detail::require(spec, "driver", "integrand spec");
    const rough::path::RoughPath driver =
        rough::io::driver_from_json(driver_spec, base_dir_of(cfg.input));
    const json& integrand = rough::io::detail::require(spec, "integrand", "integrand spec");
    const rough::controlled::JetFunction f =
        rough::io::jetfunction_from_json(rough::io::detail::require(integrand, "jets",
                                                                    "integrand spec"));
    const int rows = integrand.value("rows", f.out_dim());
    const int cols = integrand.value("cols", 1);
    return rough::controlled::controlled_from_function(f, driver, rows, cols);
}

int cmd_lift(const RunConfig& cfg) {
    const json spec = rough::io::read_json_file(cfg.input);
    const rough::controlled::ControlledPath h = parse_integrand(spec, cfg);
    const rough::path::RoughPath lifted = rough::controlled::lift(h, cfg.tol, cfg.max_depth);
    OutputSink sink(cfg);
    json dump = rough::io::roughpath_to_json(lifted, cfg.grid);
    dump["meta"] = meta_json(cfg);
    sink.write_json(dump);
    return kExitPass;
}

int cmd_integrate(const RunConfig& cfg) {
    const json spec = rough::io::read_json_file(cfg.input);
    const rough::controlled::ControlledPath h = parse_integrand(spec, cfg);
    const rough::controlled::ControlledPath integral =
        rough::controlled::controlled_integral(h, cfg.tol, cfg.max_depth);

    rough::io::PathSamples samples;
    samples.times =
        rough::io::uniform_grid(h.reference().t0(), h.reference().T(), cfg.grid);
    for (double t : samples.times) samples.points.push_back(integral.trace(t));

    OutputSink sink(cfg);
    if (cfg.format == "csv") {
        sink.write_csv_meta(cfg);
        rough::io::write_path_csv(sink.stream(), samples);
    } else {
        json rows = json::array();
        for (std::size_t i = 0; i < samples.times.size(); ++i)
            rows.push_back(json{{"t", samples.times[i]}, {"value", samples.points[i]}});
        sink.write_json(json{{"meta", meta_json(cfg)}, {"samples", std::move(rows)}});
    }
    return kExitPass;
}

// ---------------------------------------------------------------------------
// rde: scenario -> solution dump.
// ---------------------------------------------------------------------------

int cmd_rde(const RunConfig& cfg) {
    const json spec = rough::io::read_json_file(cfg.input);
    rough::io::RdeScenario scenario =
        rough::io::rde_scenario_from_json(spec, base_dir_of(cfg.input));
    if (!spec.contains("tol")) scenario.tol = cfg.tol;
    if (!spec.contains("max_depth")) scenario.max_depth = cfg.max_depth;

    const rough::rde::RdeSolution solution = rough::rde::solve(
        scenario.field, scenario.driver, scenario.y0, scenario.tol, scenario.max_depth);

    rough::io::PathSamples samples;
    samples.times = rough::io::uniform_grid(scenario.driver.t0(), scenario.driver.T(), cfg.grid);
    for (double t : samples.times) samples.points.push_back(solution.trace(t));

    OutputSink sink(cfg);
    if (cfg.format == "csv") {
        sink.write_csv_meta(cfg);
        rough::io::write_path_csv(sink.stream(), samples);
    } else {
        json rows = json::array();
        for (std::size_t i = 0; i < samples.times.size(); ++i)
            rows.push_back(json{{"t", samples.times[i]}, {"y", samples.points[i]}});
        sink.write_json(json{{"meta", meta_json(cfg)},
                             {"samples", std::move(rows)},
                             {"jets", rough::io::controlled_to_json(solution.controlled(),
                                                                    samples.times)}});
    }
    return kExitPass;
}

// ---------------------------------------------------------------------------
// identities: the defect battery.
// ---------------------------------------------------------------------------

int cmd_identities(const RunConfig& cfg) {
    const rough::identities::Battery battery =
        rough::identities::run_battery(cfg.suite, cfg.tol, cfg.seed);
    OutputSink sink(cfg);
    if (cfg.format == "csv") {
        sink.write_csv_meta(cfg);
        sink.stream() << "name,defect,threshold,pass\n" << std::setprecision(17);
        for (const auto& c : battery.results)
            sink.stream() << c.name << ',' << c.defect << ',' << c.threshold << ','
                          << (c.pass ? "true" : "false") << "\n";
    } else {
        json list = json::array();
        for (const auto& c : battery.results) list.push_back(check_json(c));
        sink.write_json(json{{"meta", meta_json(cfg)},
                             {"checks", std::move(list)},
                             {"worst_defect", battery.worst_defect()},
                             {"pass", battery.pass()}});
    }
    return battery.pass() ? kExitPass : kExitToleranceViolation;
}

// ---------------------------------------------------------------------------
// manifold: validate / integrate / solve on chart presentations.
// ---------------------------------------------------------------------------

/// Default partition: piece boundaries refined to cut inside every overlap.
std::vector<double> default_partition(const rough::manifold::ManifoldRoughPath& X) {
    std::vector<double> cuts{X.t0()};
    const auto& pieces = X.pieces();
    for (std::size_t i = 0; i + 1 < pieces.size(); ++i)
        cuts.push_back(0.5 * (pieces[i + 1].a + pieces[i].b));
    cuts.push_back(X.T());
    return cuts;
}

int cmd_manifold(const RunConfig& cfg) {
    const json spec = rough::io::read_json_file(cfg.input);
    const std::filesystem::path base = base_dir_of(cfg.input);
    const std::string where = "manifold spec";
    const rough::manifold::Atlas atlas =
        rough::io::atlas_from_json(rough::io::detail::require(spec, "atlas", where));
    const std::string op = rough::io::detail::text(spec, "op", where);
    const rough::manifold::ManifoldRoughPath X = rough::io::manifold_path_from_json(
        atlas, rough::io::detail::require(spec, "path", where), base);
    OutputSink sink(cfg);

    if (op == "validate") {
        const rough::manifold::ValidationReport report =
            rough::manifold::validate(X, cfg.tol, cfg.grid);
        json pieces = json::array();
        for (const auto& pc : report.pieces)
            pieces.push_back(json{{"chart", pc.chart},
                                  {"chen_defect", pc.axioms.mult_defect},
                                  {"shuffle_defect", pc.axioms.shuffle_defect}});
        json overlaps = json::array();
        for (const auto& ov : report.overlaps)
            overlaps.push_back(json{{"left", ov.left},
                                    {"right", ov.right},
                                    {"transition_defect", ov.push_defect},
                                    {"trace_defect", ov.trace_defect}});
        const bool pass = report.pass(cfg.tol);
        sink.write_json(json{
            {"meta", meta_json(cfg)},
            {"checks",
             json::array({check_json({"chart-axioms", report.worst_axiom_defect, cfg.tol,
                                      report.worst_axiom_defect <= cfg.tol}),
                          check_json({"overlap-agreement", report.worst_overlap_defect, cfg.tol,
                                      report.worst_overlap_defect <= cfg.tol})})},
            {"pieces", std::move(pieces)},
            {"overlaps", std::move(overlaps)},
            {"pass", pass}});
        return pass ? kExitPass : kExitToleranceViolation;
    }

    if (op == "integrate") {
        const json& form = rough::io::detail::require(spec, "form", where);
        const int target_dim = rough::io::detail::integer(form, "target_dim", where);
        const json& coeff_spec = rough::io::detail::require(form, "coefficients", where);
        std::map<std::string, rough::controlled::JetFunction> coefficients;
        for (const auto& [chart, jets] : coeff_spec.items())
            coefficients.emplace(chart, rough::io::jetfunction_from_json(jets));
        const rough::manifold::ManifoldControlledIntegrand H =
            rough::manifold::one_form_integrand(X, coefficients, target_dim);
        const std::vector<double> partition =
            spec.contains("partition")
                ? rough::io::detail::number_list(spec.at("partition"), where)
                : default_partition(X);
        const rough::manifold::IntegralPath result =
            rough::manifold::manifold_rough_integral(H, X, partition, cfg.tol);
        json rows = json::array();
        for (std::size_t i = 0; i < result.times.size(); ++i)
            rows.push_back(json{{"t", result.times[i]}, {"value", result.values[i]}});
        sink.write_json(json{{"meta", meta_json(cfg)},
                             {"samples", std::move(rows)},
                             {"value", result.value()}});
        return kExitPass;
    }

    if (op == "solve") {
        const json& rde_spec = rough::io::detail::require(spec, "rde", where);
        const rough::manifold::Atlas target = rough::io::atlas_from_json(
            rough::io::detail::require(rde_spec, "target_atlas", where));
        const json& fields = rough::io::detail::require(rde_spec, "fields", where);
        rough::manifold::FieldTable table(target.dim(), atlas.dim());
        if (!fields.is_array() || fields.empty())
            throw std::invalid_argument(where + ": \"fields\" must be a non-empty array");
        for (const json& f : fields)
            table.set(rough::io::detail::text(f, "solution_chart", where),
                      rough::io::detail::text(f, "driver_chart", where),
                      rough::io::jetfunction_from_json(
                          rough::io::detail::require(f, "jets", where)));
        rough::manifold::ScheduleOptions options;
        options.margin = rde_spec.value("margin", options.margin);
        options.tol = rde_spec.value("tol", options.tol);
        options.max_depth = rde_spec.value("max_depth", options.max_depth);
        const std::vector<double> y0 = rough::io::detail::number_list(
            rough::io::detail::require(rde_spec, "y0", where), where);
        const rough::manifold::ManifoldRoughPath Y =
            rough::manifold::solve_manifold_rde(table, X, y0, target, options);
        json dump = rough::io::manifold_path_to_json(Y, std::min(cfg.grid, 5));
        dump["meta"] = meta_json(cfg);
        sink.write_json(dump);
        return kExitPass;
    }

    throw std::invalid_argument(where + ": unknown op \"" + op + "\"");
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    CLI::App app{"rough-path toolkit: signatures, integrals, differential equations and "
                 "manifold operations"};
    app.require_subcommand(1);
    app.fallthrough();  // accept the shared flags after the subcommand name too

    app.add_option("--p", cfg.p, "regularity exponent in [1, 4)")->capture_default_str();
    app.add_option("--level", cfg.level, "truncation level (default: floor(p))");
    app.add_option("--tol", cfg.tol, "tolerance for checks and quadrature")
        ->capture_default_str();
    app.add_option("--depth", cfg.max_depth, "maximum refinement depth")->capture_default_str();
    app.add_option("--format", cfg.format, "output format: json or csv")->capture_default_str();
    app.add_option("--seed", cfg.seed, "seed for randomized suites")->capture_default_str();
    app.add_option("--config", cfg.config_file, "JSON config file; overrides flags");
    app.add_option("--output", cfg.output_file, "output file (default: stdout)");
    app.add_option("--grid", cfg.grid, "sample grid size for dumps and checks")
        ->capture_default_str();

    auto* sig = app.add_subcommand("sig", "signature of a CSV polyline");
    sig->add_option("input", cfg.input, "path CSV (t,x1,..,xd)")->required();
    auto* check = app.add_subcommand("check", "rough-path axiom report for a CSV polyline");
    check->add_option("input", cfg.input, "path CSV (t,x1,..,xd)")->required();
    auto* lift = app.add_subcommand("lift", "lift a controlled path to a rough path");
    lift->add_option("input", cfg.input, "controlled-path spec JSON")->required();
    auto* integrate = app.add_subcommand("integrate", "indefinite rough integral");
    integrate->add_option("input", cfg.input, "integrand spec JSON")->required();
    auto* rde = app.add_subcommand("rde", "solve a rough differential equation");
    rde->add_option("input", cfg.input, "scenario JSON")->required();
    auto* identities = app.add_subcommand("identities", "run the identity defect battery");
    identities->add_option("--suite", cfg.suite, "core or extended")->capture_default_str();
    auto* manifold = app.add_subcommand("manifold", "validate/integrate/solve on atlases");
    manifold->add_option("input", cfg.input, "manifold scenario JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitBadInput;
    }

    try {
        apply_config_overrides(cfg);
        validate_config(cfg);
        if (sig->parsed()) cfg.command = "sig";
        if (check->parsed()) cfg.command = "check";
        if (lift->parsed()) cfg.command = "lift";
        if (integrate->parsed()) cfg.command = "integrate";
        if (rde->parsed()) cfg.command = "rde";
        if (identities->parsed()) cfg.command = "identities";
        if (manifold->parsed()) cfg.command = "manifold";

        if (cfg.command == "sig") return cmd_sig(cfg);
        if (cfg.command == "check") return cmd_check(cfg);
        if (cfg.command == "lift") return cmd_lift(cfg);
        if (cfg.command == "integrate") return cmd_integrate(cfg);
        if (cfg.command == "rde") return cmd_rde(cfg);
        if (cfg.command == "identities") return cmd_identities(cfg);
        if (cfg.command == "manifold") return cmd_manifold(cfg);
        throw std::invalid_argument("no subcommand selected");
    } catch (const rough::rde::ExplosionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoConvergence;
    }
}
