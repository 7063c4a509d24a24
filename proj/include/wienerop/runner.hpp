#pragma once

#include "wienerop/config.hpp"
#include "wienerop/report.hpp"
#include "wienerop/scenarios.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace wienerop {

/// Process exit codes.
namespace exit_code {
inline constexpr int pass = 0;
inline constexpr int numerical_failure = 1;
inline constexpr int rejected = 2;
inline constexpr int usage = 3;
}  // namespace exit_code

namespace detail {

inline std::string default_kernel(const std::string& type) {
    if (type == "transf" || type == "inverse") return "rank1:b=0.3";
    if (type == "surjective" || type == "laplace" || type == "integrability") return "rank1:b=0.5";
    if (type == "harmonic") return "volterra";
    if (type == "cameron_martin") return "const:c=1";
    return "zero";
}

inline std::string default_functional(const std::string& type) {
    if (type == "surjective" || type == "laplace" || type == "harmonic" || type == "integrability") return "one";
    return "cos_end";
}

}  // namespace detail

/// Runs one configured scenario (a Laplace sweep yields one report per lambda).
inline std::vector<ScenarioReport> run_scenario(const ScenarioConfig& sc, const RunConfig& cfg) {
    const std::string spec = sc.kernel.value_or(detail::default_kernel(sc.type));
    const TestFunctional f = parse_functional(sc.functional.value_or(detail::default_functional(sc.type)));
    ScenarioSettings s;
    s.dim = spec_dimension(parse_kernel_spec(spec), cfg.dim);
    s.grid = TimeGrid(cfg.horizon, cfg.n_steps);
    s.samples = sc.samples.value_or(cfg.samples);
    s.seed = sc.seed.value_or(cfg.seed);
    s.tolerance = sc.tolerance.value_or(cfg.tolerance);
    s.operator_tol = cfg.operator_tol;

    const std::string& t = sc.type;
    if (t == "finite_dim") {
        Eigen::MatrixXd a = sc.matrix.value_or(Eigen::Vector2d(0.2, -0.1).asDiagonal().toDenseMatrix());
        return {verify_finite_dim(a, f, s)};
    }
    if (t == "gencv") return {verify_gencv_example(sc.b1.value_or(-2.0), sc.b2.value_or(-3.0), f, s)};

    const MatrixKernel kernel = kernel_zoo(spec, s.grid, s.dim);
    if (t == "transf") return {verify_transf(kernel, spec, f, s)};
    if (t == "inverse") return {verify_inverse(kernel, spec, f, s)};
    if (t == "surjective") return {verify_surjective(kernel, spec, f, s)};
    if (t == "laplace") {
        const std::vector<double> lambdas = sc.lambdas.empty() ? std::vector<double>{0.25, 0.5, 0.75} : sc.lambdas;
        return sweep_laplace(kernel, spec, lambdas, f, s);
    }
    if (t == "harmonic") return {verify_harmonic(kernel, spec, sc.x, sc.lambda.value_or(1.0), f, s)};
    if (t == "cameron_martin") return {verify_cameron_martin(kernel, spec, f, s)};
    if (t == "integrability") return {verify_integrability_bound(kernel, spec, s)};
    throw ConfigError("unknown scenario type '" + t + "'");
}

/// 0 if every verdict passes, 1 on any failure or singular operator, else 2
/// if some scenario was rejected by its hypothesis gate.
inline int exit_code_for(const std::vector<ScenarioReport>& reports) {
    bool rejected = false;
    for (const auto& r : reports) {
        if (r.verdict == Verdict::fail || r.verdict == Verdict::singular) return exit_code::numerical_failure;
        if (r.verdict == Verdict::rejected_by_hypothesis) rejected = true;
    }
    return rejected ? exit_code::rejected : exit_code::pass;
}

inline std::string format_number(const std::optional<double>& v, int precision = 6) {
    if (!v) return "-";
    std::ostringstream os;
    os << std::setprecision(precision) << *v;
    return os.str();
}

/// Human-readable table: scenario, Lambda, det2, z, verdict.
inline void print_table(std::ostream& os, const std::vector<ScenarioReport>& reports) {
    os << std::left << std::setw(16) << "scenario" << std::setw(28) << "kernel" << std::setw(14) << "Lambda"
       << std::setw(14) << "det2" << std::setw(12) << "z" << "verdict\n";
    for (const auto& r : reports) {
        std::optional<double> det;
        if (r.det2) det = r.det2->value();
        std::optional<double> z = r.z_score;
        std::string z_text = format_number(z, 4);
        if (!z && r.comparison == "consistency") z_text = "median";
        os << std::left << std::setw(16) << r.name << std::setw(28) << (r.kernel_spec + " ") << std::setw(14)
           << format_number(r.lambda_eta) << std::setw(14) << format_number(det) << std::setw(12) << z_text
           << to_string(r.verdict) << '\n';
    }
}

/// Writes report.json and/or report.csv under `dir`. Throws std::runtime_error on I/O failure.
inline void write_reports(const std::vector<ScenarioReport>& reports, const std::string& dir, OutputFormat format) {
    std::filesystem::create_directories(dir);
    auto open = [&](const std::string& name) {
        std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + (std::filesystem::path(dir) / name).string());
        return out;
    };
    if (format != OutputFormat::csv) {
        auto out = open("report.json");
        out << to_json(reports).dump(2) << '\n';
        if (!out) throw std::runtime_error("write failed: report.json");
    }
    if (format != OutputFormat::json) {
        auto out = open("report.csv");
        write_csv(out, reports);
        if (!out) throw std::runtime_error("write failed: report.csv");
    }
}

inline constexpr const char* kOutDirEnv = "WIENEROP_OUT_DIR";

/// Output directory when neither a flag nor the config names one.
inline std::string default_output_dir() {
    const char* env = std::getenv(kOutDirEnv);
    return env && *env ? std::string(env) : std::string("wienerop-out");
}

struct RunResult {
    int exit_code = exit_code::pass;
    std::vector<ScenarioReport> reports;
};

inline RunResult run(const RunConfig& cfg, std::ostream* table = nullptr, bool write = true) {
    RunResult result;
    for (const auto& sc : cfg.scenarios) {
        auto reports = run_scenario(sc, cfg);
        result.reports.insert(result.reports.end(), reports.begin(), reports.end());
    }
    if (table) print_table(*table, result.reports);
    if (write) write_reports(result.reports, cfg.out_dir.empty() ? default_output_dir() : cfg.out_dir, cfg.format);
    result.exit_code = exit_code_for(result.reports);
    return result;
}

}  // namespace wienerop
