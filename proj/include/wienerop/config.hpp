#pragma once

// YAML run configuration. Example:
//
//   grid: {horizon: 1.0, n_steps: 256}
//   dim: 1
//   samples: 200000
//   seed: 42
//   tolerance: 0.02
//   output: {dir: out, format: both}
//   scenarios:
//     - type: transf
//       kernel: rank1:b=0.3
//       functional: cos_end
//     - type: harmonic
//       kernel: volterra
//       lambda: 1.0
//
// Unknown keys anywhere are errors. Every error carries the line and column
// of the offending node.

#include "wienerop/kernel_zoo.hpp"
#include "wienerop/stochastic.hpp"

#include <yaml-cpp/yaml.h>

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace wienerop {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OutputFormat { json, csv, both };

inline OutputFormat parse_format(const std::string& s) {
    if (s == "json") return OutputFormat::json;
    if (s == "csv") return OutputFormat::csv;
    if (s == "both") return OutputFormat::both;
    throw ConfigError("format: expected json, csv or both (got '" + s + "')");
}

inline const std::vector<std::string>& scenario_types() {
    static const std::vector<std::string> types{"finite_dim", "transf",  "inverse",  "surjective",   "laplace",
                                                "harmonic",   "cameron_martin", "gencv", "integrability"};
    return types;
}

struct ScenarioConfig {
    std::string type;
    std::optional<std::string> kernel;
    std::optional<std::string> functional;
    std::optional<double> tolerance;
    std::optional<std::size_t> samples;
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda;
    std::vector<double> lambdas;
    std::optional<Eigen::VectorXd> x;
    std::optional<Eigen::MatrixXd> matrix;
    std::optional<double> b1;
    std::optional<double> b2;
};

struct RunConfig {
    double horizon = 1.0;
    std::size_t n_steps = 256;
    int dim = 1;
    std::size_t samples = 200000;
    std::uint64_t seed = 42;
    double tolerance = 0.02;
    double operator_tol = 1e-8;
    std::string out_dir;  ///< empty: default_output_dir()
    OutputFormat format = OutputFormat::both;
    std::vector<ScenarioConfig> scenarios;
};

namespace detail {

inline std::string where(const YAML::Node& node) {
    const YAML::Mark m = node.Mark();
    if (m.is_null()) return "";
    return "line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ": ";
}

[[noreturn]] inline void config_fail(const YAML::Node& node, const std::string& field, const std::string& why) {
    throw ConfigError(where(node) + field + ": " + why);
}

template <class T>
T scalar(const YAML::Node& node, const std::string& field) {
    if (!node.IsScalar()) config_fail(node, field, "expected a scalar");
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        config_fail(node, field, "cannot convert '" + node.Scalar() + "'");
    }
}

inline void only_keys(const YAML::Node& map, const std::string& section, const std::set<std::string>& allowed) {
    if (!map.IsMap()) config_fail(map, section, "expected a mapping");
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            config_fail(kv.first, section.empty() ? key : section + "." + key, "unknown key");
        }
    }
}

inline std::vector<double> real_list(const YAML::Node& node, const std::string& field) {
    if (!node.IsSequence()) config_fail(node, field, "expected a list of numbers");
    std::vector<double> out;
    for (const auto& item : node) out.push_back(scalar<double>(item, field));
    return out;
}

inline ScenarioConfig parse_scenario(const YAML::Node& node, std::size_t index) {
    const std::string field = "scenarios[" + std::to_string(index) + "]";
    only_keys(node, field,
              {"type", "kernel", "functional", "tolerance", "samples", "seed", "lambda", "lambdas", "x", "matrix",
               "b1", "b2"});
    ScenarioConfig sc;
    if (!node["type"]) config_fail(node, field + ".type", "missing");
    sc.type = scalar<std::string>(node["type"], field + ".type");
    const auto& types = scenario_types();
    if (std::find(types.begin(), types.end(), sc.type) == types.end()) {
        std::string list;
        for (const auto& t : types) list += (list.empty() ? "" : ", ") + t;
        config_fail(node["type"], field + ".type", "unknown scenario '" + sc.type + "' (expected one of " + list + ")");
    }
    if (node["kernel"]) sc.kernel = scalar<std::string>(node["kernel"], field + ".kernel");
    if (node["functional"]) {
        sc.functional = scalar<std::string>(node["functional"], field + ".functional");
        try {
            parse_functional(*sc.functional);
        } catch (const std::invalid_argument& e) {
            config_fail(node["functional"], field + ".functional", e.what());
        }
    }
    if (node["tolerance"]) {
        sc.tolerance = scalar<double>(node["tolerance"], field + ".tolerance");
        if (!(*sc.tolerance >= 0.0)) config_fail(node["tolerance"], field + ".tolerance", "must be >= 0");
    }
    if (node["samples"]) {
        const auto m = scalar<long long>(node["samples"], field + ".samples");
        if (m < 1) config_fail(node["samples"], field + ".samples", "must be >= 1");
        sc.samples = static_cast<std::size_t>(m);
    }
    if (node["seed"]) sc.seed = scalar<std::uint64_t>(node["seed"], field + ".seed");
    if (node["lambda"]) {
        sc.lambda = scalar<double>(node["lambda"], field + ".lambda");
        if (!(*sc.lambda >= 0.0)) config_fail(node["lambda"], field + ".lambda", "must be >= 0");
    }
    if (node["lambdas"]) sc.lambdas = real_list(node["lambdas"], field + ".lambdas");
    if (node["x"]) {
        const auto v = real_list(node["x"], field + ".x");
        sc.x = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (node["matrix"]) {
        const YAML::Node& rows = node["matrix"];
        if (!rows.IsSequence() || rows.size() == 0) config_fail(rows, field + ".matrix", "expected a list of rows");
        const auto n = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd a(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto row = real_list(rows[static_cast<std::size_t>(i)], field + ".matrix");
            if (static_cast<Eigen::Index>(row.size()) != n) {
                config_fail(rows[static_cast<std::size_t>(i)], field + ".matrix", "matrix must be square");
            }
            for (Eigen::Index j = 0; j < n; ++j) a(i, j) = row[static_cast<std::size_t>(j)];
        }
        sc.matrix = a;
    }
    if (node["b1"]) sc.b1 = scalar<double>(node["b1"], field + ".b1");
    if (node["b2"]) sc.b2 = scalar<double>(node["b2"], field + ".b2");
    return sc;
}

}  // namespace detail

/// Parses and validates a YAML run configuration.
inline RunConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("line " + std::to_string(e.mark.line + 1) + ", column " + std::to_string(e.mark.column + 1) +
                          ": parse error: " + e.msg);
    }
    RunConfig cfg;
    if (!root || root.IsNull()) throw ConfigError("empty configuration");
    detail::only_keys(root, "",
                      {"grid", "dim", "samples", "seed", "tolerance", "operator_tolerance", "output", "scenarios"});
    using detail::config_fail;
    using detail::scalar;
    if (const YAML::Node grid = root["grid"]) {
        detail::only_keys(grid, "grid", {"horizon", "n_steps"});
        if (grid["horizon"]) {
            cfg.horizon = scalar<double>(grid["horizon"], "grid.horizon");
            if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) {
                config_fail(grid["horizon"], "grid.horizon", "must be a positive finite number");
            }
        }
        if (grid["n_steps"]) {
            const auto n = scalar<long long>(grid["n_steps"], "grid.n_steps");
            if (n < 2) config_fail(grid["n_steps"], "grid.n_steps", "must be >= 2 (got " + std::to_string(n) + ")");
            cfg.n_steps = static_cast<std::size_t>(n);
        }
    } else {
        throw ConfigError("grid: missing required section");
    }
    if (root["dim"]) {
        const auto d = scalar<long long>(root["dim"], "dim");
        if (d < 1) config_fail(root["dim"], "dim", "must be >= 1");
        cfg.dim = static_cast<int>(d);
    }
    if (root["samples"]) {
        const auto m = scalar<long long>(root["samples"], "samples");
        if (m < 1) config_fail(root["samples"], "samples", "must be >= 1");
        cfg.samples = static_cast<std::size_t>(m);
    }
    if (root["seed"]) cfg.seed = scalar<std::uint64_t>(root["seed"], "seed");
    if (root["tolerance"]) {
        cfg.tolerance = scalar<double>(root["tolerance"], "tolerance");
        if (!(cfg.tolerance >= 0.0)) config_fail(root["tolerance"], "tolerance", "must be >= 0");
    }
    if (root["operator_tolerance"]) {
        cfg.operator_tol = scalar<double>(root["operator_tolerance"], "operator_tolerance");
        if (!(cfg.operator_tol > 0.0)) config_fail(root["operator_tolerance"], "operator_tolerance", "must be > 0");
    }
    if (const YAML::Node out = root["output"]) {
        detail::only_keys(out, "output", {"dir", "format"});
        if (out["dir"]) cfg.out_dir = scalar<std::string>(out["dir"], "output.dir");
        if (out["format"]) {
            try {
                cfg.format = parse_format(scalar<std::string>(out["format"], "output.format"));
            } catch (const ConfigError& e) {
                config_fail(out["format"], "output.format", e.what());
            }
        }
    }
    const YAML::Node list = root["scenarios"];
    if (!list || !list.IsSequence() || list.size() == 0) {
        throw ConfigError(detail::where(root) + "scenarios: expected a non-empty list");
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
        ScenarioConfig sc = detail::parse_scenario(list[i], i);
        if (sc.kernel) {
            try {
                kernel_zoo(*sc.kernel, TimeGrid(cfg.horizon, 4), spec_dimension(parse_kernel_spec(*sc.kernel), cfg.dim));
            } catch (const std::invalid_argument& e) {
                config_fail(list[i]["kernel"], "scenarios[" + std::to_string(i) + "].kernel", e.what());
            }
        }
        cfg.scenarios.push_back(std::move(sc));
    }
    return cfg;
}

}  // namespace wienerop
