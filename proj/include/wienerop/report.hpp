#pragma once

#include "wienerop/operator.hpp"
#include "wienerop/scenarios.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace wienerop {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

/// Round-trip exact decimal text for a double.
inline std::string exact_text(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline Json to_json(const Determinant& d) {
    Json j;
    j["singular"] = d.singular;
    j["sign"] = d.sign;
    j["log_modulus"] = d.singular ? Json(nullptr) : Json(d.log_modulus);
    j["value"] = d.singular ? 0.0 : d.value();
    return j;
}

inline Json to_json(const MCEstimate& e) {
    Json j;
    j["mean"] = e.mean;
    j["std_error"] = detail::optional_number(e.std_error);
    j["n_samples"] = e.n_samples;
    j["ci_valid"] = e.ci_valid;
    j["batch_median"] = e.batch_median;
    j["batch_low"] = e.batch_low;
    j["batch_high"] = e.batch_high;
    return j;
}

inline Json to_json(const SpectralSummary& s) {
    Json j;
    j["lambda_max"] = s.lambda_max;
    j["lambda_min"] = s.lambda_min;
    j["det2_sign"] = s.det2.sign;
    j["det2_singular"] = s.det2.singular;
    j["det2_log_modulus"] = s.det2.singular ? Json(nullptr) : Json(s.det2.log_modulus);
    j["det2"] = s.det2.value();
    j["trace"] = s.trace;
    j["hs_norm"] = s.hs_norm;
    return j;
}

inline Json to_json(const ScenarioReport& r) {
    Json j;
    j["scenario"] = r.name;
    j["verdict"] = to_string(r.verdict);
    j["kernel"] = r.kernel_spec;
    j["functional"] = r.functional;
    j["grid"] = Json{{"horizon", r.horizon}, {"n_steps", r.n_steps}};
    j["dim"] = r.dim;
    j["samples"] = r.samples;
    j["seed"] = r.seed;
    j["tolerance"] = r.tolerance;
    j["lambda_eta"] = detail::optional_number(r.lambda_eta);
    j["moment_guard"] = r.guard;
    j["det2"] = r.det2 ? to_json(*r.det2) : Json(nullptr);
    j["lhs"] = r.lhs ? to_json(*r.lhs) : Json(nullptr);
    if (r.rhs_exact) j["rhs"] = Json{{"exact", *r.rhs_exact}};
    else j["rhs"] = r.rhs ? to_json(*r.rhs) : Json(nullptr);
    j["comparison"] = r.comparison;
    j["z_score"] = detail::optional_number(r.z_score);
    j["relative_error"] = detail::optional_number(r.relative_error);
    Json checks = Json::array();
    for (const auto& c : r.checks) {
        checks.push_back(Json{{"name", c.name},
                              {"value", c.value},
                              {"expected", c.expected},
                              {"tolerance", c.tolerance},
                              {"pass", c.pass}});
    }
    j["checks"] = std::move(checks);
    Json values = Json::object();
    for (const auto& [k, v] : r.values) values[k] = v;
    j["values"] = std::move(values);
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

inline const char* kCsvHeader = "name,lhs,rhs,se,z,verdict,lambda_eta,det2_log,seed";

inline std::string csv_row(const ScenarioReport& r) {
    auto num = [](const std::optional<double>& v) { return v ? detail::exact_text(*v) : std::string(); };
    std::optional<double> lhs;
    std::optional<double> rhs;
    std::optional<double> se;
    if (r.lhs) {
        lhs = r.lhs->mean;
        const double right_se = r.rhs ? r.rhs->se_or_zero() : 0.0;
        if (r.lhs->std_error) se = std::hypot(*r.lhs->std_error, right_se);
        rhs = r.rhs_value();
    }
    std::optional<double> det_log;
    if (r.det2 && !r.det2->singular) det_log = r.det2->log_modulus;
    return r.name + "," + num(lhs) + "," + num(rhs) + "," + num(se) + "," + num(r.z_score) + "," +
           to_string(r.verdict) + "," + num(r.lambda_eta) + "," + num(det_log) + "," + std::to_string(r.seed);
}

inline void write_csv(std::ostream& os, const std::vector<ScenarioReport>& reports) {
    os << kCsvHeader << '\n';
    for (const auto& r : reports) os << csv_row(r) << '\n';
}

inline Json to_json(const std::vector<ScenarioReport>& reports) {
    Json arr = Json::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    return arr;
}

}  // namespace wienerop
