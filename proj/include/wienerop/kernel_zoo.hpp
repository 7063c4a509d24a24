#pragma once

// Text specs for every kernel family the library knows how to build.
//
// Grammar (whitespace is not allowed inside a spec):
//
//   spec    := name [ ':' param { ',' param } ]
//   param   := key '=' value
//   value   := number | '[' number { ',' number } ']'
//
//   zero                      kappa = 0
//   volterra                  kappa(t,s) = 1_{s<t} I_d
//   rank1:b=<r>[,n=<int>]     b e_n(t) e_n(s) I_d                       (n defaults to 1)
//   rank2:b=<r>,c=<r>[,which=1|2]
//                             which=1: b {e_1(s)e_1(t) + e_2(s)e_2(t)} I_d
//                             which=2: c {e_1(s)e_2(t) - e_2(s)e_1(t)} I_d
//   remark12:...              alias of rank2
//   remark_gencv:b1=<r>,b2=<r>
//                             b1 e_1(s)e_1(t) + b2 e_2(s)e_2(t), times I_d
//   expdiag:p=[<r>,...]       1_{s<t} diag(e^{(t-s)p_1}, ..., e^{(t-s)p_d}); d = len(p)
//   const:c=<r>               c I_d everywhere (a phi for Cameron-Martin kernels)
//   const_phi:c=<r>           kappa_phi built from phi = c I_d
//
// e_n(t) = sqrt(2/T) cos((n - 1/2) pi t / T), sampled at cell midpoints so
// the sampled family is exactly orthonormal under the weight step.

#include "wienerop/grid.hpp"
#include "wienerop/kernel.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wienerop {

inline constexpr std::string_view kKernelGrammar =
    "zero | volterra | rank1:b=<r>[,n=<int>] | rank2:b=<r>,c=<r>[,which=1|2] | "
    "remark12:b=<r>,c=<r>[,which=1|2] | remark_gencv:b1=<r>,b2=<r> | expdiag:p=[<r>,...] | "
    "const:c=<r> | const_phi:c=<r>";

struct KernelSpec {
    std::string name;
    std::map<std::string, std::string> params;
    std::string text;

    bool has(const std::string& key) const { return params.count(key) != 0; }
};

namespace detail {

[[noreturn]] inline void bad_spec(std::string_view text, const std::string& why,
                                  std::string_view grammar = kKernelGrammar) {
    throw std::invalid_argument("spec '" + std::string(text) + "': " + why + " (grammar: " +
                                std::string(grammar) + ")");
}

inline double parse_real(std::string_view s, std::string_view spec_text, const std::string& key) {
    double value = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
        bad_spec(spec_text, "parameter '" + key + "' is not a finite real: '" + std::string(s) + "'");
    }
    return value;
}

inline std::vector<double> parse_real_list(std::string_view s, std::string_view spec_text,
                                           const std::string& key) {
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
        bad_spec(spec_text, "parameter '" + key + "' must be a bracketed list");
    }
    std::vector<double> out;
    std::string_view body = s.substr(1, s.size() - 2);
    while (!body.empty()) {
        const auto comma = body.find(',');
        out.push_back(parse_real(body.substr(0, comma), spec_text, key));
        if (comma == std::string_view::npos) break;
        body.remove_prefix(comma + 1);
        if (body.empty()) bad_spec(spec_text, "trailing comma in '" + key + "'");
    }
    if (out.empty()) bad_spec(spec_text, "parameter '" + key + "' is an empty list");
    return out;
}

}  // namespace detail

/// Splits `name[:key=value,...]` into name and raw parameters. Commas inside
/// brackets belong to the value. `grammar` is quoted in error messages.
inline KernelSpec parse_spec(std::string_view text, std::string_view grammar) {
    KernelSpec spec;
    spec.text = std::string(text);
    const auto colon = text.find(':');
    spec.name = std::string(text.substr(0, colon));
    if (spec.name.empty()) detail::bad_spec(text, "empty kernel name", grammar);
    if (colon == std::string_view::npos) return spec;

    std::string_view rest = text.substr(colon + 1);
    if (rest.empty()) detail::bad_spec(text, "':' must be followed by parameters", grammar);
    std::size_t start = 0;
    int depth = 0;
    for (std::size_t i = 0; i <= rest.size(); ++i) {
        const bool end = i == rest.size();
        if (!end && rest[i] == '[') ++depth;
        if (!end && rest[i] == ']') --depth;
        if (depth < 0) detail::bad_spec(text, "unbalanced ']'", grammar);
        if (end || (rest[i] == ',' && depth == 0)) {
            std::string_view item = rest.substr(start, i - start);
            const auto eq = item.find('=');
            if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size()) {
                detail::bad_spec(text, "malformed parameter '" + std::string(item) + "', expected key=value", grammar);
            }
            std::string key(item.substr(0, eq));
            if (!spec.params.emplace(key, std::string(item.substr(eq + 1))).second) {
                detail::bad_spec(text, "duplicate parameter '" + key + "'", grammar);
            }
            start = i + 1;
        }
    }
    if (depth != 0) detail::bad_spec(text, "unbalanced '['", grammar);
    return spec;
}

inline KernelSpec parse_kernel_spec(std::string_view text) { return parse_spec(text, kKernelGrammar); }

/// e_n sampled at the cell midpoints of the grid.
inline Eigen::VectorXd cosine_basis(const TimeGrid& grid, int n) {
    if (n < 1) throw std::invalid_argument("cosine_basis: n must be >= 1");
    const double horizon = grid.horizon();
    const double freq = (n - 0.5) * std::numbers::pi / horizon;
    Eigen::VectorXd e(static_cast<Eigen::Index>(grid.size()));
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        e(i) = std::sqrt(2.0 / horizon) * std::cos(freq * grid.midpoint(static_cast<std::size_t>(i)));
    }
    return e;
}

/// Lifts an N x N scalar kernel to d x d blocks scalar(t_i,t_j) * I_d.
inline MatrixKernel scalar_times_identity(const TimeGrid& grid, int dim, const Eigen::MatrixXd& scalar,
                                          bool symmetric = false) {
    const auto n_nodes = scalar.rows();
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n_nodes * dim, n_nodes * dim);
    for (Eigen::Index i = 0; i < n_nodes; ++i) {
        for (Eigen::Index j = 0; j < n_nodes; ++j) {
            for (int a = 0; a < dim; ++a) values(i * dim + a, j * dim + a) = scalar(i, j);
        }
    }
    if (symmetric) values = 0.5 * (values + values.transpose()).eval();
    return MatrixKernel(grid, dim, std::move(values), symmetric);
}

inline MatrixKernel volterra_kernel(const TimeGrid& grid, int dim) {
    const auto n = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd scalar = Eigen::MatrixXd::Zero(n, n);
    scalar.triangularView<Eigen::StrictlyLower>().setOnes();
    return scalar_times_identity(grid, dim, scalar);
}

inline MatrixKernel rank_one_kernel(const TimeGrid& grid, int dim, double b, int n = 1) {
    const Eigen::VectorXd e = cosine_basis(grid, n);
    return scalar_times_identity(grid, dim, b * e * e.transpose(), true);
}

/// The pair (kappa_1, kappa_2) with eta(kappa_1) = eta(kappa_2) whenever 1 + c^2 = (1 + b)^2.
inline std::pair<MatrixKernel, MatrixKernel> remark_pair(const TimeGrid& grid, int dim, double b, double c) {
    const Eigen::VectorXd e1 = cosine_basis(grid, 1);
    const Eigen::VectorXd e2 = cosine_basis(grid, 2);
    // value at (t_i, t_j): the t-argument indexes rows
    Eigen::MatrixXd first = b * (e1 * e1.transpose() + e2 * e2.transpose());
    Eigen::MatrixXd second = c * (e2 * e1.transpose() - e1 * e2.transpose());
    return {scalar_times_identity(grid, dim, first, true), scalar_times_identity(grid, dim, second)};
}

inline MatrixKernel gencv_kernel(const TimeGrid& grid, int dim, double b1, double b2) {
    const Eigen::VectorXd e1 = cosine_basis(grid, 1);
    const Eigen::VectorXd e2 = cosine_basis(grid, 2);
    return scalar_times_identity(grid, dim, b1 * e1 * e1.transpose() + b2 * e2 * e2.transpose(), true);
}

inline MatrixKernel expdiag_kernel(const TimeGrid& grid, const std::vector<double>& rates) {
    const int dim = static_cast<int>(rates.size());
    return MatrixKernel::sample(grid, dim, [&](double t, double s) {
        Eigen::MatrixXd block = Eigen::MatrixXd::Zero(dim, dim);
        if (s < t) {
            for (int a = 0; a < dim; ++a) block(a, a) = std::exp((t - s) * rates[static_cast<std::size_t>(a)]);
        }
        return block;
    });
}

inline MatrixKernel constant_kernel(const TimeGrid& grid, int dim, double c) {
    const auto n = static_cast<Eigen::Index>(grid.size());
    return scalar_times_identity(grid, dim, Eigen::MatrixXd::Constant(n, n, c), true);
}

namespace detail {

inline void allow_only(const KernelSpec& spec, std::initializer_list<const char*> allowed,
                       std::initializer_list<const char*> required) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : spec.params) {
        if (!ok.count(key)) bad_spec(spec.text, "unknown parameter '" + key + "' for '" + spec.name + "'");
    }
    for (const char* key : required) {
        if (!spec.has(key)) bad_spec(spec.text, "missing parameter '" + std::string(key) + "'");
    }
}

inline double real_param(const KernelSpec& spec, const std::string& key) {
    return parse_real(spec.params.at(key), spec.text, key);
}

inline int int_param(const KernelSpec& spec, const std::string& key) {
    const std::string& raw = spec.params.at(key);
    int value = 0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (ec != std::errc() || ptr != raw.data() + raw.size()) {
        bad_spec(spec.text, "parameter '" + key + "' is not an integer: '" + raw + "'");
    }
    return value;
}

}  // namespace detail

/// Builds the named kernel on the grid. `dim` must match the family (expdiag
/// fixes d = len(p)).
inline MatrixKernel kernel_zoo(const KernelSpec& spec, const TimeGrid& grid, int dim) {
    if (dim < 1) throw std::invalid_argument("kernel_zoo: dim must be >= 1");
    using detail::allow_only;
    using detail::real_param;
    const std::string& name = spec.name;
    if (name == "zero") {
        allow_only(spec, {}, {});
        return MatrixKernel::zero(grid, dim);
    }
    if (name == "volterra") {
        allow_only(spec, {}, {});
        return volterra_kernel(grid, dim);
    }
    if (name == "rank1") {
        allow_only(spec, {"b", "n"}, {"b"});
        const int n = spec.has("n") ? detail::int_param(spec, "n") : 1;
        if (n < 1) detail::bad_spec(spec.text, "n must be >= 1");
        return rank_one_kernel(grid, dim, real_param(spec, "b"), n);
    }
    if (name == "rank2" || name == "remark12") {
        allow_only(spec, {"b", "c", "which"}, {"b", "c"});
        const int which = spec.has("which") ? detail::int_param(spec, "which") : 1;
        if (which != 1 && which != 2) detail::bad_spec(spec.text, "which must be 1 or 2");
        auto pair = remark_pair(grid, dim, real_param(spec, "b"), real_param(spec, "c"));
        return which == 1 ? std::move(pair.first) : std::move(pair.second);
    }
    if (name == "remark_gencv") {
        allow_only(spec, {"b1", "b2"}, {"b1", "b2"});
        return gencv_kernel(grid, dim, real_param(spec, "b1"), real_param(spec, "b2"));
    }
    if (name == "expdiag") {
        allow_only(spec, {"p"}, {"p"});
        auto rates = detail::parse_real_list(spec.params.at("p"), spec.text, "p");
        if (static_cast<int>(rates.size()) != dim) {
            detail::bad_spec(spec.text, "len(p) = " + std::to_string(rates.size()) +
                                            " does not match dimension d = " + std::to_string(dim));
        }
        return expdiag_kernel(grid, rates);
    }
    if (name == "const") {
        allow_only(spec, {"c"}, {"c"});
        return constant_kernel(grid, dim, real_param(spec, "c"));
    }
    if (name == "const_phi") {
        allow_only(spec, {"c"}, {"c"});
        return kappa_from_phi(constant_kernel(grid, dim, real_param(spec, "c")));
    }
    detail::bad_spec(spec.text, "unknown kernel name '" + name + "'");
}

inline MatrixKernel kernel_zoo(std::string_view text, const TimeGrid& grid, int dim) {
    return kernel_zoo(parse_kernel_spec(text), grid, dim);
}

/// Natural dimension of a spec: len(p) for expdiag, otherwise `fallback`.
inline int spec_dimension(const KernelSpec& spec, int fallback) {
    if (spec.name == "expdiag" && spec.has("p")) {
        return static_cast<int>(detail::parse_real_list(spec.params.at("p"), spec.text, "p").size());
    }
    return fallback;
}

}  // namespace wienerop
