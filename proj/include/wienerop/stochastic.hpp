#pragma once

// Monte Carlo engine on the grid: Wiener increments, first- and second-chaos
// functionals, transformations of order one and Cameron-Martin exponents.
//
// A batch holds increments dW as an (N*d) x M matrix, one path per column,
// rows ordered (node, coordinate). Every per-path functional is then a GEMM
// followed by a column reduction.

#include "wienerop/errors.hpp"
#include "wienerop/grid.hpp"
#include "wienerop/kernel.hpp"
#include "wienerop/kernel_zoo.hpp"
#include "wienerop/operator.hpp"
#include "wienerop/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace wienerop {

class PathBatch {
public:
    PathBatch(TimeGrid grid, int dim, Eigen::MatrixXd increments, std::uint64_t seed = 0,
              std::uint64_t stream = 0, std::uint64_t first_index = 0)
        : grid_(grid), dim_(dim), increments_(std::move(increments)), seed_(seed), stream_(stream),
          first_index_(first_index) {
        if (dim < 1) throw std::invalid_argument("PathBatch: dim must be >= 1");
        if (increments_.rows() != static_cast<Eigen::Index>(grid_.size()) * dim_) {
            throw std::invalid_argument("PathBatch: increments must have N*d rows");
        }
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    int dim() const noexcept { return dim_; }
    Eigen::Index size() const noexcept { return increments_.cols(); }
    const Eigen::MatrixXd& increments() const noexcept { return increments_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    std::uint64_t first_index() const noexcept { return first_index_; }

    /// W at the left nodes t_0..t_{N-1} (W(t_0) = 0), (N*d) x M.
    Eigen::MatrixXd left_values() const {
        const auto n_nodes = static_cast<Eigen::Index>(grid_.size());
        Eigen::MatrixXd w(increments_.rows(), increments_.cols());
        w.topRows(dim_).setZero();
        for (Eigen::Index i = 1; i < n_nodes; ++i) {
            w.middleRows(i * dim_, dim_) = w.middleRows((i - 1) * dim_, dim_) +
                                           increments_.middleRows((i - 1) * dim_, dim_);
        }
        return w;
    }

    /// W at t_0..t_N = T, ((N+1)*d) x M.
    Eigen::MatrixXd path_values() const {
        Eigen::MatrixXd w(increments_.rows() + dim_, increments_.cols());
        w.topRows(increments_.rows()) = left_values();
        w.bottomRows(dim_) = w.middleRows(increments_.rows() - dim_, dim_) +
                             increments_.bottomRows(dim_);
        return w;
    }

    /// W(T), d x M.
    Eigen::MatrixXd terminal() const {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim_, increments_.cols());
        const auto n_nodes = static_cast<Eigen::Index>(grid_.size());
        for (Eigen::Index i = 0; i < n_nodes; ++i) out += increments_.middleRows(i * dim_, dim_);
        return out;
    }

    /// W(t_k) for k in [0, N], d x M.
    Eigen::MatrixXd value_at(std::size_t k) const {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim_, increments_.cols());
        for (std::size_t i = 0; i < k && i < grid_.size(); ++i) {
            out += increments_.middleRows(static_cast<Eigen::Index>(i) * dim_, dim_);
        }
        return out;
    }

    PathBatch with_increments(Eigen::MatrixXd increments) const {
        return PathBatch(grid_, dim_, std::move(increments), seed_, stream_, first_index_);
    }

private:
    TimeGrid grid_;
    int dim_;
    Eigen::MatrixXd increments_;
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t first_index_;
};

/// Paths first_index .. first_index + count - 1 of the (seed, stream) family.
/// Increments are N(0, step I_d); sample m depends only on (seed, stream, m).
inline PathBatch sample_paths(const TimeGrid& grid, int dim, std::size_t count, std::uint64_t seed,
                              std::uint64_t stream = 0, std::uint64_t first_index = 0) {
    if (dim < 1) throw std::invalid_argument("sample_paths: dim must be >= 1");
    const auto rows = static_cast<Eigen::Index>(grid.size()) * dim;
    const auto cols = static_cast<Eigen::Index>(count);
    Eigen::MatrixXd inc(rows, cols);
    const double sd = std::sqrt(grid.step());
#pragma omp parallel for schedule(static)
    for (Eigen::Index m = 0; m < cols; ++m) {
        auto engine = sample_engine(seed, stream, first_index + static_cast<std::uint64_t>(m));
        std::normal_distribution<double> normal(0.0, sd);
        double* column = inc.col(m).data();
        for (Eigen::Index r = 0; r < rows; ++r) column[r] = normal(engine);
    }
    return PathBatch(grid, dim, std::move(inc), seed, stream, first_index);
}

/// Standard normal n-vectors with the same per-sample keying, n x count.
inline Eigen::MatrixXd sample_gaussian_vectors(Eigen::Index n, std::size_t count, std::uint64_t seed,
                                               std::uint64_t stream = 0) {
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(count));
#pragma omp parallel for schedule(static)
    for (Eigen::Index m = 0; m < out.cols(); ++m) {
        auto engine = sample_engine(seed, stream, static_cast<std::uint64_t>(m));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index r = 0; r < n; ++r) out(r, m) = normal(engine);
    }
    return out;
}

/// Number of paths per chunk so that one chunk holds about 2^21 doubles.
inline std::size_t default_chunk(const TimeGrid& grid, int dim) {
    const std::size_t per_path = grid.size() * static_cast<std::size_t>(dim);
    return std::max<std::size_t>(64, (std::size_t{1} << 21) / std::max<std::size_t>(per_path, 1));
}

/// Evaluates `per_path` chunk by chunk over `count` paths and concatenates
/// the per-path values in sample order.
inline Eigen::VectorXd evaluate_paths(const TimeGrid& grid, int dim, std::size_t count, std::uint64_t seed,
                                      std::uint64_t stream,
                                      const std::function<Eigen::VectorXd(const PathBatch&)>& per_path) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(count));
    const std::size_t chunk = default_chunk(grid, dim);
    for (std::size_t start = 0; start < count; start += chunk) {
        const std::size_t len = std::min(chunk, count - start);
        const PathBatch batch = sample_paths(grid, dim, len, seed, stream, start);
        out.segment(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) = per_path(batch);
    }
    return out;
}

namespace detail {

inline void require_same_grid(const MatrixKernel& kernel, const PathBatch& paths, const char* what) {
    if (!(kernel.grid() == paths.grid()) || kernel.dim() != paths.dim()) {
        throw std::invalid_argument(std::string(what) + ": kernel and path batch live on different grids");
    }
}

/// Column-wise inner products <a_m, b_m>.
inline Eigen::VectorXd column_dots(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.cwiseProduct(b).colwise().sum().transpose();
}

}  // namespace detail

/// I[m][i] = sum_j kappa(t_i, t_j) dW[m][j], the discretized int kappa(t,s) dtheta(s).
inline Eigen::MatrixXd wiener_integral(const MatrixKernel& kappa, const PathBatch& paths) {
    detail::require_same_grid(kappa, paths, "wiener_integral");
    return kappa.values() * paths.increments();
}

/// iota + F_kappa: dW'[i] = dW[i] + I[i] * step.
inline PathBatch apply_transformation(const MatrixKernel& kappa, const PathBatch& paths) {
    detail::require_same_grid(kappa, paths, "apply_transformation");
    Eigen::MatrixXd inc = paths.increments();
    inc.noalias() += (kappa.values() * kappa.grid().step()) * paths.increments();
    return paths.with_increments(std::move(inc));
}

/// q_eta discretized as the centred second-chaos element
///   1/2 ( dW^T eta dW - step tr eta ),
/// i.e. 1/2 (x^T B x - tr B) with x = dW / sqrt(step) and B = assemble(eta).
/// It differs from the strictly lower Ito double sum by
/// 1/2 sum_i eta(t_i,t_i)(dW_i^2 - step), which vanishes in L^2 as step -> 0,
/// and it makes E[e^{q_eta}] = det2(I - B)^{-1/2} hold exactly on the grid.
class QuadraticForm {
public:
    explicit QuadraticForm(const MatrixKernel& eta)
        : grid_(eta.grid()), dim_(eta.dim()), eta_(eta.values()),
          centre_(0.5 * eta.grid().step() * eta.values().trace()) {
        if (!is_numerically_symmetric(eta.values())) {
            throw PreconditionViolation("quadratic_form: eta must satisfy eta(t,s)^T = eta(s,t)");
        }
    }

    Eigen::VectorXd operator()(const PathBatch& paths) const {
        if (!(grid_ == paths.grid()) || dim_ != paths.dim()) {
            throw std::invalid_argument("quadratic_form: kernel and path batch live on different grids");
        }
        const Eigen::VectorXd full = detail::column_dots(paths.increments(), eta_ * paths.increments());
        return (0.5 * full.array() - centre_).matrix();
    }

private:
    TimeGrid grid_;
    int dim_;
    Eigen::MatrixXd eta_;
    double centre_;
};

inline Eigen::VectorXd quadratic_form(const MatrixKernel& eta, const PathBatch& paths) {
    return QuadraticForm(eta)(paths);
}

/// h(kappa; x) = 1/2 sum_i <x, I_i>^2 step, or h(kappa) = 1/2 sum_i |I_i|^2 step.
inline Eigen::VectorXd h_functional(const MatrixKernel& kappa, const std::optional<Eigen::VectorXd>& x,
                                    const PathBatch& paths) {
    detail::require_same_grid(kappa, paths, "h_functional");
    const Eigen::MatrixXd integral = wiener_integral(kappa, paths);
    const double step = kappa.grid().step();
    if (!x) return 0.5 * step * integral.colwise().squaredNorm().transpose();
    if (x->size() != kappa.dim()) {
        throw std::invalid_argument("h_functional: x has the wrong dimension");
    }
    const int d = kappa.dim();
    const auto n_nodes = static_cast<Eigen::Index>(kappa.grid().size());
    Eigen::MatrixXd projected(n_nodes, integral.cols());
    for (Eigen::Index i = 0; i < n_nodes; ++i) {
        projected.row(i) = x->transpose() * integral.middleRows(i * d, d);
    }
    return 0.5 * step * projected.colwise().squaredNorm().transpose();
}

/// Pieces of the Cameron-Martin exponent Psi_phi evaluated per path, with W
/// taken at left nodes so that dW_j is independent of W(t_j).
struct CMExponent {
    Eigen::VectorXd stochastic_term;  ///< -sum_j < sum_i phi(t_i,t_j)^T dW_i, W_j > step
    Eigen::VectorXd energy_term;      ///< -1/2 sum_i | sum_j phi(t_i,t_j) W_j step |^2 step
    double trace_correction = 0.0;    ///< sum_j sum_{i<j} tr phi(t_i,t_j) step^2

    Eigen::VectorXd psi() const { return stochastic_term + energy_term; }
    Eigen::VectorXd psi_tilde() const { return psi().array() + trace_correction; }
};

/// Deterministic double quadrature of int_0^T int_0^s tr phi(t,s) dt ds (strict lower triangle).
inline double cm_trace_correction(const MatrixKernel& phi) {
    const auto n_nodes = phi.grid().size();
    const double step = phi.grid().step();
    double sum = 0.0;
    for (std::size_t j = 0; j < n_nodes; ++j) {
        for (std::size_t i = 0; i < j; ++i) sum += phi.at(i, j).trace();
    }
    return sum * step * step;
}

inline CMExponent cm_exponent(const MatrixKernel& phi, const PathBatch& paths) {
    detail::require_same_grid(phi, paths, "cm_exponent");
    const double step = phi.grid().step();
    const Eigen::MatrixXd w = paths.left_values();
    CMExponent out;
    out.stochastic_term = -step * detail::column_dots(w, phi.values().transpose() * paths.increments());
    const Eigen::MatrixXd drift = (phi.values() * step) * w;
    out.energy_term = -0.5 * step * drift.colwise().squaredNorm().transpose();
    out.trace_correction = cm_trace_correction(phi);
    return out;
}

/// iota + F_phi with F_phi' (t) = int phi(t,s) theta(s) ds, using left-node W.
inline PathBatch apply_linear_transformation(const MatrixKernel& phi, const PathBatch& paths) {
    detail::require_same_grid(phi, paths, "apply_linear_transformation");
    const double step = phi.grid().step();
    Eigen::MatrixXd inc = paths.increments();
    inc.noalias() += (phi.values() * (step * step)) * paths.left_values();
    return paths.with_increments(std::move(inc));
}

enum class MomentGuard { ok, ok_no_ci, reject };

inline const char* to_string(MomentGuard g) {
    switch (g) {
        case MomentGuard::ok: return "ok";
        case MomentGuard::ok_no_ci: return "ok_no_ci";
        case MomentGuard::reject: return "reject";
    }
    return "?";
}

/// e^{q_eta} is integrable iff Lambda(B_eta) < 1 and square integrable iff
/// Lambda(B_{2 eta}) = 2 Lambda(B_eta) < 1.
inline MomentGuard exp_q_moment_guard(double lambda) {
    if (!(lambda < 1.0 - kGateMargin)) return MomentGuard::reject;
    if (!(2.0 * lambda < 1.0 - kGateMargin)) return MomentGuard::ok_no_ci;
    return MomentGuard::ok;
}

inline MomentGuard exp_q_moment_guard(const MatrixKernel& eta) {
    return exp_q_moment_guard(lambda_max(assemble(eta)));
}

/// Bounded test functionals f on path space.
struct TestFunctional {
    enum class Kind { one, cos_end, exp_negsq, cos_mid };
    Kind kind = Kind::one;
    double a = 1.0;
    double tau = 0.0;
    std::string text = "one";

    bool is_constant() const noexcept { return kind == Kind::one; }

    /// f on each path of the batch.
    Eigen::VectorXd operator()(const PathBatch& paths) const {
        switch (kind) {
            case Kind::one: return Eigen::VectorXd::Ones(paths.size());
            case Kind::cos_end:
                return (a * paths.terminal().colwise().sum().transpose()).array().cos().matrix();
            case Kind::exp_negsq:
                return (-paths.terminal().colwise().squaredNorm().transpose()).array().exp().matrix();
            case Kind::cos_mid: {
                const auto k = paths.grid().nearest_index(tau);
                return (a * paths.value_at(k).row(0).transpose()).array().cos().matrix();
            }
        }
        return {};
    }

    /// f on a Gaussian vector x (finite-dimensional scenario).
    double on_vector(const Eigen::VectorXd& x) const {
        switch (kind) {
            case Kind::one: return 1.0;
            case Kind::cos_end: return std::cos(a * x.sum());
            case Kind::exp_negsq: return std::exp(-x.squaredNorm());
            case Kind::cos_mid: {
                const auto k = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::llround(tau)), 0,
                                                        x.size() - 1);
                return std::cos(a * x(k));
            }
        }
        return 0.0;
    }
};

inline constexpr std::string_view kFunctionalGrammar =
    "one | cos_end[:a=<r>] | exp_negsq | cos_mid:a=<r>,tau=<r>";

inline TestFunctional parse_functional(std::string_view text) {
    const KernelSpec spec = parse_spec(text, kFunctionalGrammar);
    TestFunctional f;
    f.text = std::string(text);
    auto reject_extra = [&](std::initializer_list<const char*> allowed) {
        for (const auto& [key, _] : spec.params) {
            if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; }) ==
                allowed.end()) {
                detail::bad_spec(text, "unknown parameter '" + key + "'", kFunctionalGrammar);
            }
        }
    };
    auto real = [&](const char* key) { return detail::parse_real(spec.params.at(key), text, key); };
    if (spec.name == "one") {
        reject_extra({});
        f.kind = TestFunctional::Kind::one;
    } else if (spec.name == "cos_end") {
        reject_extra({"a"});
        f.kind = TestFunctional::Kind::cos_end;
        if (spec.has("a")) f.a = real("a");
    } else if (spec.name == "exp_negsq") {
        reject_extra({});
        f.kind = TestFunctional::Kind::exp_negsq;
    } else if (spec.name == "cos_mid") {
        reject_extra({"a", "tau"});
        if (!spec.has("tau")) detail::bad_spec(text, "missing parameter 'tau'", kFunctionalGrammar);
        f.kind = TestFunctional::Kind::cos_mid;
        if (spec.has("a")) f.a = real("a");
        f.tau = real("tau");
    } else {
        detail::bad_spec(text, "unknown functional '" + spec.name + "'", kFunctionalGrammar);
    }
    return f;
}

// Binary path dump: little-endian
//   char[8] "WOPBATCH" | f64 T | u64 N | u64 d | u64 M | u64 seed | u64 stream | u64 first_index
//   M * N * d f64 increments, path-major then node then coordinate.
inline constexpr char kPathMagic[8] = {'W', 'O', 'P', 'B', 'A', 'T', 'C', 'H'};

inline void write_path_batch(std::ostream& os, const PathBatch& batch) {
    auto put = [&](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    os.write(kPathMagic, sizeof(kPathMagic));
    put(batch.grid().horizon());
    put(static_cast<std::uint64_t>(batch.grid().size()));
    put(static_cast<std::uint64_t>(batch.dim()));
    put(static_cast<std::uint64_t>(batch.size()));
    put(batch.seed());
    put(batch.stream());
    put(batch.first_index());
    // column-major storage is exactly path-major order
    os.write(reinterpret_cast<const char*>(batch.increments().data()),
             static_cast<std::streamsize>(batch.increments().size() * sizeof(double)));
    if (!os) throw std::runtime_error("write_path_batch: stream error");
}

inline PathBatch read_path_batch(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kPathMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("read_path_batch: not a path batch file");
    }
    auto get = [&](auto& v) { is.read(reinterpret_cast<char*>(&v), sizeof(v)); };
    double horizon = 0.0;
    std::uint64_t n = 0, d = 0, m = 0, seed = 0, stream = 0, first = 0;
    get(horizon);
    get(n);
    get(d);
    get(m);
    get(seed);
    get(stream);
    get(first);
    if (!is) throw std::runtime_error("read_path_batch: truncated header");
    TimeGrid grid(horizon, static_cast<std::size_t>(n));
    Eigen::MatrixXd inc(static_cast<Eigen::Index>(n * d), static_cast<Eigen::Index>(m));
    is.read(reinterpret_cast<char*>(inc.data()), static_cast<std::streamsize>(inc.size() * sizeof(double)));
    if (!is) throw std::runtime_error("read_path_batch: truncated payload");
    return PathBatch(grid, static_cast<int>(d), std::move(inc), seed, stream, first);
}

}  // namespace wienerop
