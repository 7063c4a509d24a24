// wienerop: command-line front end for the kernel, operator and scenario layers.

#include "wienerop/wienerop.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace wienerop;

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<std::size_t> grid;
    std::optional<double> horizon;
    std::optional<int> dim;
    std::optional<std::string> out;
    std::string format = "both";
};

struct VerifyOptions {
    std::string scenario;
    std::optional<std::string> kernel;
    std::optional<std::string> functional;
    std::optional<double> lambda;
    std::optional<double> tolerance;
    std::vector<double> x;
    std::vector<double> lambdas;
    std::vector<double> matrix;
    std::optional<double> b1;
    std::optional<double> b2;
};

/// Applies explicitly given global flags on top of a config.
void apply_overrides(RunConfig& cfg, const GlobalOptions& g) {
    if (g.seed) cfg.seed = *g.seed;
    if (g.paths) cfg.samples = *g.paths;
    if (g.grid) cfg.n_steps = *g.grid;
    if (g.horizon) cfg.horizon = *g.horizon;
    if (g.dim) cfg.dim = *g.dim;
    if (g.out) cfg.out_dir = *g.out;
}

TimeGrid grid_of(const GlobalOptions& g) { return TimeGrid(g.horizon.value_or(1.0), g.grid.value_or(256)); }

int kernel_dim(const std::string& spec, const GlobalOptions& g) {
    return spec_dimension(parse_kernel_spec(spec), g.dim.value_or(1));
}

Json provenance(const std::string& spec, const TimeGrid& grid, int dim) {
    return Json{{"kernel", spec}, {"grid", {{"horizon", grid.horizon()}, {"n_steps", grid.size()}}}, {"dim", dim}};
}

int cmd_spectrum(const std::string& spec, const GlobalOptions& g) {
    const TimeGrid grid = grid_of(g);
    const int dim = kernel_dim(spec, g);
    Json j = provenance(spec, grid, dim);
    j["spectrum"] = to_json(spectral_summary(kernel_zoo(spec, grid, dim)));
    std::cout << j.dump(2) << '\n';
    return exit_code::pass;
}

int cmd_det2(const std::string& spec, const GlobalOptions& g) {
    const TimeGrid grid = grid_of(g);
    const int dim = kernel_dim(spec, g);
    Json j = provenance(spec, grid, dim);
    j["det2"] = to_json(det2(assemble(kernel_zoo(spec, grid, dim))));
    std::cout << j.dump(2) << '\n';
    return exit_code::pass;
}

int cmd_kappa_hat(const std::string& spec, const GlobalOptions& g) {
    const TimeGrid grid = grid_of(g);
    const int dim = kernel_dim(spec, g);
    const MatrixKernel kappa = kernel_zoo(spec, grid, dim);
    const MatrixKernel khat = inverse_kernel(kappa);
    Eigen::MatrixXd prod = assemble(kappa).matrix();
    prod.diagonal().array() += 1.0;
    Eigen::MatrixXd right = assemble(khat).matrix();
    right.diagonal().array() += 1.0;
    prod = prod * right;
    prod.diagonal().array() -= 1.0;
    Json j = provenance(spec, grid, dim);
    j["kappa_hat"] = Json{{"hs_norm", kernel_l2_norm(khat)},
                          {"trace", kernel_trace(khat)},
                          {"det2", to_json(det2(assemble(khat)))},
                          {"roundtrip_residual", prod.cwiseAbs().maxCoeff()}};
    std::cout << j.dump(2) << '\n';
    return exit_code::pass;
}

int cmd_kappa_s(const std::string& spec, const GlobalOptions& g) {
    const TimeGrid grid = grid_of(g);
    const int dim = kernel_dim(spec, g);
    const MatrixKernel eta = kernel_zoo(spec, grid, dim);
    Json j = provenance(spec, grid, dim);
    const double lambda = lambda_max(assemble(eta));
    j["lambda_eta"] = lambda;
    const MatrixKernel ks = kappa_S(eta);
    j["kappa_s"] = Json{{"hs_norm", kernel_l2_norm(ks)},
                        {"trace", kernel_trace(ks)},
                        {"det2", to_json(det2(assemble(ks)))},
                        {"eta_residual", kernel_l2_norm(eta_of_kappa(ks) - eta)}};
    std::cout << j.dump(2) << '\n';
    return exit_code::pass;
}

int emit(const std::vector<ScenarioReport>& reports, const GlobalOptions& g, bool to_files) {
    print_table(std::cout, reports);
    const OutputFormat fmt = parse_format(g.format);
    if (fmt != OutputFormat::csv) std::cout << to_json(reports).dump(2) << '\n';
    if (fmt != OutputFormat::json) write_csv(std::cout, reports);
    if (to_files) {
        const std::string dir = g.out.value_or(default_output_dir());
        write_reports(reports, dir, fmt);
        std::cerr << "reports written to " << dir << '\n';
    }
    return exit_code_for(reports);
}

int cmd_verify(const VerifyOptions& v, const GlobalOptions& g) {
    RunConfig cfg;
    apply_overrides(cfg, g);
    ScenarioConfig sc;
    sc.type = v.scenario;
    sc.kernel = v.kernel;
    sc.functional = v.functional;
    sc.lambda = v.lambda;
    sc.tolerance = v.tolerance;
    sc.lambdas = v.lambdas;
    sc.b1 = v.b1;
    sc.b2 = v.b2;
    if (!v.x.empty()) sc.x = Eigen::Map<const Eigen::VectorXd>(v.x.data(), static_cast<Eigen::Index>(v.x.size()));
    if (!v.matrix.empty()) {
        const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.matrix.size()))));
        if (n * n != static_cast<Eigen::Index>(v.matrix.size())) {
            throw ConfigError("--matrix: expected n*n entries in row-major order");
        }
        sc.matrix = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            v.matrix.data(), n, n);
    }
    return emit(run_scenario(sc, cfg), g, g.out.has_value() || std::getenv(kOutDirEnv) != nullptr);
}

int cmd_run(const std::string& path, const GlobalOptions& g) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream text;
    text << in.rdbuf();
    RunConfig cfg = parse_config(text.str());
    apply_overrides(cfg, g);
    if (g.format != "both") cfg.format = parse_format(g.format);
    const RunResult result = run(cfg, &std::cout, true);
    std::cerr << "reports written to " << (cfg.out_dir.empty() ? default_output_dir() : cfg.out_dir) << '\n';
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transformations of order one on Wiener space: operators, determinants and Monte Carlo checks"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    app.add_option("--seed", g.seed, "RNG seed")->check(CLI::NonNegativeNumber);
    app.add_option("--paths", g.paths, "Monte Carlo sample count M")->check(CLI::PositiveNumber);
    app.add_option("--grid", g.grid, "number of grid steps N (>= 2)")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));
    app.add_option("--horizon", g.horizon, "time horizon T")->check(CLI::PositiveNumber);
    app.add_option("--dim", g.dim, "path dimension d")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "output directory (default: $WIENEROP_OUT_DIR or ./wienerop-out)");
    app.add_option("--format", g.format, "report format")->check(CLI::IsMember({"json", "csv", "both"}));
    app.footer(std::string("Kernel specs: ") + std::string(kKernelGrammar) +
               "\nFunctionals: " + std::string(kFunctionalGrammar) +
               "\nExit codes: 0 pass, 1 numerical failure, 2 hypothesis gate rejection, 3 usage or config error");

    std::string spec;
    auto* spectrum = app.add_subcommand("spectrum", "Lambda(B_eta(kappa)), det2(I+B_kappa), trace and HS norm");
    spectrum->add_option("kernel", spec, "kernel spec")->required();
    auto* det = app.add_subcommand("det2", "Carleman determinant det2(I+B_kappa)");
    det->add_option("kernel", spec, "kernel spec")->required();
    auto* khat = app.add_subcommand("kappa-hat", "inverse kernel kappa_hat with a round-trip residual");
    khat->add_option("kernel", spec, "kernel spec")->required();
    auto* ks = app.add_subcommand("kappa-s", "square-root kernel kappa_S(eta) for a symmetric eta");
    ks->add_option("kernel", spec, "symmetric kernel spec eta")->required();

    VerifyOptions v;
    auto* verify = app.add_subcommand("verify", "run one verification scenario");
    verify->add_option("scenario", v.scenario, "scenario name")->required()->check(CLI::IsMember(scenario_types()));
    verify->add_option("--kernel", v.kernel, "kernel spec (kappa, eta or phi depending on the scenario)");
    verify->add_option("--functional", v.functional, "test functional f");
    verify->add_option("--lambda", v.lambda, "harmonic scaling lambda")->check(CLI::NonNegativeNumber);
    verify->add_option("--lambdas", v.lambdas, "Laplace sweep values");
    verify->add_option("--tolerance", v.tolerance, "relative Monte Carlo tolerance")->check(CLI::NonNegativeNumber);
    verify->add_option("--x", v.x, "direction x for the harmonic functional");
    verify->add_option("--matrix", v.matrix, "finite_dim matrix A, row-major");
    verify->add_option("--b1", v.b1, "gencv b1");
    verify->add_option("--b2", v.b2, "gencv b2");

    std::vector<double> sweep_lambdas{0.25, 0.5, 0.75};
    std::optional<std::string> sweep_functional;
    auto* sweep = app.add_subcommand("sweep-laplace", "surjective identity on lambda * eta for each lambda");
    sweep->add_option("kernel", spec, "symmetric kernel spec eta")->required();
    sweep->add_option("--lambdas", sweep_lambdas, "lambda values")->capture_default_str();
    sweep->add_option("--functional", sweep_functional, "test functional f");

    std::string config_path;
    auto* run_cmd = app.add_subcommand("run", "run every scenario of a YAML config");
    run_cmd->add_option("--config", config_path, "YAML config path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_code::usage;
    }

    try {
        if (*spectrum) return cmd_spectrum(spec, g);
        if (*det) return cmd_det2(spec, g);
        if (*khat) return cmd_kappa_hat(spec, g);
        if (*ks) return cmd_kappa_s(spec, g);
        if (*verify) return cmd_verify(v, g);
        if (*sweep) {
            v.scenario = "laplace";
            v.kernel = spec;
            v.lambdas = sweep_lambdas;
            v.functional = sweep_functional;
            return cmd_verify(v, g);
        }
        if (*run_cmd) return cmd_run(config_path, g);
    } catch (const NotContractive& e) {
        std::cerr << "rejected by hypothesis: " << e.what() << '\n';
        return exit_code::rejected;
    } catch (const SingularOperator& e) {
        std::cerr << "singular operator: " << e.what() << '\n';
        return exit_code::numerical_failure;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_code::usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return exit_code::usage;
    } catch (const PreconditionViolation& e) {
        std::cerr << "precondition violated: " << e.what() << '\n';
        return exit_code::usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code::numerical_failure;
    }
    return exit_code::usage;
}
