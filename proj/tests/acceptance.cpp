// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include "wienerop/wienerop.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace wienerop;

namespace {

constexpr std::uint64_t kSeed = 42;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [FAILED]");
    }
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), f, a, b, c);
    return buf;
}

ScenarioSettings settings(std::size_t n_steps, std::size_t samples, int dim = 1) {
    ScenarioSettings s;
    s.grid = TimeGrid(1.0, n_steps);
    s.dim = dim;
    s.samples = samples;
    s.seed = kSeed;
    return s;
}

double elapsed(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

/// |lhs - rhs| within 3 combined standard errors.
bool within_3_sigma(const ScenarioReport& r) {
    if (!r.lhs || !r.lhs->std_error) return false;
    const double se = std::hypot(*r.lhs->std_error, r.rhs ? r.rhs->se_or_zero() : 0.0);
    return std::abs(r.lhs->mean - r.rhs_value()) <= 3.0 * se;
}

std::string describe(const ScenarioReport& r) {
    std::ostringstream os;
    os << r.name << "[" << r.kernel_spec << "] " << to_string(r.verdict);
    if (r.lhs) os << " lhs=" << r.lhs->mean << " rhs=" << r.rhs_value();
    if (r.z_score) os << " z=" << fmt("%.2f", *r.z_score);
    else if (r.comparison == "consistency") os << " (consistency: lhs median=" << r.lhs->batch_median << ")";
    for (const auto& c : r.checks) {
        if (!c.pass) os << " check " << c.name << " failed (" << c.value << " vs " << c.expected << ")";
    }
    return os.str();
}

Outcome criterion_1() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    const std::pair<std::size_t, int> shapes[] = {{512, 1}, {256, 2}, {128, 4}, {64, 8}};
    double worst_eta = 0.0;
    double worst_inverse = 0.0;
    for (int k = 0; k < 20; ++k) {
        const auto [n_steps, dim] = shapes[k % 4];
        const TimeGrid grid(1.0, n_steps);
        const auto n = static_cast<Eigen::Index>(n_steps) * dim;
        std::mt19937_64 rng(kSeed + static_cast<std::uint64_t>(k));
        std::normal_distribution<double> normal;
        Eigen::MatrixXd a(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) a(i, j) = normal(rng);
        }
        const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
        const MatrixKernel raw(grid, dim, sym, true);
        const double lambda = lambda_max(assemble(raw));
        const MatrixKernel eta = raw.scaled(0.9 / lambda);
        const MatrixKernel ks = kappa_S(eta);
        worst_eta = std::max(worst_eta, kernel_l2_norm(eta_of_kappa(ks) - eta) / kernel_l2_norm(eta));

        for (const MatrixKernel& kappa : {ks, MatrixKernel(grid, dim, a).scaled(0.5 / (a.norm() * grid.step()))}) {
            Eigen::MatrixXd left = assemble(kappa).matrix();
            left.diagonal().array() += 1.0;
            Eigen::MatrixXd right = assemble(inverse_kernel(kappa)).matrix();
            right.diagonal().array() += 1.0;
            const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
            worst_inverse = std::max(worst_inverse, (left * right - id).cwiseAbs().maxCoeff());
        }
    }
    const double seconds = elapsed(start);
    out.require(worst_inverse <= 1e-10, fmt("max |(I+M)(I+M^) - I| = %.2e", worst_inverse));
    out.require(worst_eta <= 1e-8, fmt("max |eta(kappa_S(eta)) - eta|/|eta| = %.2e over 20 draws", worst_eta));
    out.require(seconds < 10.0, fmt("%.1f s < 10 s", seconds));
    return out;
}

Outcome criterion_2() {
    Outcome out;
    const TimeGrid grid(1.0, 256);
    const Determinant gencv = det2(assemble(gencv_kernel(grid, 1, -2.0, -3.0)));
    const double rel = std::abs(gencv.value() / (2.0 * std::exp(5.0)) - 1.0);
    out.require(rel <= 1e-6, fmt("gencv det2 = %.10g (2e^5, rel err %.1e)", gencv.value(), rel));
    double worst = 0.0;
    for (double b : {0.3, -0.5, -2.0}) {
        const Determinant d = det2(assemble(rank_one_kernel(grid, 1, b)));
        worst = std::max(worst, std::abs(d.value() - (1.0 + b) * std::exp(-b)));
    }
    out.require(worst <= 1e-10, fmt("rank-one (1+b)e^-b for b in {0.3,-0.5,-2}: max err %.1e", worst));
    const TimeGrid small(1.0, 8);
    double worst_product = 0.0;
    for (std::uint64_t k = 0; k < 50; ++k) {
        std::mt19937_64 rng(kSeed + k);
        std::normal_distribution<double> normal(0.0, 0.3);
        Eigen::MatrixXd m(8, 8);
        for (Eigen::Index j = 0; j < 8; ++j) {
            for (Eigen::Index i = 0; i < 8; ++i) m(i, j) = normal(rng);
        }
        const ProductIdentityReport r = det2_product_identity_check(HSMatrix(small, 1, m));
        if (r.singular) continue;
        worst_product = std::max({worst_product, r.discrepancy, r.eta_discrepancy});
    }
    out.require(worst_product <= 1e-10, fmt("product identity on 50 random 8x8: max log err %.1e", worst_product));
    return out;
}

Outcome criterion_3() {
    Outcome out;
    const TimeGrid grid(1.0, 256);
    const auto [k1, k2] = remark_pair(grid, 1, std::numbers::sqrt2 - 1.0, 1.0);
    const InjectivityReport r = injectivity_witness(k1, k2, Membership::report_only);
    const double target = 8.0 - 4.0 * std::numbers::sqrt2;
    const double d2 = r.kappa_distance * r.kappa_distance;
    out.require(r.eta_distance <= 1e-8, fmt("|eta(k1) - eta(k2)| = %.1e", r.eta_distance));
    out.require(std::abs(d2 - target) <= 1e-3, fmt("|k1 - k2|^2 = %.6f (8 - 4 sqrt2 = %.6f)", d2, target));
    return out;
}

Outcome criterion_4() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    const ScenarioSettings s = settings(1024, 100000);
    const MatrixKernel v = volterra_kernel(s.grid, 1);
    for (double lambda : {0.5, 1.0, 2.0}) {
        const ScenarioReport r = verify_harmonic(v, "volterra", std::nullopt, lambda, TestFunctional{}, s);
        const double oracle = r.values.at("oracle");
        const double det_side = r.values.at("determinant_side_f1");
        const double det_rel = std::abs(det_side / oracle - 1.0);
        const double z = (r.lhs->mean - oracle) / r.lhs->se_or_zero();
        out.require(det_rel <= 0.01 && std::abs(z) <= 3.0,
                    fmt("lambda=%.1f: ", lambda) + fmt("det^-1/2=%.6f oracle=%.6f ", det_side, oracle) +
                        fmt("MC=%.6f z=%.2f", r.lhs->mean, z));
    }
    const double seconds = elapsed(start);
    out.require(seconds < 60.0, fmt("%.1f s < 60 s", seconds));
    return out;
}

Outcome criterion_5() {
    Outcome out;
    const ScenarioSettings s = settings(256, 200000);
    const TestFunctional f = parse_functional("cos_end");
    auto start = std::chrono::steady_clock::now();
    const ScenarioReport rank1 = verify_transf(rank_one_kernel(s.grid, 1, 0.3), "rank1:b=0.3", f, s);
    double seconds = elapsed(start);
    out.require(rank1.verdict == Verdict::pass && seconds < 60.0, describe(rank1) + fmt(" (%.1f s)", seconds));
    out.require(std::abs(rank1.values.at("rhs_constant") - 1.04603) < 5e-6,
                fmt("e^{|k|^2/2} = %.6f", rank1.values.at("rhs_constant")));
    start = std::chrono::steady_clock::now();
    const ScenarioReport gencv = verify_gencv_example(-2.0, -3.0, f, s);
    seconds = elapsed(start);
    out.require(gencv.verdict == Verdict::pass && seconds < 60.0, describe(gencv) + fmt(" (%.1f s)", seconds));
    return out;
}

Outcome criterion_6() {
    Outcome out;
    const ScenarioSettings s = settings(256, 200000);
    const TestFunctional f = parse_functional("cos_end");
    const std::pair<std::string, MatrixKernel> kernels[] = {
        {"rank1:b=0.3", rank_one_kernel(s.grid, 1, 0.3)},
        {"remark_gencv:b1=-2,b2=-3", gencv_kernel(s.grid, 1, -2.0, -3.0)}};
    for (const auto& [spec, kernel] : kernels) {
        const ScenarioReport r = verify_inverse(kernel, spec, f, s);
        out.require(r.verdict == Verdict::pass, describe(r));
        const Check* path = r.find_check("pathwise_roundtrip");
        out.require(path && path->pass, fmt("round trip on 1e3 paths: %.1e", path ? path->value : NAN));
        if (const Check* c = r.find_check("density_normalization")) {
            const double se = r.values.at("density_se");
            out.require(std::abs(c->value - 1.0) <= 3.0 * se,
                        fmt("E[RN] = %.5f +- %.5f", c->value, se));
        } else if (const Check* c = r.find_check("density_normalization_consistency")) {
            out.require(c->pass, fmt("E[RN] has infinite variance (Lambda(eta_hat) = %.2f): ", r.values.at("lambda_eta_hat")) +
                                     fmt("batch median %.4f, band [%.4f, ", c->value, r.values.at("density_batch_low")) +
                                     fmt("%.4f] holds 1", r.values.at("density_batch_high")));
        } else {
            out.require(false, "density normalization not evaluated");
        }
    }
    return out;
}

Outcome criterion_7() {
    Outcome out;
    const ScenarioSettings s = settings(256, 200000);
    const MatrixKernel eta = rank_one_kernel(s.grid, 1, 0.5);
    const double exact = std::pow(0.5 * std::exp(0.5), -0.5);
    const ScenarioReport r = verify_surjective(eta, "rank1:b=0.5", TestFunctional{}, s);
    const double det_side = r.values.at("determinant_side_f1");
    out.require(std::abs(det_side - exact) <= 1e-6, fmt("determinant side %.7f vs %.7f", det_side, exact));
    out.require(r.verdict == Verdict::pass, describe(r) + " [" + r.guard + ": Lambda(B_2eta) = 1, no sigma exists]");
    for (const ScenarioReport& l : sweep_laplace(eta, "rank1:b=0.5", {0.25, 0.5, 0.75}, TestFunctional{}, s)) {
        out.require(l.verdict == Verdict::pass && within_3_sigma(l),
                    fmt("laplace lambda=%.2f ", l.values.at("laplace_lambda")) + describe(l));
    }
    return out;
}

Outcome criterion_8() {
    Outcome out;
    const ScenarioSettings s = settings(256, 200000);
    const ScenarioReport r = verify_integrability_bound(rank_one_kernel(s.grid, 1, 0.5), "rank1:b=0.5", s);
    const double exact = r.values.at("exact");
    const double bound = r.values.at("bound");
    out.require(std::abs(exact - 1.1014) < 5e-5 && std::abs(bound - 1.2575) < 1e-4 && exact <= bound,
                fmt("exact %.5f <= bound %.5f", exact, bound));
    out.require(r.verdict == Verdict::pass, describe(r));
    for (double a : {1.0, 1.5}) {
        const ScenarioReport g = verify_integrability_bound(rank_one_kernel(s.grid, 1, a), "rank1", s);
        out.require(g.verdict == Verdict::rejected_by_hypothesis, fmt("a=%.1f ", a) + to_string(g.verdict));
    }
    ScenarioSettings quick = s;
    quick.samples = 20000;
    const ScenarioReport flag = verify_integrability_bound(rank_one_kernel(s.grid, 1, 0.6), "rank1:b=0.6", quick);
    out.require(flag.guard == "ok_no_ci", "a=0.6 guard " + flag.guard);
    return out;
}

Outcome criterion_9() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    const ScenarioSettings s = settings(512, 200000);
    const ScenarioReport r =
        verify_cameron_martin(constant_kernel(s.grid, 1, 1.0), "const:c=1", parse_functional("cos_end"), s);
    const Check* det = r.find_check("fredholm_det_vs_oracle");
    out.require(det && det->pass, fmt("Fredholm det %.6f vs 1.5", det ? det->value : NAN));
    const Check* tr = r.find_check("trace_on_grid");
    out.require(tr && tr->pass, fmt("trace %.12f on grid", tr ? tr->value : NAN));
    const Check* path = r.find_check("linear_vs_order_one_pathwise");
    out.require(path && path->pass, fmt("pathwise gap %.3f <= 5 sqrt(step) = %.3f", path ? path->value : NAN,
                                        5.0 * std::sqrt(s.grid.step())));
    out.require(r.verdict == Verdict::pass && within_3_sigma(r), describe(r));
    out.require(elapsed(start) < 60.0, fmt("%.1f s", elapsed(start)));
    return out;
}

Outcome criterion_10() {
    Outcome out;
    const TimeGrid grid(1.0, 256);
    for (double a : {0.5, -2.0}) {
        const MatrixKernel eta = rank_one_kernel(grid, 1, a);
        const Eigen::VectorXd q = evaluate_paths(grid, 1, 200000, kSeed, streams::lhs,
                                                 [&](const PathBatch& w) { return quadratic_form(eta, w); });
        const VarianceEstimate v = estimate_variance(q);
        const double target = 0.5 * std::pow(kernel_l2_norm(eta), 2);
        const double z = (v.variance - target) / v.std_error;
        out.require(std::abs(z) <= 5.0, fmt("a=%.1f: Var q = %.5f vs |eta|^2/2 = %.5f", a, v.variance, target) +
                                            fmt(" (%.2f sigma)", z));
    }
    return out;
}

Outcome criterion_11() {
    Outcome out;
    const ScenarioSettings s = settings(64, 20000);
    const TestFunctional f = parse_functional("cos_end");
    const MatrixKernel k = rank_one_kernel(s.grid, 1, 0.3);
    auto run_all = [&] {
        std::vector<ScenarioReport> reports{verify_transf(k, "rank1:b=0.3", f, s), verify_inverse(k, "rank1:b=0.3", f, s),
                                            verify_cameron_martin(constant_kernel(s.grid, 1, 1.0), "const:c=1", f, s)};
        return to_json(reports).dump(2);
    };
#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const std::string one = run_all();
    omp_set_num_threads(4);
    const std::string four = run_all();
    omp_set_num_threads(saved);
    out.require(one == four, "JSON identical with 1 and 4 threads");
#endif
    const std::string again = run_all();
    out.require(again == run_all(), fmt("JSON identical across reruns (%.0f bytes)", static_cast<double>(again.size())));
    return out;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"operator round-trips", criterion_1},
        {"det2 closed forms", criterion_2},
        {"non-injectivity witness", criterion_3},
        {"harmonic oscillator", criterion_4},
        {"transformation identity", criterion_5},
        {"inverse transformation and density", criterion_6},
        {"surjective square root and Laplace sweep", criterion_7},
        {"integrability boundary", criterion_8},
        {"Cameron-Martin", criterion_9},
        {"variance constant", criterion_10},
        {"determinism", criterion_11},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failures;
        std::printf("%s criterion %2zu %-42s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), elapsed(start));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
