#include "wienerop/kernel_zoo.hpp"
#include "wienerop/operator.hpp"
#include "wienerop/statistics.hpp"
#include "wienerop/stochastic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

using namespace wienerop;

TEST(Rng, SamplesDependOnlyOnKey) {
    const TimeGrid g(1.0, 32);
    const PathBatch whole = sample_paths(g, 2, 10, 99, 1, 0);
    const PathBatch tail = sample_paths(g, 2, 5, 99, 1, 5);
    EXPECT_EQ(whole.increments().rightCols(5), tail.increments());
    const PathBatch other_stream = sample_paths(g, 2, 10, 99, 2, 0);
    EXPECT_NE(whole.increments(), other_stream.increments());
    const PathBatch again = sample_paths(g, 2, 10, 99, 1, 0);
    EXPECT_EQ(whole.increments(), again.increments());
}

TEST(Rng, IncrementVariance) {
    const TimeGrid g(2.0, 16);
    const PathBatch p = sample_paths(g, 1, 20000, 5);
    const Eigen::Map<const Eigen::VectorXd> flat(p.increments().data(), p.increments().size());
    const VarianceEstimate v = estimate_variance(flat);
    EXPECT_NEAR(v.variance, g.step(), 5.0 * v.std_error);
}

TEST(PathBatch, ValuesAreCumulativeSums) {
    const TimeGrid g(1.0, 8);
    const PathBatch p = sample_paths(g, 2, 3, 1);
    const Eigen::MatrixXd w = p.path_values();
    EXPECT_EQ(w.rows(), 18);
    EXPECT_TRUE(w.topRows(2).isZero());
    EXPECT_TRUE(w.bottomRows(2).isApprox(p.terminal()));
    EXPECT_TRUE(p.value_at(5).isApprox(w.middleRows(10, 2)));
    EXPECT_TRUE(p.left_values().isApprox(w.topRows(16)));
    EXPECT_THROW(PathBatch(g, 2, Eigen::MatrixXd::Zero(15, 1)), std::invalid_argument);
}

TEST(Stochastic, VolterraIntegralReproducesPath) {
    const TimeGrid g(1.0, 64);
    const PathBatch p = sample_paths(g, 1, 50, 3);
    const Eigen::MatrixXd integral = wiener_integral(volterra_kernel(g, 1), p);
    EXPECT_LT((integral - p.left_values()).cwiseAbs().maxCoeff(), 1e-13);
    // h(volterra) = 1/2 int theta^2 on the left-node rule
    const Eigen::VectorXd h = h_functional(volterra_kernel(g, 1), std::nullopt, p);
    const Eigen::VectorXd expected = 0.5 * g.step() * p.left_values().colwise().squaredNorm().transpose();
    EXPECT_LT((h - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Stochastic, TransformationInverseRoundTrip) {
    const TimeGrid g(1.0, 64);
    const MatrixKernel k = expdiag_kernel(g, {0.5, -0.5});
    const PathBatch p = sample_paths(g, 2, 100, 11);
    const PathBatch back = apply_transformation(inverse_kernel(k), apply_transformation(k, p));
    EXPECT_LT((back.increments() - p.increments()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(back.seed(), p.seed());
}

TEST(Stochastic, KernelGridMismatchRejected) {
    const PathBatch p = sample_paths(TimeGrid(1.0, 16), 1, 4, 1);
    EXPECT_THROW(apply_transformation(volterra_kernel(TimeGrid(1.0, 32), 1), p), std::invalid_argument);
    EXPECT_THROW(quadratic_form(volterra_kernel(TimeGrid(1.0, 16), 1), p), PreconditionViolation);
}

TEST(Stochastic, QuadraticFormIsCenteredWithHalfNormVariance) {
    const TimeGrid g(1.0, 128);
    const MatrixKernel eta = rank_one_kernel(g, 1, 0.8);
    const Eigen::VectorXd q = quadratic_form(eta, sample_paths(g, 1, 40000, 21));
    const MCEstimate mean = estimate(q);
    EXPECT_NEAR(mean.mean, 0.0, 4.0 * *mean.std_error);
    const VarianceEstimate v = estimate_variance(q);
    EXPECT_NEAR(v.variance, 0.5 * std::pow(kernel_l2_norm(eta), 2), 5.0 * v.std_error);
}

TEST(Stochastic, QuadraticFormIsItoSumPlusCentredDiagonal) {
    const TimeGrid g(1.0, 6);
    const MatrixKernel eta = rank_one_kernel(g, 2, -0.7, 2);
    const PathBatch p = sample_paths(g, 2, 3, 8);
    const Eigen::VectorXd q = quadratic_form(eta, p);
    for (Eigen::Index m = 0; m < 3; ++m) {
        double ito = 0.0;
        double diagonal = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto dwi = p.increments().col(m).segment(static_cast<Eigen::Index>(i) * 2, 2);
            for (std::size_t j = 0; j < i; ++j) {
                const auto dwj = p.increments().col(m).segment(static_cast<Eigen::Index>(j) * 2, 2);
                ito += dwi.dot(eta.at(i, j) * dwj);
            }
            diagonal += 0.5 * (dwi.dot(eta.at(i, i) * dwi) - g.step() * eta.at(i, i).trace());
        }
        EXPECT_NEAR(q(m), ito + diagonal, 1e-14);
    }
}

// E[e^{q_eta}] = det2(I - B_eta)^{-1/2} on the grid, checked by exact
// Gaussian integration of a 2-step, 1-d form.
TEST(Stochastic, ExponentialMomentIsExactOnGrid) {
    const TimeGrid g(1.0, 2);
    Eigen::MatrixXd h(2, 2);
    h << 0.3, -0.2, -0.2, 0.1;
    const MatrixKernel eta(g, 1, h, true);
    const Determinant d = det2(Eigen::MatrixXd(-assemble(eta).matrix()));
    const double exact = std::exp(-0.5 * d.log_modulus);
    // tensor Gauss-Hermite quadrature of E[e^{q}] over the two increments
    constexpr int kNodes = 60;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(kNodes, kNodes);
    for (int k = 1; k < kNodes; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    const Eigen::VectorXd nodes = es.eigenvalues();
    const Eigen::VectorXd weights = es.eigenvectors().row(0).array().square();
    Eigen::MatrixXd inc(2, kNodes * kNodes);
    Eigen::VectorXd w(kNodes * kNodes);
    for (int a = 0; a < kNodes; ++a) {
        for (int b = 0; b < kNodes; ++b) {
            inc(0, a * kNodes + b) = nodes(a) * std::sqrt(g.step());
            inc(1, a * kNodes + b) = nodes(b) * std::sqrt(g.step());
            w(a * kNodes + b) = weights(a) * weights(b);
        }
    }
    const Eigen::VectorXd q = quadratic_form(eta, PathBatch(g, 1, inc));
    EXPECT_NEAR(w.dot(q.array().exp().matrix()), exact, 1e-12);
}

TEST(Stochastic, MomentGuard) {
    EXPECT_EQ(exp_q_moment_guard(0.3), MomentGuard::ok);
    EXPECT_EQ(exp_q_moment_guard(-5.0), MomentGuard::ok);
    EXPECT_EQ(exp_q_moment_guard(0.5), MomentGuard::ok_no_ci);
    EXPECT_EQ(exp_q_moment_guard(0.6), MomentGuard::ok_no_ci);
    EXPECT_EQ(exp_q_moment_guard(1.0), MomentGuard::reject);
    EXPECT_EQ(exp_q_moment_guard(1.0 - 1e-9), MomentGuard::reject);
    EXPECT_EQ(exp_q_moment_guard(std::nan("")), MomentGuard::reject);
}

TEST(Stochastic, CameronMartinLinearMatchesOrderOne) {
    const TimeGrid g(1.0, 256);
    const MatrixKernel phi = constant_kernel(g, 1, 1.0);
    const PathBatch p = sample_paths(g, 1, 200, 4);
    const Eigen::MatrixXd a = apply_linear_transformation(phi, p).path_values();
    const Eigen::MatrixXd b = apply_transformation(kappa_from_phi(phi), p).path_values();
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 5.0 * std::sqrt(g.step()));
}

TEST(Stochastic, CameronMartinTraceCorrection) {
    const TimeGrid g(2.0, 100);
    // int_0^T int_0^s 1 dt ds = T^2 / 2, strict-lower Riemann sum = N(N-1)/2 step^2
    EXPECT_NEAR(cm_trace_correction(constant_kernel(g, 1, 1.0)), 100.0 * 99.0 / 2.0 * g.step() * g.step(), 1e-12);
    EXPECT_NEAR(cm_trace_correction(constant_kernel(g, 3, 1.0)), 3.0 * 99.0 * g.step(), 1e-12);
}

TEST(Functional, ParsesAndEvaluates) {
    const TimeGrid g(1.0, 10);
    const PathBatch p = sample_paths(g, 1, 4, 2);
    const TestFunctional f = parse_functional("cos_end:a=2");
    EXPECT_FALSE(f.is_constant());
    EXPECT_NEAR(f(p)(1), std::cos(2.0 * p.terminal()(0, 1)), 1e-15);
    EXPECT_TRUE(parse_functional("one").is_constant());
    const TestFunctional mid = parse_functional("cos_mid:a=1,tau=0.5");
    EXPECT_NEAR(mid(p)(2), std::cos(p.value_at(5)(0, 2)), 1e-15);
    EXPECT_NEAR(parse_functional("exp_negsq")(p)(0), std::exp(-std::pow(p.terminal()(0, 0), 2)), 1e-15);
    EXPECT_THROW(parse_functional("sin_end"), std::invalid_argument);
    EXPECT_THROW(parse_functional("cos_end:b=1"), std::invalid_argument);
    EXPECT_THROW(parse_functional("cos_mid:a=1"), std::invalid_argument);
}

TEST(PathDump, RoundTrip) {
    const TimeGrid g(1.5, 12);
    const PathBatch p = sample_paths(g, 3, 7, 123, 4, 17);
    std::stringstream buf;
    write_path_batch(buf, p);
    const PathBatch q = read_path_batch(buf);
    EXPECT_EQ(q.grid(), p.grid());
    EXPECT_EQ(q.dim(), 3);
    EXPECT_EQ(q.seed(), 123u);
    EXPECT_EQ(q.stream(), 4u);
    EXPECT_EQ(q.first_index(), 17u);
    EXPECT_EQ(q.increments(), p.increments());
    std::stringstream bad("NOTABATCH");
    EXPECT_THROW(read_path_batch(bad), std::runtime_error);
    std::stringstream truncated(buf.str().substr(0, 40));
    EXPECT_THROW(read_path_batch(truncated), std::runtime_error);
}

TEST(Statistics, PairwiseSumAndEstimate) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(1000, 0.1);
    EXPECT_NEAR(pairwise_sum(v), 100.0, 1e-12);
    v(3) = 1e6;
    const MCEstimate e = estimate(v, false);
    EXPECT_FALSE(e.std_error.has_value());
    EXPECT_NEAR(e.batch_median, 0.1, 1e-12);  // the outlier sits in one sub-batch only
    EXPECT_EQ(median({3.0, 1.0, 2.0, 10.0}), 2.5);
}
