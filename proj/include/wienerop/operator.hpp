#pragma once

// Nystrom realization of the Hilbert-Schmidt operator B_kappa and its
// spectral calculus.
//
// With the identification H ~ L2([0,T]; R^d), h <-> h', the operator B_kappa
// acts as (B h')(t) = int kappa(t,s) h'(s) ds. On the grid this is the matrix
// M = K * step, where K is the block matrix of kernel values. Because the
// weights are uniform, M is symmetric whenever K is, and the Frobenius norm
// of M equals the quadrature L2 norm of kappa.

#include "wienerop/errors.hpp"
#include "wienerop/kernel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <utility>

namespace wienerop {

/// Every "Lambda < 1" gate is evaluated as Lambda < 1 - kGateMargin.
inline constexpr double kGateMargin = 1e-8;

/// Reciprocal condition (per unit dimension) below which I + B is singular.
inline constexpr double kSingularRcond = 1e-14;

class HSMatrix {
public:
    HSMatrix(TimeGrid grid, int dim, Eigen::MatrixXd matrix, bool symmetric = false)
        : grid_(grid), dim_(dim), matrix_(std::move(matrix)), symmetric_(symmetric) {}

    const TimeGrid& grid() const noexcept { return grid_; }
    int dim() const noexcept { return dim_; }
    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
    Eigen::Index size() const noexcept { return matrix_.rows(); }
    /// Whether the source kernel was flagged as a member of S2.
    bool from_symmetric_kernel() const noexcept { return symmetric_; }

private:
    TimeGrid grid_;
    int dim_;
    Eigen::MatrixXd matrix_;
    bool symmetric_;
};

inline HSMatrix assemble(const MatrixKernel& kappa) {
    return HSMatrix(kappa.grid(), kappa.dim(), kappa.values() * kappa.grid().step(), kappa.symmetric());
}

/// Inverse of `assemble`: divides the matrix by the quadrature weight.
inline MatrixKernel recover_kernel(const TimeGrid& grid, int dim, const Eigen::MatrixXd& matrix,
                                   bool symmetric = false) {
    Eigen::MatrixXd values = matrix / grid.step();
    if (symmetric) values = 0.5 * (values + values.transpose()).eval();
    return MatrixKernel(grid, dim, std::move(values), symmetric);
}

inline MatrixKernel recover_kernel(const HSMatrix& b) {
    return recover_kernel(b.grid(), b.dim(), b.matrix(), b.from_symmetric_kernel());
}

inline bool is_numerically_symmetric(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return true;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTolerance * scale;
}

inline void require_symmetric(const Eigen::MatrixXd& m, const char* what) {
    if (!is_numerically_symmetric(m)) {
        throw PreconditionViolation(std::string(what) + ": operator is not self-adjoint");
    }
}

/// Smallest and largest eigenvalue of a self-adjoint matrix.
inline std::pair<double, double> eigen_range(const Eigen::MatrixXd& m) {
    require_symmetric(m, "eigen_range");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    return {ev.minCoeff(), ev.maxCoeff()};
}

/// Lambda(B) = sup_{|h|=1} <Bh, h>.
inline double lambda_max(const Eigen::MatrixXd& m) {
    require_symmetric(m, "lambda_max");
    return eigen_range(m).second;
}

inline double lambda_max(const HSMatrix& b) { return lambda_max(b.matrix()); }

/// Sign and log-modulus of a determinant, or the singular outcome.
struct Determinant {
    bool singular = false;
    int sign = 1;
    double log_modulus = 0.0;

    double value() const { return singular ? 0.0 : sign * std::exp(log_modulus); }
};

namespace detail {

/// det(I + B) by partial-pivot LU. I + B counts as singular when the LU
/// reciprocal condition estimate falls below 1e-14 * n. Single pivots are not
/// a reliable test: elimination can spread a null direction over many
/// moderate pivots.
inline Determinant log_det_identity_plus(const Eigen::MatrixXd& b) {
    const auto n = b.rows();
    if (n == 0) return {};
    Eigen::MatrixXd a = b;
    a.diagonal().array() += 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const Eigen::VectorXd pivots = lu.matrixLU().diagonal();
    const Determinant singular{true, 0, -std::numeric_limits<double>::infinity()};
    if (!(lu.rcond() >= kSingularRcond * static_cast<double>(n))) return singular;
    Determinant det;
    det.sign = static_cast<int>(lu.permutationP().determinant());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = pivots(i);
        if (p == 0.0) return singular;
        if (p < 0.0) det.sign = -det.sign;
        det.log_modulus += std::log(std::abs(p));
    }
    return det;
}

}  // namespace detail

/// Trace-class determinant det(I + B).
inline Determinant fredholm_det(const Eigen::MatrixXd& b) { return detail::log_det_identity_plus(b); }

/// Regularized determinant det2(I + B) = det(I + B) e^{-tr B}, in log domain.
inline Determinant det2(const Eigen::MatrixXd& b) {
    Determinant det = detail::log_det_identity_plus(b);
    if (!det.singular) det.log_modulus -= b.trace();
    return det;
}

inline Determinant det2(const HSMatrix& b) { return det2(b.matrix()); }

/// det2(I + B) from the complex spectrum: prod (1 + l) e^{-l}. An independent
/// route to `det2` used for cross-checks.
inline Determinant det2_spectral(const Eigen::MatrixXd& b) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(b, false);
    const auto& ev = solver.eigenvalues();
    Determinant det;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        const std::complex<double> factor = 1.0 + ev(i);
        const double modulus = std::abs(factor);
        if (modulus == 0.0) return Determinant{true, 0, -std::numeric_limits<double>::infinity()};
        det.log_modulus += std::log(modulus) - ev(i).real();
        // complex pairs contribute |1 + l|^2 > 0; only real negative factors flip the sign
        if (std::abs(ev(i).imag()) <= 1e-12 * std::max(1.0, std::abs(ev(i))) && factor.real() < 0.0) {
            det.sign = -det.sign;
        }
    }
    return det;
}

/// tr B_kappa as the quadrature of int tr kappa(s,s) ds. Equal to the matrix
/// trace of assemble(kappa).
inline double kernel_trace(const MatrixKernel& kappa) {
    double sum = 0.0;
    for (std::size_t i = 0; i < kappa.grid().size(); ++i) sum += kappa.at(i, i).trace();
    return sum * kappa.grid().step();
}

inline double trace(const HSMatrix& b) { return b.matrix().trace(); }

/// kappa-hat with B_{kappa-hat} = (I + B_kappa)^{-1} - I.
inline MatrixKernel inverse_kernel(const MatrixKernel& kappa) {
    const HSMatrix b = assemble(kappa);
    if (detail::log_det_identity_plus(b.matrix()).singular) {
        throw SingularOperator("inverse_kernel: I + B_kappa is singular");
    }
    Eigen::MatrixXd a = b.matrix();
    a.diagonal().array() += 1.0;
    Eigen::MatrixXd inv = a.partialPivLu().inverse();
    inv.diagonal().array() -= 1.0;
    return recover_kernel(kappa.grid(), kappa.dim(), inv, kappa.symmetric());
}

enum class GatePolicy { enforce, override_at_own_risk };

/// kappa_S(eta) with B_{kappa_S} = C - I, where C >= 0 and C^2 = I - B_eta.
inline MatrixKernel kappa_S(const MatrixKernel& eta, GatePolicy gate = GatePolicy::enforce) {
    const HSMatrix b = assemble(eta);
    require_symmetric(b.matrix(), "kappa_S");
    const auto n = b.size();
    Eigen::MatrixXd a = -b.matrix();
    a.diagonal().array() += 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    Eigen::VectorXd ev = solver.eigenvalues();
    const double lambda = n == 0 ? 0.0 : 1.0 - ev.minCoeff();
    if (gate == GatePolicy::enforce && !(lambda < 1.0 - kGateMargin)) {
        throw NotContractive("kappa_S: Lambda(B_eta) = " + std::to_string(lambda) + " is not below 1");
    }
    const double floor = 1e-14 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    ev = ev.cwiseMax(floor).cwiseSqrt();
    Eigen::MatrixXd root = solver.eigenvectors() * ev.asDiagonal() * solver.eigenvectors().transpose();
    root.diagonal().array() -= 1.0;
    return recover_kernel(eta.grid(), eta.dim(), root, true);
}

/// Result of checking injectivity of kappa -> eta(kappa) on a pair.
struct InjectivityReport {
    double eta_distance = 0.0;     ///< ||eta(k1) - eta(k2)||_2
    double kappa_distance = 0.0;   ///< ||k1 - k2||_2
    bool first_in_domain = false;  ///< k1 symmetric and I + B_k1 >= 0
    bool second_in_domain = false;
    double condition = 1.0;        ///< amplification bound used for the implication
    bool implication_holds = true; ///< eta-close implies kappa-close (vacuous outside the domain)
};

enum class Membership { require, report_only };

namespace detail {

inline bool in_symmetric_nonnegative_class(const MatrixKernel& kappa, double* min_eig) {
    const Eigen::MatrixXd& m = kappa.values();
    if (!is_numerically_symmetric(m)) return false;
    Eigen::MatrixXd a = m * kappa.grid().step();
    a.diagonal().array() += 1.0;
    const double lo = eigen_range(a).first;
    if (min_eig) *min_eig = lo;
    return lo >= -1e-10;
}

}  // namespace detail

/// On S2,+ = {kappa symmetric, I + B_kappa >= 0}, eta(k1) = eta(k2) forces
/// k1 = k2. The report quantifies both distances; `tolerance` is the
/// threshold under which eta-distance counts as zero.
inline InjectivityReport injectivity_witness(const MatrixKernel& k1, const MatrixKernel& k2,
                                             Membership policy = Membership::require,
                                             double tolerance = 1e-8) {
    require_compatible(k1, k2, "injectivity_witness");
    InjectivityReport report;
    double lo1 = 0.0;
    double lo2 = 0.0;
    report.first_in_domain = detail::in_symmetric_nonnegative_class(k1, &lo1);
    report.second_in_domain = detail::in_symmetric_nonnegative_class(k2, &lo2);
    if (policy == Membership::require && !(report.first_in_domain && report.second_in_domain)) {
        throw PreconditionViolation("injectivity_witness: kernels must be symmetric with I + B >= 0");
    }
    report.eta_distance = kernel_l2_norm(eta_of_kappa(k1) - eta_of_kappa(k2));
    report.kappa_distance = kernel_l2_norm(k1 - k2);
    if (report.first_in_domain && report.second_in_domain) {
        // I + B_i are the nonnegative square roots of I - B_eta(k_i); for such
        // roots |C1 - C2|_F <= |C1^2 - C2^2|_F / (min eig C1 + min eig C2).
        const double gap = std::max(lo1, 0.0) + std::max(lo2, 0.0);
        report.condition = gap > 0.0 ? 1.0 / gap : std::numeric_limits<double>::infinity();
        if (report.eta_distance <= tolerance) {
            report.implication_holds = report.kappa_distance <= tolerance * report.condition;
        }
    }
    return report;
}

/// Log-domain comparison of det2((I+B*)(I+B)) with det2(I+B) det2(I+B*) e^{-tr(B*B)}.
struct ProductIdentityReport {
    Determinant product;        ///< det2((I+B*)(I+B))
    Determinant factored;       ///< det2(I+B) det2(I+B*) e^{-tr B*B}
    Determinant eta_form;       ///< det2(I - B_eta(kappa)), from the kernel route
    double discrepancy = 0.0;   ///< |log ratio| of product vs factored
    double eta_discrepancy = 0.0;
    bool singular = false;
};

inline ProductIdentityReport det2_product_identity_check(const HSMatrix& b) {
    const Eigen::MatrixXd& m = b.matrix();
    ProductIdentityReport report;
    report.product = det2(Eigen::MatrixXd(m + m.transpose() + m.transpose() * m));
    const Determinant left = det2(m);
    const Determinant right = det2(Eigen::MatrixXd(m.transpose()));
    if (left.singular || right.singular || report.product.singular) {
        report.singular = true;
        report.factored = Determinant{true, 0, -std::numeric_limits<double>::infinity()};
        return report;
    }
    report.factored.sign = left.sign * right.sign;
    report.factored.log_modulus = left.log_modulus + right.log_modulus - m.squaredNorm();
    report.discrepancy = std::abs(report.product.log_modulus - report.factored.log_modulus) +
                         (report.product.sign == report.factored.sign ? 0.0 : 2.0);

    const MatrixKernel source = recover_kernel(b.grid(), b.dim(), m);
    const HSMatrix eta = assemble(eta_of_kappa(source));
    report.eta_form = det2(Eigen::MatrixXd(-eta.matrix()));
    if (report.eta_form.singular) {
        report.singular = true;
        return report;
    }
    report.eta_discrepancy = std::abs(report.eta_form.log_modulus - report.product.log_modulus) +
                             (report.eta_form.sign == report.product.sign ? 0.0 : 2.0);
    return report;
}

/// Summary of a kernel kappa: Lambda(B_eta(kappa)) with the bottom of that
/// spectrum, det2(I + B_kappa), tr B_kappa and ||kappa||_2.
struct SpectralSummary {
    double lambda_max = 0.0;
    double lambda_min = 0.0;
    Determinant det2;
    double trace = 0.0;
    double hs_norm = 0.0;
};

inline SpectralSummary spectral_summary(const MatrixKernel& kappa) {
    SpectralSummary s;
    const auto [lo, hi] = eigen_range(assemble(eta_of_kappa(kappa)).matrix());
    s.lambda_min = lo;
    s.lambda_max = hi;
    s.det2 = det2(assemble(kappa));
    s.trace = kernel_trace(kappa);
    s.hs_norm = kernel_l2_norm(kappa);
    return s;
}

}  // namespace wienerop
