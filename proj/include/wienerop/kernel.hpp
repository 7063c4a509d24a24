#pragma once

#include "wienerop/grid.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace wienerop {

/// Absolute tolerance on |kappa(t,s)^T - kappa(s,t)| for members of S2.
inline constexpr double kSymmetryTolerance = 1e-12;

/// A d x d matrix-valued kernel sampled on grid x grid.
///
/// Values are stored as one (N*d) x (N*d) matrix whose (i, j) block of size
/// d x d holds kappa(t_i, t_j). With this layout the kernel adjoint
/// kappa*(t,s) = kappa(s,t)^T is a plain transpose and compositions are
/// ordinary matrix products scaled by the quadrature weight.
class MatrixKernel {
public:
    MatrixKernel(TimeGrid grid, int dim, Eigen::MatrixXd values, bool symmetric = false)
        : grid_(grid), dim_(dim), values_(std::move(values)), symmetric_(symmetric) {
        if (dim < 1) throw std::invalid_argument("MatrixKernel: dim must be >= 1");
        const auto n = static_cast<Eigen::Index>(grid_.size()) * dim_;
        if (values_.rows() != n || values_.cols() != n) {
            throw std::invalid_argument("MatrixKernel: values must be (N*d) x (N*d) = " +
                                        std::to_string(n) + " square, got " +
                                        std::to_string(values_.rows()) + "x" +
                                        std::to_string(values_.cols()));
        }
        if (!values_.allFinite()) throw std::invalid_argument("MatrixKernel: non-finite entry");
        if (symmetric_) {
            const double asym = (values_ - values_.transpose()).cwiseAbs().maxCoeff();
            if (asym > kSymmetryTolerance) {
                throw std::invalid_argument("MatrixKernel: symmetric flag set but max |k(t,s)^T - k(s,t)| = " +
                                            std::to_string(asym));
            }
        }
    }

    static MatrixKernel zero(const TimeGrid& grid, int dim) {
        const auto n = static_cast<Eigen::Index>(grid.size()) * dim;
        return MatrixKernel(grid, dim, Eigen::MatrixXd::Zero(n, n), true);
    }

    /// Point-evaluates fn(t, s) -> d x d matrix at every pair of left nodes.
    template <class Fn>
    static MatrixKernel sample(const TimeGrid& grid, int dim, Fn&& fn, bool symmetric = false) {
        const auto n_nodes = static_cast<Eigen::Index>(grid.size());
        Eigen::MatrixXd values(n_nodes * dim, n_nodes * dim);
        for (Eigen::Index i = 0; i < n_nodes; ++i) {
            for (Eigen::Index j = 0; j < n_nodes; ++j) {
                values.block(i * dim, j * dim, dim, dim) =
                    fn(grid.node(static_cast<std::size_t>(i)), grid.node(static_cast<std::size_t>(j)));
            }
        }
        if (symmetric) values = 0.5 * (values + values.transpose()).eval();
        return MatrixKernel(grid, dim, std::move(values), symmetric);
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    int dim() const noexcept { return dim_; }
    Eigen::Index size() const noexcept { return values_.rows(); }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    bool symmetric() const noexcept { return symmetric_; }

    /// kappa(t_i, t_j) as a d x d block.
    Eigen::MatrixXd at(std::size_t i, std::size_t j) const {
        return values_.block(static_cast<Eigen::Index>(i) * dim_, static_cast<Eigen::Index>(j) * dim_,
                             dim_, dim_);
    }

    bool is_zero() const { return values_.isZero(0.0); }

    MatrixKernel scaled(double factor) const {
        return MatrixKernel(grid_, dim_, factor * values_, symmetric_);
    }

    friend MatrixKernel operator-(const MatrixKernel& a, const MatrixKernel& b);
    friend MatrixKernel operator+(const MatrixKernel& a, const MatrixKernel& b);

private:
    TimeGrid grid_;
    int dim_;
    Eigen::MatrixXd values_;
    bool symmetric_;
};

inline void require_compatible(const MatrixKernel& a, const MatrixKernel& b, const char* what) {
    if (!(a.grid() == b.grid()) || a.dim() != b.dim()) {
        throw std::invalid_argument(std::string(what) + ": kernels live on different grids or dimensions");
    }
}

inline MatrixKernel operator-(const MatrixKernel& a, const MatrixKernel& b) {
    require_compatible(a, b, "kernel difference");
    return MatrixKernel(a.grid_, a.dim_, a.values_ - b.values_, a.symmetric_ && b.symmetric_);
}

inline MatrixKernel operator+(const MatrixKernel& a, const MatrixKernel& b) {
    require_compatible(a, b, "kernel sum");
    return MatrixKernel(a.grid_, a.dim_, a.values_ + b.values_, a.symmetric_ && b.symmetric_);
}

/// Quadrature approximation of ||kappa||_2 = (sum |kappa(t_i,t_j)|_F^2 * step^2)^{1/2}.
inline double kernel_l2_norm(const MatrixKernel& kappa) {
    return kappa.values().norm() * kappa.grid().step();
}

/// kappa*(t,s) = kappa(s,t)^T.
inline MatrixKernel adjoint_kernel(const MatrixKernel& kappa) {
    return MatrixKernel(kappa.grid(), kappa.dim(), kappa.values().transpose(), kappa.symmetric());
}

/// Discretized u-integral: (a o b)(t_i, t_j) = sum_u a(t_i,t_u) b(t_u,t_j) step.
inline MatrixKernel compose_kernels(const MatrixKernel& a, const MatrixKernel& b) {
    require_compatible(a, b, "compose_kernels");
    Eigen::MatrixXd values = (a.values() * b.values()) * a.grid().step();
    return MatrixKernel(a.grid(), a.dim(), std::move(values));
}

namespace detail {

inline MatrixKernel symmetric_kernel(const TimeGrid& grid, int dim, Eigen::MatrixXd values) {
    values = 0.5 * (values + values.transpose()).eval();
    return MatrixKernel(grid, dim, std::move(values), true);
}

}  // namespace detail

/// c(kappa)(t,s) = int kappa(u,t)^T kappa(u,s) du.
inline MatrixKernel c_kernel(const MatrixKernel& kappa) {
    const auto& k = kappa.values();
    return detail::symmetric_kernel(kappa.grid(), kappa.dim(), (k.transpose() * k) * kappa.grid().step());
}

/// c(kappa; x)(t,s) = int (kappa(u,s)^T x) (x) (kappa(u,t)^T x) du, which in block
/// form is K^T (I_N (x) x x^T) K step.
inline MatrixKernel c_kernel(const MatrixKernel& kappa, const Eigen::VectorXd& x) {
    if (x.size() != kappa.dim()) {
        throw std::invalid_argument("c_kernels: x has dimension " + std::to_string(x.size()) +
                                    ", kernel has d = " + std::to_string(kappa.dim()));
    }
    if (!x.allFinite()) throw std::invalid_argument("c_kernels: x must be finite");
    const int d = kappa.dim();
    const auto n_nodes = static_cast<Eigen::Index>(kappa.grid().size());
    // rows of P = x^T kappa(t_u, t_j) for each u: P is N x (N*d)
    Eigen::MatrixXd projected(n_nodes, kappa.size());
    for (Eigen::Index u = 0; u < n_nodes; ++u) {
        projected.row(u) = x.transpose() * kappa.values().middleRows(u * d, d);
    }
    return detail::symmetric_kernel(kappa.grid(), d,
                                    (projected.transpose() * projected) * kappa.grid().step());
}

inline MatrixKernel c_kernels(const MatrixKernel& kappa, const std::optional<Eigen::VectorXd>& x) {
    return x ? c_kernel(kappa, *x) : c_kernel(kappa);
}

/// s(kappa) = -(kappa + kappa*).
inline MatrixKernel s_of_kappa(const MatrixKernel& kappa) {
    const auto& k = kappa.values();
    return detail::symmetric_kernel(kappa.grid(), kappa.dim(), -(k + k.transpose()));
}

/// eta(kappa) = -(kappa + kappa* + int kappa(u,.)^T kappa(u,.) du) = s(kappa) - c(kappa).
inline MatrixKernel eta_of_kappa(const MatrixKernel& kappa) {
    const auto& k = kappa.values();
    Eigen::MatrixXd values = -(k + k.transpose() + (k.transpose() * k) * kappa.grid().step());
    return detail::symmetric_kernel(kappa.grid(), kappa.dim(), std::move(values));
}

/// kappa_phi(t_i, t_j) = sum_{u >= j} phi(t_i, t_u) step, the right Riemann tail
/// sum of int_s^T phi(t,u) du. Exact at nodes for constant phi.
inline MatrixKernel kappa_from_phi(const MatrixKernel& phi) {
    const int d = phi.dim();
    const auto n_nodes = static_cast<Eigen::Index>(phi.grid().size());
    const double step = phi.grid().step();
    Eigen::MatrixXd values(phi.size(), phi.size());
    Eigen::MatrixXd running = Eigen::MatrixXd::Zero(phi.size(), d);
    for (Eigen::Index j = n_nodes - 1; j >= 0; --j) {
        running += phi.values().middleCols(j * d, d) * step;
        values.middleCols(j * d, d) = running;
    }
    return MatrixKernel(phi.grid(), d, std::move(values));
}

}  // namespace wienerop
