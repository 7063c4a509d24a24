#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace wienerop {

/// Uniform left-endpoint discretization of [0, T]: nodes t_i = i * step for
/// i = 0..N-1. Every stochastic sum built on these nodes is non-anticipating.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t n_steps)
        : horizon_(horizon), n_steps_(n_steps) {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) {
            throw std::invalid_argument("TimeGrid: horizon must be positive and finite, got " +
                                        std::to_string(horizon));
        }
        if (n_steps < 2) {
            throw std::invalid_argument("TimeGrid: n_steps must be >= 2, got " +
                                        std::to_string(n_steps));
        }
        step_ = horizon / static_cast<double>(n_steps);
    }

    double horizon() const noexcept { return horizon_; }
    std::size_t size() const noexcept { return n_steps_; }
    double step() const noexcept { return step_; }
    double node(std::size_t i) const noexcept { return static_cast<double>(i) * step_; }
    double midpoint(std::size_t i) const noexcept { return (static_cast<double>(i) + 0.5) * step_; }

    /// All N + 1 nodes, t_0 = 0 through t_N = T.
    std::vector<double> nodes() const {
        std::vector<double> out(n_steps_ + 1);
        for (std::size_t i = 0; i <= n_steps_; ++i) out[i] = node(i);
        return out;
    }

    /// Index k with node(k) closest to tau, clamped to [0, N]; k == N denotes T.
    std::size_t nearest_index(double tau) const noexcept {
        double k = std::floor(tau / step_ + 0.5);
        if (k < 0.0) return 0;
        if (k > static_cast<double>(n_steps_)) return n_steps_;
        return static_cast<std::size_t>(k);
    }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) noexcept {
        return a.horizon_ == b.horizon_ && a.n_steps_ == b.n_steps_;
    }

private:
    double horizon_;
    std::size_t n_steps_;
    double step_ = 0.0;
};

inline TimeGrid make_grid(double horizon, std::size_t n_steps) { return TimeGrid(horizon, n_steps); }

}  // namespace wienerop
