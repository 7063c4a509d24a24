#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace wienerop {

/// Pairwise (cascade) summation in a fixed order, so results do not depend
/// on how the per-sample values were produced.
inline double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kLeaf = 64;
    if (values.size() <= kLeaf) {
        double sum = 0.0;
        for (double v : values) sum += v;
        return sum;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline double pairwise_sum(const Eigen::VectorXd& values) {
    return pairwise_sum(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

/// Monte Carlo mean with standard error. `std_error` is empty when the second
/// moment of the sampled quantity is not finite (no confidence interval).
struct MCEstimate {
    double mean = 0.0;
    std::optional<double> std_error;
    std::size_t n_samples = 0;
    bool ci_valid = true;
    /// Median of sub-batch means; used instead of a z-score when ci_valid is false.
    double batch_median = 0.0;
    /// Second smallest and second largest sub-batch means: a rough 5%-95%
    /// band of the batch-mean sampling distribution.
    double batch_low = 0.0;
    double batch_high = 0.0;

    double se_or_zero() const { return std_error.value_or(0.0); }
};

inline constexpr std::size_t kSubBatches = 20;

inline double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
    std::nth_element(values.begin(), mid, values.end());
    double upper = *mid;
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), mid);
    return 0.5 * (lower + upper);
}

inline MCEstimate estimate(const Eigen::VectorXd& samples, bool ci_valid = true) {
    MCEstimate est;
    est.n_samples = static_cast<std::size_t>(samples.size());
    est.ci_valid = ci_valid;
    if (samples.size() == 0) return est;
    const double n = static_cast<double>(samples.size());
    est.mean = pairwise_sum(samples) / n;
    const Eigen::VectorXd dev2 = (samples.array() - est.mean).square().matrix();
    const double var = samples.size() > 1 ? pairwise_sum(dev2) / (n - 1.0) : 0.0;
    if (ci_valid) est.std_error = std::sqrt(var / n);

    const std::size_t batches = std::min<std::size_t>(kSubBatches, est.n_samples);
    const std::size_t per = est.n_samples / batches;
    std::vector<double> means;
    means.reserve(batches);
    for (std::size_t b = 0; b < batches; ++b) {
        const auto* first = samples.data() + b * per;
        means.push_back(pairwise_sum(std::span<const double>(first, per)) / static_cast<double>(per));
    }
    std::sort(means.begin(), means.end());
    const std::size_t trim = means.size() >= 4 ? 1 : 0;
    est.batch_low = means[trim];
    est.batch_high = means[means.size() - 1 - trim];
    est.batch_median = median(std::move(means));
    return est;
}

/// Sample variance with the standard error of that variance estimate (from
/// the sample fourth central moment).
struct VarianceEstimate {
    double variance = 0.0;
    double std_error = 0.0;
};

inline VarianceEstimate estimate_variance(const Eigen::VectorXd& samples) {
    const double n = static_cast<double>(samples.size());
    const double mean = pairwise_sum(samples) / n;
    const Eigen::ArrayXd dev = samples.array() - mean;
    const Eigen::VectorXd dev2 = dev.square().matrix();
    const Eigen::VectorXd dev4 = dev.square().square().matrix();
    const double m2 = pairwise_sum(dev2) / n;
    const double m4 = pairwise_sum(dev4) / n;
    return {m2 * n / (n - 1.0), std::sqrt(std::max(m4 - m2 * m2, 0.0) / n)};
}

}  // namespace wienerop
