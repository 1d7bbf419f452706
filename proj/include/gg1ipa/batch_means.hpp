#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace gg1ipa {

inline constexpr std::size_t kDefaultBatches = 64;

/// Non-overlapping batch means of a stationary output sequence.
struct BatchSummary {
    double mean = 0.0;
    double std_error = 0.0;
    std::vector<double> batch_means;  // one entry per batch, customer order
};

/// Contiguous batch boundaries over n items; the first n % batches batches hold one extra.
inline std::vector<std::size_t> batch_bounds(std::size_t n, std::size_t batches) {
    if (batches == 0) throw std::invalid_argument("batch count must be >= 1");
    const std::size_t b = std::min(batches, n == 0 ? std::size_t{1} : n);
    std::vector<std::size_t> bounds(b + 1, 0);
    const std::size_t base = n / b;
    const std::size_t extra = n % b;
    for (std::size_t i = 0; i < b; ++i) bounds[i + 1] = bounds[i] + base + (i < extra ? 1 : 0);
    return bounds;
}

/// Standard error of the mean of `values` treated as i.i.d. batch statistics.
inline double std_error_of_mean(std::span<const double> values) {
    const std::size_t b = values.size();
    if (b < 2) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(b);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / (static_cast<double>(b) * static_cast<double>(b - 1)));
}

/// Batch means of `values`, each batch mean scaled by `scale`. The reported mean is
/// the overall mean times `scale`, not the average of the batch means.
inline BatchSummary batch_means(std::span<const double> values, double scale = 1.0,
                                std::size_t batches = kDefaultBatches) {
    BatchSummary out;
    if (values.empty()) return out;
    const auto bounds = batch_bounds(values.size(), batches);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        double s = 0.0;
        for (std::size_t k = bounds[i]; k < bounds[i + 1]; ++k) s += values[k];
        total += s;
        out.batch_means.push_back(scale * s / static_cast<double>(bounds[i + 1] - bounds[i]));
    }
    out.mean = scale * total / static_cast<double>(values.size());
    out.std_error = std_error_of_mean(out.batch_means);
    return out;
}

/// Batch ratio estimator sum(numerator) / sum(denominator), per batch and overall.
inline BatchSummary batch_ratio(std::span<const double> numerator, std::span<const double> denominator,
                                std::size_t batches = kDefaultBatches) {
    if (numerator.size() != denominator.size()) throw std::invalid_argument("ratio inputs differ in length");
    BatchSummary out;
    if (numerator.empty()) return out;
    const auto bounds = batch_bounds(numerator.size(), batches);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        double a = 0.0;
        double b = 0.0;
        for (std::size_t k = bounds[i]; k < bounds[i + 1]; ++k) {
            a += numerator[k];
            b += denominator[k];
        }
        num += a;
        den += b;
        out.batch_means.push_back(b != 0.0 ? a / b : 0.0);
    }
    out.mean = den != 0.0 ? num / den : 0.0;
    out.std_error = std_error_of_mean(out.batch_means);
    return out;
}

/// SE of the difference of two estimators computed on the same batches.
inline double joint_std_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("batch vectors differ in length");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    return std_error_of_mean(diff);
}

/// Combines independent replications: mean of the values and sqrt(sum se^2) / R.
struct Pooled {
    double mean = 0.0;
    double std_error = 0.0;
};

inline Pooled pool(std::span<const double> values, std::span<const double> std_errors) {
    Pooled p;
    if (values.empty()) return p;
    double ss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        p.mean += values[i];
        ss += std_errors[i] * std_errors[i];
    }
    const double r = static_cast<double>(values.size());
    p.mean /= r;
    p.std_error = std::sqrt(ss) / r;
    return p;
}

}  // namespace gg1ipa
