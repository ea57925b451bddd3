#include "swan/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "swan/error.hpp"

namespace swan::metrics {

double auc(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) throw DimensionError("auc: labels and scores differ in length");
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the rank sum of positives keeps tied ranks integral.
    long double rank_sum2 = 0.0L;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const std::size_t doubled_rank = i + j + 1;  // 2 · mean of 1-based ranks i+1..j
        for (std::size_t t = i; t < j; ++t) {
            const int y = labels[order[t]];
            if (y != 0 && y != 1) throw MetricError("auc: labels must be 0 or 1");
            if (y == 1) {
                rank_sum2 += static_cast<long double>(doubled_rank);
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) throw MetricError("auc: needs at least one positive and one negative");
    const long double p = static_cast<long double>(positives);
    // U is a multiple of 0.5 and the pair count an integer, both exact in a
    // double, so the result is the correctly rounded quotient.
    const double u = static_cast<double>((rank_sum2 - p * (p + 1.0L)) / 2.0L);
    return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

double gini(std::span<const double> values) {
    if (values.empty()) throw MetricError("gini: empty input");
    std::vector<double> x(values.begin(), values.end());
    for (double v : x)
        if (v < 0.0) throw MetricError("gini: values must be non-negative");
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double total = 0.0;
    // Σᵢ Σⱼ |xᵢ − xⱼ| = 2 Σᵢ (2i − n + 1)·x₍ᵢ₎ over the sorted values.
    double weighted = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        total += x[i];
        weighted += (2.0 * static_cast<double>(i) - n + 1.0) * x[i];
    }
    if (!(total > 0.0)) throw MetricError("gini: mean must be positive");
    return 2.0 * weighted / (2.0 * n * total);
}

}  // namespace swan::metrics
