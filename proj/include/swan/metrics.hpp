#pragma once

#include <span>

namespace swan::metrics {

// Mann-Whitney AUC: concordant positive/negative pairs plus half the tied
// pairs, over #pos·#neg. Computed from average ranks in O(n log n). Throws
// MetricError unless both classes are present.
double auc(std::span<const int> labels, std::span<const double> scores);

// Σᵢ Σⱼ |xᵢ − xⱼ| / (2 n² x̄) for non-negative values. Throws MetricError on
// empty input, negative entries, or a zero mean.
double gini(std::span<const double> values);

}  // namespace swan::metrics
