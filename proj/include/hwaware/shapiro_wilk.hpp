#pragma once

#include <span>

namespace hwaware {

struct ShapiroWilkResult {
    double w = 0.0;
    double p = 0.0;
};

/// Shapiro-Wilk normality test using Royston's approximation (algorithm
/// AS R94). Valid for 3 <= n <= 5000. The input need not be sorted.
///
/// Throws std::invalid_argument when n is out of range or every sample is
/// identical.
ShapiroWilkResult shapiro_wilk(std::span<const double> samples);

}  // namespace hwaware
