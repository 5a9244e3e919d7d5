#pragma once

#include <span>

namespace drl {

double mean(std::span<const double> values);

// Unbiased (n - 1) sample variance; zero for fewer than two values.
double sample_variance(std::span<const double> values);

// Median of a copy of `values`; the mean of the middle pair for even sizes.
double median(std::span<const double> values);

}  // namespace drl
