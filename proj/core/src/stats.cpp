#include "drl/stats.hpp"

#include <algorithm>
#include <vector>

#include "drl/error.hpp"

namespace drl {

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::kInvalidArgument, "mean of empty sequence");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

double median(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::kInvalidArgument, "median of empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  if (sorted.size() % 2 == 1) return sorted[mid];
  return 0.5 * (sorted[mid - 1] + sorted[mid]);
}

}  // namespace drl
