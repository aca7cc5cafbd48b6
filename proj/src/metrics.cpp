#include "kcpd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kcpd/error.hpp"

namespace kcpd {

namespace {

// counts[x] = number of change points <= x, for x = 0..T.
std::vector<std::size_t> cumulative_counts(const Segmentation& seg) {
  std::vector<std::size_t> counts(seg.length() + 1, 0);
  for (std::size_t tau : seg.change_points()) counts[tau] = 1;
  for (std::size_t x = 1; x < counts.size(); ++x) counts[x] += counts[x - 1];
  return counts;
}

void check_pair(const Segmentation& ref, const Segmentation& hyp, std::size_t window) {
  if (ref.length() != hyp.length()) {
    throw ValidationError("reference has length " + std::to_string(ref.length()) +
                          " but hypothesis has length " + std::to_string(hyp.length()));
  }
  if (window < 1 || window >= ref.length()) {
    throw ValidationError("window " + std::to_string(window) + " must lie in [1, " +
                          std::to_string(ref.length()) + ")");
  }
}

double nearest_distance(std::size_t point, const std::vector<std::size_t>& sorted) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), point);
  std::size_t best = std::numeric_limits<std::size_t>::max();
  if (it != sorted.end()) best = *it - point;
  if (it != sorted.begin()) best = std::min(best, point - *std::prev(it));
  return static_cast<double>(best);
}

double directed(const std::vector<std::size_t>& from, const std::vector<std::size_t>& to) {
  double worst = 0.0;
  for (std::size_t p : from) worst = std::max(worst, nearest_distance(p, to));
  return worst;
}

}  // namespace

std::size_t default_window(const Segmentation& ref) {
  const double half = static_cast<double>(ref.length()) /
                      (2.0 * static_cast<double>(ref.num_change_points() + 1));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::round(half)));
}

double pk(const Segmentation& ref, const Segmentation& hyp, std::size_t window) {
  check_pair(ref, hyp, window);
  const auto r = cumulative_counts(ref);
  const auto h = cumulative_counts(hyp);
  const std::size_t probes = ref.length() - window;
  std::size_t misses = 0;
  for (std::size_t i = 1; i <= probes; ++i) {
    const bool same_ref = r[i + window - 1] == r[i - 1];
    const bool same_hyp = h[i + window - 1] == h[i - 1];
    misses += same_ref != same_hyp;
  }
  return static_cast<double>(misses) / static_cast<double>(probes);
}

double window_diff(const Segmentation& ref, const Segmentation& hyp, std::size_t window) {
  check_pair(ref, hyp, window);
  const auto r = cumulative_counts(ref);
  const auto h = cumulative_counts(hyp);
  const std::size_t probes = ref.length() - window;
  std::size_t misses = 0;
  for (std::size_t i = 1; i <= probes; ++i) {
    misses += (r[i + window - 1] - r[i - 1]) != (h[i + window - 1] - h[i - 1]);
  }
  return static_cast<double>(misses) / static_cast<double>(probes);
}

LocationError location_error(const Segmentation& truth, const Segmentation& est, std::size_t ell) {
  if (ell < 1) {
    throw ValidationError("location error normaliser must be at least 1");
  }
  const auto& t = truth.change_points();
  const auto& e = est.change_points();
  if (t.empty() && e.empty()) return {0.0, 0.0};
  if (t.empty() || e.empty()) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {inf, inf};
  }
  const double scale = static_cast<double>(ell);
  return {directed(e, t) / scale, directed(t, e) / scale};
}

MetricReport evaluate(const Segmentation& ref, const Segmentation& hyp,
                      std::optional<std::size_t> window, std::optional<std::size_t> ell) {
  const std::size_t w = window.value_or(default_window(ref));
  const std::size_t l = ell.value_or(ref.min_block_length());
  const LocationError loc = location_error(ref, hyp, l);
  return {pk(ref, hyp, w),
          window_diff(ref, hyp, w),
          w,
          ref.num_change_points(),
          hyp.num_change_points(),
          ref.num_change_points() == hyp.num_change_points(),
          loc.true_to_est,
          loc.est_to_true,
          l};
}

}  // namespace kcpd
