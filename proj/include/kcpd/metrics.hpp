#pragma once

#include <cstddef>
#include <optional>

#include "kcpd/segmentation.hpp"

namespace kcpd {

/// Half the average reference segment length, rounded half away from zero,
/// never below 1.
std::size_t default_window(const Segmentation& ref);

/// Fraction of probe pairs (i, i + w), i = 1..T-w, on which ref and hyp
/// disagree about whether both ends lie in the same segment.
double pk(const Segmentation& ref, const Segmentation& hyp, std::size_t window);

/// Fraction of windows i = 1..T-w whose boundary counts differ between ref
/// and hyp. A window counts the boundaries tau with i <= tau < i + w, i.e.
/// the boundaries crossed when walking from position i to position i + w.
double window_diff(const Segmentation& ref, const Segmentation& hyp, std::size_t window);

/// One-sided Hausdorff distances between change-point sets, divided by ell.
/// Both are +infinity when exactly one of the sets is empty and 0 when both are.
struct LocationError {
  double est_to_true;  // max over estimated points of the distance to the nearest true point
  double true_to_est;  // max over true points of the distance to the nearest estimate
};

LocationError location_error(const Segmentation& truth, const Segmentation& est, std::size_t ell);

struct MetricReport {
  double pk;
  double window_diff;
  std::size_t window;
  std::size_t k_true;
  std::size_t k_est;
  bool k_match;
  double loc_err_true_to_est;
  double loc_err_est_to_true;
  std::size_t ell;
};

/// Window defaults to default_window(ref); ell defaults to the shortest
/// reference block.
MetricReport evaluate(const Segmentation& ref, const Segmentation& hyp,
                      std::optional<std::size_t> window = std::nullopt,
                      std::optional<std::size_t> ell = std::nullopt);

}  // namespace kcpd
