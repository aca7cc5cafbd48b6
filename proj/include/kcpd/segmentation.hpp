#pragma once

#include <cstddef>
#include <vector>

#include "kcpd/cost.hpp"

namespace kcpd {

/// Interior change points 0 < tau_1 < ... < tau_K < T of a sequence of length
/// T. A change point at tau separates positions tau and tau + 1 (1-based).
class Segmentation {
 public:
  /// Throws ValidationError on T == 0, unsorted, duplicate or out-of-range points.
  explicit Segmentation(std::size_t length, std::vector<std::size_t> change_points = {});

  std::size_t length() const { return length_; }
  const std::vector<std::size_t>& change_points() const { return change_points_; }
  std::size_t num_change_points() const { return change_points_.size(); }

  /// The K + 1 blocks, 1-based inclusive.
  std::vector<Block> blocks() const;
  /// Shortest block length.
  std::size_t min_block_length() const;

  friend bool operator==(const Segmentation&, const Segmentation&) = default;

 private:
  std::size_t length_;
  std::vector<std::size_t> change_points_;
};

/// beta_T = C * sqrt(T ln T), plus the constants of the theoretical floor.
struct PenaltySchedule {
  double C = 0.1;
  std::size_t m_hint = 0;
  double bound = 1.0;
};

double penalty_value(const PenaltySchedule& schedule, std::size_t T);

/// Smallest penalty covered by the consistency theory:
///   16 M sqrt(2 (8m + 5) T ln T) + 2 M (1 + 6m).
/// Diagnostic only; practical penalties sit far below it.
double penalty_floor_a5(std::size_t m, double M, std::size_t T);

struct SegmentationResult {
  Segmentation segmentation;
  double objective;
  std::vector<double> per_segment_costs;
  double beta_used;
};

struct SolverOptions {
  std::size_t min_size = 1;
};

/// Candidate-set sizes seen by the pruned solver, indexed by t = 1..T.
struct PeltStats {
  std::vector<std::size_t> candidates;
};

/// Objectives closer than this are treated as equal. Ties go to fewer change
/// points, then to the lexicographically smallest change-point list.
inline constexpr double kTieTolerance = 1e-12;

/// Exact minimiser of sum_k C(tau_{k-1}+1, tau_k) + beta * K over all
/// segmentations, O(T^2).
SegmentationResult dp_penalized(const GramPrefix& prefix, double beta, SolverOptions options = {});

/// Exact minimiser of the summed block cost with exactly `num_change_points`
/// interior boundaries, O(K T^2).
SegmentationResult dp_fixed_k(const GramPrefix& prefix, std::size_t num_change_points,
                              SolverOptions options = {});

/// Same result as dp_penalized. Candidates are discarded once they are
/// strictly dominated; this is exact because kernel block costs are
/// superadditive under splitting.
SegmentationResult pelt_penalized(const GramPrefix& prefix, double beta, SolverOptions options = {},
                                  PeltStats* stats = nullptr);

/// L = sum of block costs + beta * K.
double objective(const GramPrefix& prefix, const Segmentation& seg, double beta);

}  // namespace kcpd
