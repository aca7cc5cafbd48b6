#include "kcpd/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kcpd/error.hpp"

namespace kcpd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Pruning only needs to be safe, not tight, so it uses a looser margin than
// the tie tolerance to absorb prefix-sum roundoff in the superadditivity step.
constexpr double kPruneMargin = 1e-9;

// Best partial solutions over [1, t] for t = 0..T, with back-pointers.
struct Trellis {
  explicit Trellis(std::size_t T)
      : value(T + 1, kInf), count(T + 1, 0), prev(T + 1, kNone) {
    value[0] = 0.0;
  }

  std::vector<double> value;
  std::vector<std::size_t> count;
  std::vector<std::size_t> prev;

  // Change points of the best solution ending at t.
  std::vector<std::size_t> path(std::size_t t) const {
    std::vector<std::size_t> out;
    for (std::size_t cur = t; cur != 0 && cur != kNone; cur = prev[cur]) {
      if (prev[cur] != 0 && prev[cur] != kNone) out.push_back(prev[cur]);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  // Change points of the route that closes its last block at t after s.
  std::vector<std::size_t> route(std::size_t s) const {
    std::vector<std::size_t> out = path(s);
    if (s != 0) out.push_back(s);
    return out;
  }

  // Whether entering t from s with (v, c) beats the current choice at t.
  bool improves(std::size_t t, std::size_t s, double v, std::size_t c) const {
    if (prev[t] == kNone) return true;
    if (v < value[t] - kTieTolerance) return true;
    if (v > value[t] + kTieTolerance) return false;
    if (c != count[t]) return c < count[t];
    const auto mine = route(s);
    const auto theirs = route(prev[t]);
    return std::lexicographical_compare(mine.begin(), mine.end(), theirs.begin(), theirs.end());
  }

  void relax(std::size_t t, std::size_t s, double v, std::size_t c) {
    if (improves(t, s, v, c)) {
      value[t] = v;
      count[t] = c;
      prev[t] = s;
    }
  }
};

void check_beta(double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw ValidationError("penalty beta must be finite and nonnegative");
  }
}

void check_min_size(const GramPrefix& prefix, const SolverOptions& options) {
  if (options.min_size < 1) {
    throw ValidationError("min_size must be at least 1");
  }
  if (options.min_size > prefix.length()) {
    throw ValidationError("min_size " + std::to_string(options.min_size) +
                          " exceeds sequence length " + std::to_string(prefix.length()));
  }
}

SegmentationResult make_result(const GramPrefix& prefix, std::vector<std::size_t> change_points,
                               double beta) {
  Segmentation seg(prefix.length(), std::move(change_points));
  std::vector<double> costs;
  double total = 0.0;
  for (const Block& b : seg.blocks()) {
    costs.push_back(prefix.cost_unchecked(b.first, b.last));
    total += costs.back();
  }
  total += beta * static_cast<double>(seg.num_change_points());
  return {std::move(seg), total, std::move(costs), beta};
}

}  // namespace

Segmentation::Segmentation(std::size_t length, std::vector<std::size_t> change_points)
    : length_(length), change_points_(std::move(change_points)) {
  if (length_ == 0) {
    throw ValidationError("segmentation length must be positive");
  }
  std::size_t last = 0;
  for (std::size_t tau : change_points_) {
    if (tau <= last || tau >= length_) {
      throw ValidationError("change points must be strictly increasing inside (0, " +
                            std::to_string(length_) + "); got " + std::to_string(tau));
    }
    last = tau;
  }
}

std::vector<Block> Segmentation::blocks() const {
  std::vector<Block> out;
  out.reserve(change_points_.size() + 1);
  std::size_t start = 1;
  for (std::size_t tau : change_points_) {
    out.push_back({start, tau});
    start = tau + 1;
  }
  out.push_back({start, length_});
  return out;
}

std::size_t Segmentation::min_block_length() const {
  std::size_t shortest = length_;
  for (const Block& b : blocks()) shortest = std::min(shortest, b.size());
  return shortest;
}

double penalty_value(const PenaltySchedule& schedule, std::size_t T) {
  if (T == 0) {
    throw ValidationError("sequence length must be positive");
  }
  if (!(schedule.C >= 0.0)) {
    throw ValidationError("penalty constant C must be nonnegative");
  }
  const double n = static_cast<double>(T);
  return schedule.C * std::sqrt(n * std::log(n));
}

double penalty_floor_a5(std::size_t m, double M, std::size_t T) {
  const double n = static_cast<double>(T);
  const double mm = static_cast<double>(m);
  return 16.0 * M * std::sqrt(2.0 * (8.0 * mm + 5.0) * n * std::log(n)) + 2.0 * M * (1.0 + 6.0 * mm);
}

SegmentationResult dp_penalized(const GramPrefix& prefix, double beta, SolverOptions options) {
  check_beta(beta);
  check_min_size(prefix, options);
  const std::size_t T = prefix.length();
  const std::size_t min_size = options.min_size;
  Trellis trellis(T);
  for (std::size_t t = min_size; t <= T; ++t) {
    for (std::size_t s = 0; s + min_size <= t; ++s) {
      if (trellis.prev[s] == kNone && s != 0) continue;
      const bool split = s > 0;
      const double v = trellis.value[s] + prefix.cost_unchecked(s + 1, t) + (split ? beta : 0.0);
      trellis.relax(t, s, v, trellis.count[s] + (split ? 1 : 0));
    }
  }
  return make_result(prefix, trellis.path(T), beta);
}

SegmentationResult dp_fixed_k(const GramPrefix& prefix, std::size_t num_change_points,
                              SolverOptions options) {
  check_min_size(prefix, options);
  const std::size_t T = prefix.length();
  const std::size_t min_size = options.min_size;
  const std::size_t segments = num_change_points + 1;
  if (num_change_points >= T || segments * min_size > T) {
    throw ValidationError("cannot place " + std::to_string(num_change_points) +
                          " change points in a sequence of length " + std::to_string(T) +
                          " with min_size " + std::to_string(min_size));
  }

  // layers[j] holds the best split of [1, t] into exactly j + 1 blocks.
  std::vector<Trellis> layers;
  layers.reserve(segments);
  layers.emplace_back(T);
  for (std::size_t t = min_size; t <= T; ++t) {
    layers[0].relax(t, 0, prefix.cost_unchecked(1, t), 0);
  }
  for (std::size_t j = 1; j < segments; ++j) {
    const Trellis& below = layers[j - 1];
    Trellis layer(T);
    for (std::size_t t = (j + 1) * min_size; t <= T; ++t) {
      for (std::size_t s = j * min_size; s + min_size <= t; ++s) {
        if (below.prev[s] == kNone) continue;
        const double v = below.value[s] + prefix.cost_unchecked(s + 1, t);
        // Every candidate has j change points, so ties fall through to the
        // lexicographic rule. route() must see this layer's predecessors.
        if (layer.prev[t] == kNone || v < layer.value[t] - kTieTolerance) {
          layer.value[t] = v;
          layer.count[t] = j;
          layer.prev[t] = s;
        } else if (v <= layer.value[t] + kTieTolerance) {
          auto route_of = [&](std::size_t from) {
            std::vector<std::size_t> out;
            std::size_t cur = from;
            for (std::size_t level = j; level-- > 0;) {
              out.push_back(cur);
              cur = layers[level].prev[cur];
            }
            std::reverse(out.begin(), out.end());
            return out;
          };
          const auto mine = route_of(s);
          const auto theirs = route_of(layer.prev[t]);
          if (std::lexicographical_compare(mine.begin(), mine.end(), theirs.begin(), theirs.end())) {
            layer.value[t] = v;
            layer.prev[t] = s;
          }
        }
      }
    }
    layers.push_back(std::move(layer));
  }

  std::vector<std::size_t> change_points;
  std::size_t cur = T;
  for (std::size_t level = segments - 1; level > 0; --level) {
    cur = layers[level].prev[cur];
    change_points.push_back(cur);
  }
  std::reverse(change_points.begin(), change_points.end());
  return make_result(prefix, std::move(change_points), 0.0);
}

SegmentationResult pelt_penalized(const GramPrefix& prefix, double beta, SolverOptions options,
                                  PeltStats* stats) {
  check_beta(beta);
  check_min_size(prefix, options);
  const std::size_t T = prefix.length();
  const std::size_t min_size = options.min_size;
  Trellis trellis(T);

  struct Candidate {
    std::size_t start;
    std::size_t expires;  // first t at which this start is no longer considered
  };
  std::vector<Candidate> candidates{{0, kNone}};
  if (stats) stats->candidates.assign(T + 1, 0);

  for (std::size_t t = 1; t <= T; ++t) {
    for (const Candidate& c : candidates) {
      if (c.start + min_size > t) continue;
      const bool split = c.start > 0;
      const double v =
          trellis.value[c.start] + prefix.cost_unchecked(c.start + 1, t) + (split ? beta : 0.0);
      trellis.relax(t, c.start, v, trellis.count[c.start] + (split ? 1 : 0));
    }
    if (stats) stats->candidates[t] = candidates.size();
    if (trellis.prev[t] == kNone) {
      // t < min_size: nothing can end here yet, and nothing can be pruned.
      continue;
    }

    // Starting a new block after t costs value[t] + beta. Any start whose
    // block up to t already exceeds that can never win once t is usable.
    const double open_t = trellis.value[t] + beta;
    for (Candidate& c : candidates) {
      if (c.start + min_size > t || c.expires != kNone) continue;
      const double entry = trellis.value[c.start] + (c.start > 0 ? beta : 0.0);
      if (entry + prefix.cost_unchecked(c.start + 1, t) > open_t + kPruneMargin) {
        c.expires = t + min_size;
      }
    }
    std::erase_if(candidates, [&](const Candidate& c) { return c.expires <= t + 1; });
    candidates.push_back({t, kNone});
  }
  return make_result(prefix, trellis.path(T), beta);
}

double objective(const GramPrefix& prefix, const Segmentation& seg, double beta) {
  if (seg.length() != prefix.length()) {
    throw ValidationError("segmentation length " + std::to_string(seg.length()) +
                          " does not match sequence length " + std::to_string(prefix.length()));
  }
  check_beta(beta);
  double total = 0.0;
  for (const Block& b : seg.blocks()) total += prefix.cost_unchecked(b.first, b.last);
  return total + beta * static_cast<double>(seg.num_change_points());
}

}  // namespace kcpd
