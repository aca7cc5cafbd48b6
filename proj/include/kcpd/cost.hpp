#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kcpd/kernels.hpp"

namespace kcpd {

/// 1-based inclusive index range [first, last].
struct Block {
  std::size_t first;
  std::size_t last;

  std::size_t size() const { return last - first + 1; }
};

/// 2-D prefix sums of a Gram matrix plus prefix sums of its diagonal, so
/// that any rectangular Gram sum is an O(1) query.
///
/// Storage is (T+1) x (T+1) in long double; the subtraction
/// S[e][e] - 2 S[s-1][e] + S[s-1][s-1] cancels heavily at large T.
class GramPrefix {
 public:
  explicit GramPrefix(const GramMatrix& gram);

  std::size_t length() const { return size_; }

  /// S[i][j] = sum of G[a][b] over 1 <= a <= i, 1 <= b <= j.
  long double prefix(std::size_t i, std::size_t j) const { return sums_[i * (size_ + 1) + j]; }
  /// D[i] = sum of G[a][a] over 1 <= a <= i.
  long double diag_prefix(std::size_t i) const { return diag_[i]; }

  /// Sum of G over rows in `rows` and columns in `cols`.
  long double rect_sum(Block rows, Block cols) const {
    const std::size_t stride = size_ + 1;
    const std::size_t r0 = rows.first - 1;
    const std::size_t c0 = cols.first - 1;
    return sums_[rows.last * stride + cols.last] - sums_[r0 * stride + cols.last] -
           sums_[rows.last * stride + c0] + sums_[r0 * stride + c0];
  }
  long double block_sum(Block b) const { return rect_sum(b, b); }
  long double diag_sum(Block b) const { return diag_[b.last] - diag_[b.first - 1]; }

  /// Throws ValidationError unless 1 <= b.first <= b.last <= T.
  void check(Block b) const;

  /// block_cost without the range check; callers guarantee 1 <= s <= e <= T.
  double cost_unchecked(std::size_t s, std::size_t e) const {
    if (s == e) return 0.0;
    const Block b{s, e};
    return static_cast<double>(diag_sum(b) - block_sum(b) / static_cast<long double>(b.size()));
  }

 private:
  std::size_t size_;
  std::vector<long double> sums_;
  std::vector<long double> diag_;
};

GramPrefix build_prefix(const GramMatrix& gram);

/// Within-block RKHS scatter: sum_t k(Y_t, Y_t) - (1/n) sum_{i,j} k(Y_i, Y_j)
/// over s..e (1-based, inclusive). The raw value is returned, so it can be a
/// hair below zero from roundoff. Blocks of length 1 return exactly 0.
double block_cost(const GramPrefix& prefix, std::size_t s, std::size_t e);

struct BlockCostReport {
  std::size_t s;
  std::size_t e;
  std::size_t n;
  double cost;
};

BlockCostReport block_cost_report(const GramPrefix& prefix, std::size_t s, std::size_t e);

/// Biased (V-statistic) squared MMD between the empirical distributions on
/// two blocks: mean K(A,A) + mean K(B,B) - 2 mean K(A,B).
double mmd2_empirical(const GramPrefix& prefix, Block a, Block b);

/// Expected block cost of a stationary m-dependent segment of length n:
///   (n-1)(c0 - c_inf) - 2 sum_{l=1}^{min(n-1,m)} (1 - l/n)(c_l - c_inf)
/// where autocov[l-1] = c_l = E k(Y_1, Y_{1+l}) for l = 1..m.
double expected_block_cost_stationary(double c0, std::span<const double> autocov, double c_inf,
                                      std::size_t n);

}  // namespace kcpd
