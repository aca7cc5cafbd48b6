#include "kcpd/cost.hpp"

#include <algorithm>
#include <string>

#include "kcpd/error.hpp"

namespace kcpd {

GramPrefix::GramPrefix(const GramMatrix& gram)
    : size_(gram.size()), sums_((gram.size() + 1) * (gram.size() + 1), 0.0L),
      diag_(gram.size() + 1, 0.0L) {
  const std::size_t stride = size_ + 1;
  for (std::size_t i = 1; i <= size_; ++i) {
    long double row = 0.0L;
    for (std::size_t j = 1; j <= size_; ++j) {
      row += gram(i - 1, j - 1);
      sums_[i * stride + j] = sums_[(i - 1) * stride + j] + row;
    }
    diag_[i] = diag_[i - 1] + gram(i - 1, i - 1);
  }
}

void GramPrefix::check(Block b) const {
  if (b.first < 1 || b.first > b.last || b.last > size_) {
    throw ValidationError("block [" + std::to_string(b.first) + ", " + std::to_string(b.last) +
                          "] is outside [1, " + std::to_string(size_) + "]");
  }
}

GramPrefix build_prefix(const GramMatrix& gram) { return GramPrefix(gram); }

double block_cost(const GramPrefix& prefix, std::size_t s, std::size_t e) {
  prefix.check(Block{s, e});
  return prefix.cost_unchecked(s, e);
}

BlockCostReport block_cost_report(const GramPrefix& prefix, std::size_t s, std::size_t e) {
  return {s, e, e - s + 1, block_cost(prefix, s, e)};
}

double mmd2_empirical(const GramPrefix& prefix, Block a, Block b) {
  prefix.check(a);
  prefix.check(b);
  if (a.first == b.first && a.last == b.last) {
    return 0.0;
  }
  const auto na = static_cast<long double>(a.size());
  const auto nb = static_cast<long double>(b.size());
  return static_cast<double>(prefix.block_sum(a) / (na * na) + prefix.block_sum(b) / (nb * nb) -
                             2.0L * prefix.rect_sum(a, b) / (na * nb));
}

double expected_block_cost_stationary(double c0, std::span<const double> autocov, double c_inf,
                                      std::size_t n) {
  if (n == 0) {
    throw ValidationError("segment length must be at least 1");
  }
  const double len = static_cast<double>(n);
  double value = (len - 1.0) * (c0 - c_inf);
  const std::size_t lags = std::min(n - 1, autocov.size());
  for (std::size_t l = 1; l <= lags; ++l) {
    value -= 2.0 * (1.0 - static_cast<double>(l) / len) * (autocov[l - 1] - c_inf);
  }
  return value;
}

}  // namespace kcpd
