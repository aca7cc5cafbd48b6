#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace kcpd {

/// Ordered T x d sequence of finite observations, stored row-major.
///
/// Rows are addressed 0-based here; the segmentation API uses 1-based
/// positions on top of this.
class EmbeddingSequence {
 public:
  /// Throws ValidationError if rows or cols is zero, the buffer size does
  /// not match, or any entry is non-finite.
  EmbeddingSequence(std::size_t rows, std::size_t cols, std::vector<double> values);

  static EmbeddingSequence from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t length() const { return rows_; }
  std::size_t dim() const { return cols_; }

  std::span<const double> row(std::size_t t) const {
    return {values_.data() + t * cols_, cols_};
  }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const EmbeddingSequence&, const EmbeddingSequence&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

enum class KernelKind { Rbf, Cosine };

std::string_view to_string(KernelKind kind);
KernelKind parse_kernel_kind(std::string_view name);

/// Kernel choice plus its parameters. An empty bandwidth means "use the
/// median heuristic" and must be resolved against data before evaluation.
struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  std::optional<double> bandwidth;
  double bound = 1.0;  // sup of k, consumed by the penalty floor

  static KernelSpec rbf(std::optional<double> bandwidth = std::nullopt) {
    return {KernelKind::Rbf, bandwidth, 1.0};
  }
  static KernelSpec cosine() { return {KernelKind::Cosine, std::nullopt, 1.0}; }

  bool resolved() const { return kind == KernelKind::Cosine || bandwidth.has_value(); }
};

/// RBF: exp(-|x-y|^2 / (2 sigma^2)). Cosine: <x,y> / (|x| |y|), clamped to [-1, 1].
double eval_kernel(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

/// Median of pairwise Euclidean distances over i < j. Sequences longer than
/// kMedianSubsample rows use a fixed-seed subsample of that many rows.
double median_heuristic_bandwidth(const EmbeddingSequence& seq);
inline constexpr std::size_t kMedianSubsample = 2000;

/// Fills in the median-heuristic bandwidth when `spec` carries none.
KernelSpec resolve_kernel(const KernelSpec& spec, const EmbeddingSequence& seq);

/// Dense symmetric T x T Gram matrix.
class GramMatrix {
 public:
  GramMatrix(std::size_t size, std::vector<double> values, KernelSpec kernel);

  std::size_t size() const { return size_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * size_ + j]; }
  const std::vector<double>& values() const { return values_; }
  const KernelSpec& kernel() const { return kernel_; }

 private:
  std::size_t size_;
  std::vector<double> values_;
  KernelSpec kernel_;
};

/// Evaluates the kernel on i <= j and mirrors. The returned matrix carries
/// the resolved kernel spec. The diagonal is exactly 1 for both kernels.
GramMatrix compute_gram(const EmbeddingSequence& seq, const KernelSpec& spec);

}  // namespace kcpd
