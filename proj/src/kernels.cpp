#include "kcpd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "kcpd/error.hpp"

namespace kcpd {

namespace {

// Fixed so the subsampled median is reproducible across runs.
constexpr std::uint64_t kMedianSeed = 0x6b637064'6d656431ULL;

double squared_distance(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = x[k] - y[k];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

EmbeddingSequence::EmbeddingSequence(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows_ == 0 || cols_ == 0) {
    throw ValidationError("embedding sequence must have at least one row and one column");
  }
  if (values_.size() != rows_ * cols_) {
    throw ValidationError("embedding buffer has " + std::to_string(values_.size()) +
                          " values, expected " + std::to_string(rows_ * cols_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw ValidationError("non-finite value at row " + std::to_string(i / cols_ + 1) +
                            ", column " + std::to_string(i % cols_ + 1));
    }
  }
}

EmbeddingSequence EmbeddingSequence::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) {
    throw ValidationError("embedding sequence must have at least one row");
  }
  const std::size_t cols = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != cols) {
      throw ValidationError("row " + std::to_string(t + 1) + " has dimension " +
                            std::to_string(rows[t].size()) + ", expected " +
                            std::to_string(cols));
    }
    values.insert(values.end(), rows[t].begin(), rows[t].end());
  }
  return {rows.size(), cols, std::move(values)};
}

std::string_view to_string(KernelKind kind) {
  return kind == KernelKind::Rbf ? "rbf" : "cosine";
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "rbf") return KernelKind::Rbf;
  if (name == "cosine") return KernelKind::Cosine;
  throw ValidationError("unknown kernel '" + std::string(name) + "' (expected rbf or cosine)");
}

double eval_kernel(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ValidationError("kernel arguments differ in dimension: " + std::to_string(x.size()) +
                          " vs " + std::to_string(y.size()));
  }
  switch (spec.kind) {
    case KernelKind::Rbf: {
      if (!spec.bandwidth) {
        throw ValidationError("RBF bandwidth is unresolved");
      }
      const double sigma = *spec.bandwidth;
      if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ValidationError("RBF bandwidth must be positive and finite");
      }
      return std::exp(-squared_distance(x, y) / (2.0 * sigma * sigma));
    }
    case KernelKind::Cosine: {
      double dot = 0.0;
      double nx = 0.0;
      double ny = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        dot += x[k] * y[k];
        nx += x[k] * x[k];
        ny += y[k] * y[k];
      }
      if (nx == 0.0 || ny == 0.0) {
        throw ValidationError("cosine kernel is undefined for a zero-norm vector");
      }
      return std::clamp(dot / (std::sqrt(nx) * std::sqrt(ny)), -1.0, 1.0);
    }
  }
  return 0.0;
}

double median_heuristic_bandwidth(const EmbeddingSequence& seq) {
  const std::size_t T = seq.length();
  if (T < 2) {
    throw ValidationError("median heuristic needs at least two observations");
  }
  std::vector<std::size_t> rows(T);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (T > kMedianSubsample) {
    std::vector<std::size_t> picked;
    picked.reserve(kMedianSubsample);
    std::mt19937_64 rng(kMedianSeed);
    std::sample(rows.begin(), rows.end(), std::back_inserter(picked), kMedianSubsample, rng);
    rows = std::move(picked);
  }
  const std::size_t n = rows.size();
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      dist.push_back(squared_distance(seq.row(rows[a]), seq.row(rows[b])));
    }
  }
  // Median of squared distances; sqrt is monotone so this is the median distance.
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + mid, dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + mid);
    median = 0.5 * (std::sqrt(lower) + std::sqrt(median));
  } else {
    median = std::sqrt(median);
  }
  if (!(median > 0.0)) {
    throw ValidationError(
        "median pairwise distance is zero; set the RBF bandwidth explicitly");
  }
  return median;
}

KernelSpec resolve_kernel(const KernelSpec& spec, const EmbeddingSequence& seq) {
  KernelSpec out = spec;
  if (out.kind == KernelKind::Rbf && !out.bandwidth) {
    out.bandwidth = median_heuristic_bandwidth(seq);
  }
  if (out.kind == KernelKind::Rbf && !(*out.bandwidth > 0.0)) {
    throw ValidationError("RBF bandwidth must be positive");
  }
  if (!(out.bound > 0.0)) {
    throw ValidationError("kernel bound must be positive");
  }
  return out;
}

GramMatrix::GramMatrix(std::size_t size, std::vector<double> values, KernelSpec kernel)
    : size_(size), values_(std::move(values)), kernel_(kernel) {
  if (values_.size() != size_ * size_) {
    throw ValidationError("Gram buffer does not match its declared size");
  }
}

GramMatrix compute_gram(const EmbeddingSequence& seq, const KernelSpec& spec) {
  const KernelSpec kernel = spec.resolved() ? spec : resolve_kernel(spec, seq);
  const std::size_t T = seq.length();
  std::vector<double> values(T * T);
  for (std::size_t i = 0; i < T; ++i) {
    values[i * T + i] = 1.0;
    if (kernel.kind == KernelKind::Cosine) {
      // Still reject zero rows, even though the diagonal is fixed at 1.
      eval_kernel(kernel, seq.row(i), seq.row(i));
    }
    for (std::size_t j = i + 1; j < T; ++j) {
      const double k = eval_kernel(kernel, seq.row(i), seq.row(j));
      values[i * T + j] = k;
      values[j * T + i] = k;
    }
  }
  return {T, std::move(values), kernel};
}

}  // namespace kcpd
