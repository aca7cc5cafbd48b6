#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "kcpd/kernels.hpp"
#include "kcpd/metrics.hpp"
#include "kcpd/segmentation.hpp"

namespace kcpd {

using Rng = std::mt19937_64;

/// Number of change points used by the growth protocol: ceil(2 ln T).
std::size_t auto_num_change_points(std::size_t T);

/// Derives an independent stream seed for replicate `replicate` at length T.
std::uint64_t replicate_seed(std::uint64_t seed, std::size_t T, std::size_t replicate);

struct SimConfig {
  std::size_t T = 500;
  std::size_t d = 16;
  std::size_t m = 0;  // dependence lag
  std::optional<std::size_t> K;  // empty: auto_num_change_points(T)
  std::size_t min_spacing = 20;
  double mean_shift = 2.0;  // distance between consecutive block means
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;

  std::size_t num_change_points() const { return K ? *K : auto_num_change_points(T); }
  /// Throws ValidationError if the configuration is infeasible.
  void validate() const;
};

struct GeneratedSequence {
  EmbeddingSequence seq;
  Segmentation truth;
  std::vector<std::vector<double>> block_means;
  SimConfig config;
};

/// Uniform draw over all change-point sets with every block at least
/// `min_spacing` long (stars and bars on the slack).
Segmentation sample_change_points(std::size_t T, std::size_t K, std::size_t min_spacing, Rng& rng);

/// Piecewise-mean MA(m) sequence:
///   Y_t = mu_{b(t)} + sigma / sqrt(m + 1) * sum_{i=0}^{m} eps_{t-i}
/// with iid standard normal eps. Observations more than m apart are
/// independent and each coordinate has variance sigma^2. Innovations run
/// across block boundaries; only the mean jumps.
///
/// Consecutive block means are exactly mean_shift apart. For d >= 2 they sit
/// on a sphere of radius mean_shift / sqrt(2), each orthogonal to its
/// predecessor along a fresh random direction; for d = 1 they alternate
/// around zero.
GeneratedSequence generate_m_dependent(const SimConfig& config, Rng& rng);
GeneratedSequence generate_m_dependent(const SimConfig& config);

/// How the growth experiment picks the minimum spacing at each T.
enum class SpacingRule {
  Fixed,   // SimConfig::min_spacing as given
  Scaled,  // max(min_spacing, floor(T / (4K))), capped at floor(T / (K + 1))
};

std::size_t spacing_for(SpacingRule rule, std::size_t T, std::size_t K, std::size_t min_spacing);

struct ExperimentConfig {
  std::vector<std::size_t> T_grid;
  std::size_t replicates = 100;
  SimConfig base;  // T is overridden by each grid value
  KernelSpec kernel = KernelSpec::rbf();
  PenaltySchedule schedule;
  SolverOptions solver;
  SpacingRule spacing = SpacingRule::Scaled;
  std::size_t threads = 1;
  bool record_timings = false;
};

struct ReplicateRecord {
  std::size_t T;
  std::size_t replicate;
  std::uint64_t seed;
  std::size_t ell;
  double beta;
  std::size_t k_true;
  std::size_t k_est;
  double pk;
  double wd;
  double loc_est_to_true;
  double loc_true_to_est;
  std::optional<double> runtime_ms;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
  double median = 0.0;
};

Summary summarize(const std::vector<double>& values);

struct TAggregate {
  std::size_t T;
  std::size_t K;
  std::size_t ell;
  double beta;
  std::size_t count;
  double k_match_freq;
  Summary k_est;
  Summary pk;
  Summary wd;
  Summary loc_est_to_true;
  Summary loc_true_to_est;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ReplicateRecord> records;
  std::vector<TAggregate> aggregates;
};

/// Aggregates per T, in T_grid order, from the replicate records.
std::vector<TAggregate> aggregate_records(const std::vector<ReplicateRecord>& records,
                                          const std::vector<std::size_t>& T_grid);

/// Segments one instance with the kernel and penalty of the experiment.
SegmentationResult segment_sequence(const EmbeddingSequence& seq, const KernelSpec& kernel,
                                    double beta, SolverOptions solver = {});

ExperimentReport consistency_experiment(const ExperimentConfig& config);

struct ConcentrationConfig {
  std::size_t n = 100;
  std::size_t m = 0;
  std::size_t d = 8;
  double sigma = 1.0;
  KernelSpec kernel = KernelSpec::rbf();
  std::vector<double> x_grid;  // empty: 8 evenly spaced points up to the largest deviation
  std::size_t replicates = 10000;
  std::uint64_t seed = 0;
};

struct ConcentrationReport {
  ConcentrationConfig config;
  double bound_M;
  double cost_mean;
  double cost_std;
  std::vector<double> x_grid;
  std::vector<double> empirical_tail;
  std::vector<double> stderr_tail;  // binomial standard error of each tail estimate
  std::vector<double> bound;
  std::vector<double> bound_display;  // bound clipped to 1
  double lambda_T;                    // uniform-deviation scale at T = n
};

/// 4 exp(-x^2 / (8 (8m + 5) M^2 n))
double concentration_bound(double x, std::size_t m, double M, std::size_t n);
/// 4 sqrt(2) M sqrt((8m + 5) ln T)
double uniform_deviation_scale(std::size_t m, double M, std::size_t T);

/// Monte-Carlo tail of |C_hat(1, n) - E C_hat(1, n)| on stationary MA(m)
/// blocks, centred at the replicate mean.
ConcentrationReport concentration_check(const ConcentrationConfig& config);

struct SweepRow {
  double C;
  double beta;
  double k_est;  // mean over replicates for simulated sweeps
  double objective;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  bool monotone;  // k_est nonincreasing in C
};

/// Throws ValidationError unless the grid is nonempty, finite, nonnegative
/// and sorted ascending.
void check_c_grid(const std::vector<double>& C_grid);

SweepTable sweep_penalty(const GramPrefix& prefix, const std::vector<double>& C_grid,
                         SolverOptions solver = {});

/// Averages K_hat over simulated replicates of `config`.
SweepTable sweep_penalty(const SimConfig& config, const std::vector<double>& C_grid,
                         const KernelSpec& kernel, std::size_t replicates,
                         SolverOptions solver = {});

}  // namespace kcpd
