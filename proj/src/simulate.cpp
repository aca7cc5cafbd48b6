#include "kcpd/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "kcpd/cost.hpp"
#include "kcpd/error.hpp"
#include "kcpd/ingest.hpp"

namespace kcpd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<double> random_unit(std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> u(d);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (double& v : u) {
      v = normal(rng);
      norm += v * v;
    }
  }
  norm = std::sqrt(norm);
  for (double& v : u) v /= norm;
  return u;
}

std::vector<std::vector<double>> place_block_means(std::size_t blocks, std::size_t d, double shift,
                                                   Rng& rng) {
  std::vector<std::vector<double>> means(blocks, std::vector<double>(d, 0.0));
  if (shift == 0.0) return means;
  if (d == 1) {
    for (std::size_t k = 0; k < blocks; ++k) means[k][0] = (k % 2 == 0 ? 0.5 : -0.5) * shift;
    return means;
  }
  const double radius = shift / std::sqrt(2.0);
  std::vector<double> dir = random_unit(d, rng);
  for (std::size_t k = 0; k < blocks; ++k) {
    if (k > 0) {
      // Fresh direction orthogonal to the previous one.
      std::vector<double> next;
      double norm = 0.0;
      while (norm < 1e-8) {
        next = random_unit(d, rng);
        const double proj = std::inner_product(next.begin(), next.end(), dir.begin(), 0.0);
        norm = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          next[i] -= proj * dir[i];
          norm += next[i] * next[i];
        }
        norm = std::sqrt(norm);
      }
      for (double& v : next) v /= norm;
      dir = std::move(next);
    }
    for (std::size_t i = 0; i < d; ++i) means[k][i] = radius * dir[i];
  }
  return means;
}

// Runs body(i) for i in [0, count) on up to `threads` workers. The first
// exception thrown by any task is rethrown on the caller.
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> workers;
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (failure) std::rethrow_exception(failure);
}

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace

std::size_t auto_num_change_points(std::size_t T) {
  if (T < 2) return 0;
  return static_cast<std::size_t>(std::ceil(2.0 * std::log(static_cast<double>(T))));
}

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t T, std::size_t replicate) {
  return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(T)) ^
                    static_cast<std::uint64_t>(replicate));
}

void SimConfig::validate() const {
  if (T == 0 || d == 0) {
    throw ValidationError("T and d must be positive");
  }
  if (min_spacing == 0) {
    throw ValidationError("min_spacing must be positive");
  }
  const std::size_t k = num_change_points();
  if ((k + 1) * min_spacing > T) {
    throw ValidationError("cannot fit " + std::to_string(k + 1) + " blocks of length >= " +
                          std::to_string(min_spacing) + " into T = " + std::to_string(T));
  }
  if (m >= min_spacing) {
    throw ValidationError("dependence lag m = " + std::to_string(m) +
                          " must be below the minimum spacing " + std::to_string(min_spacing));
  }
  if (!(mean_shift >= 0.0) || !std::isfinite(mean_shift)) {
    throw ValidationError("mean shift must be finite and nonnegative");
  }
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
    throw ValidationError("noise sigma must be positive and finite");
  }
}

Segmentation sample_change_points(std::size_t T, std::size_t K, std::size_t min_spacing, Rng& rng) {
  if (min_spacing == 0 || (K + 1) * min_spacing > T) {
    throw ValidationError("infeasible change-point layout: K = " + std::to_string(K) +
                          ", min spacing " + std::to_string(min_spacing) + ", T = " +
                          std::to_string(T));
  }
  const std::size_t slack = T - (K + 1) * min_spacing;
  std::vector<std::size_t> slots(slack + K);
  std::iota(slots.begin(), slots.end(), std::size_t{1});
  std::vector<std::size_t> bars;
  bars.reserve(K);
  std::sample(slots.begin(), slots.end(), std::back_inserter(bars), K, rng);
  std::vector<std::size_t> change_points(K);
  for (std::size_t k = 0; k < K; ++k) {
    // bars[k] is the (k+1)-th bar; blocks before it hold bars[k] - (k+1) slack units.
    change_points[k] = bars[k] - (k + 1) + (k + 1) * min_spacing;
  }
  return Segmentation(T, std::move(change_points));
}

GeneratedSequence generate_m_dependent(const SimConfig& config, Rng& rng) {
  config.validate();
  const std::size_t T = config.T;
  const std::size_t d = config.d;
  const std::size_t m = config.m;
  Segmentation truth = sample_change_points(T, config.num_change_points(), config.min_spacing, rng);
  auto means = place_block_means(truth.num_change_points() + 1, d, config.mean_shift, rng);

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> innovations((T + m) * d);
  for (double& v : innovations) v = normal(rng);

  const double scale = config.noise_sigma / std::sqrt(static_cast<double>(m + 1));
  std::vector<double> values(T * d);
  std::size_t block = 0;
  const auto& cps = truth.change_points();
  for (std::size_t t = 0; t < T; ++t) {
    if (block < cps.size() && t + 1 > cps[block]) ++block;
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t lag = 0; lag <= m; ++lag) acc += innovations[(t + lag) * d + i];
      values[t * d + i] = means[block][i] + scale * acc;
    }
  }
  return {EmbeddingSequence(T, d, std::move(values)), std::move(truth), std::move(means), config};
}

GeneratedSequence generate_m_dependent(const SimConfig& config) {
  Rng rng(config.seed);
  return generate_m_dependent(config, rng);
}

std::size_t spacing_for(SpacingRule rule, std::size_t T, std::size_t K, std::size_t min_spacing) {
  if (rule == SpacingRule::Fixed) return min_spacing;
  std::size_t ell = min_spacing;
  if (K > 0) ell = std::max(ell, T / (4 * K));
  return std::min(ell, T / (K + 1));
}

Summary summarize(const std::vector<double>& values) {
  Summary out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1 && std::isfinite(out.mean)) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  out.median = median_of(values);
  return out;
}

std::vector<TAggregate> aggregate_records(const std::vector<ReplicateRecord>& records,
                                          const std::vector<std::size_t>& T_grid) {
  std::vector<TAggregate> out;
  for (std::size_t T : T_grid) {
    std::vector<double> k_est, pk_v, wd_v, e2t, t2e;
    std::size_t matches = 0;
    const ReplicateRecord* first = nullptr;
    for (const auto& r : records) {
      if (r.T != T) continue;
      if (!first) first = &r;
      k_est.push_back(static_cast<double>(r.k_est));
      pk_v.push_back(r.pk);
      wd_v.push_back(r.wd);
      e2t.push_back(r.loc_est_to_true);
      t2e.push_back(r.loc_true_to_est);
      matches += r.k_est == r.k_true;
    }
    TAggregate agg{};
    agg.T = T;
    agg.count = k_est.size();
    if (first) {
      agg.K = first->k_true;
      agg.ell = first->ell;
      agg.beta = first->beta;
      agg.k_match_freq = static_cast<double>(matches) / static_cast<double>(agg.count);
    }
    agg.k_est = summarize(k_est);
    agg.pk = summarize(pk_v);
    agg.wd = summarize(wd_v);
    agg.loc_est_to_true = summarize(e2t);
    agg.loc_true_to_est = summarize(t2e);
    out.push_back(agg);
  }
  return out;
}

SegmentationResult segment_sequence(const EmbeddingSequence& seq, const KernelSpec& kernel,
                                    double beta, SolverOptions solver) {
  if (kernel.kind == KernelKind::Cosine) {
    const GramMatrix gram = compute_gram(normalize_rows(seq), kernel);
    return pelt_penalized(build_prefix(gram), beta, solver);
  }
  const GramMatrix gram = compute_gram(seq, kernel);
  return pelt_penalized(build_prefix(gram), beta, solver);
}

ExperimentReport consistency_experiment(const ExperimentConfig& config) {
  if (config.T_grid.empty() || config.replicates == 0) {
    throw ValidationError("experiment needs a nonempty T grid and at least one replicate");
  }
  // Fail fast on infeasible grid points before launching any work.
  std::vector<SimConfig> per_T;
  for (std::size_t T : config.T_grid) {
    SimConfig sim = config.base;
    sim.T = T;
    const std::size_t K = sim.num_change_points();
    sim.K = K;
    sim.min_spacing = spacing_for(config.spacing, T, K, config.base.min_spacing);
    sim.validate();
    per_T.push_back(sim);
  }

  const std::size_t total = per_T.size() * config.replicates;
  std::vector<ReplicateRecord> records(total);
  parallel_for(total, config.threads, [&](std::size_t task) {
    const auto started = std::chrono::steady_clock::now();
    SimConfig sim = per_T[task / config.replicates];
    const std::size_t replicate = task % config.replicates;
    sim.seed = replicate_seed(config.base.seed, sim.T, replicate);
    const GeneratedSequence gen = generate_m_dependent(sim);
    const double beta = penalty_value(config.schedule, sim.T);
    const SegmentationResult result = segment_sequence(gen.seq, config.kernel, beta, config.solver);
    const MetricReport metrics = evaluate(gen.truth, result.segmentation);

    ReplicateRecord& rec = records[task];
    rec.T = sim.T;
    rec.replicate = replicate;
    rec.seed = sim.seed;
    rec.ell = sim.min_spacing;
    rec.beta = beta;
    rec.k_true = metrics.k_true;
    rec.k_est = metrics.k_est;
    rec.pk = metrics.pk;
    rec.wd = metrics.window_diff;
    rec.loc_est_to_true = metrics.loc_err_est_to_true;
    rec.loc_true_to_est = metrics.loc_err_true_to_est;
    if (config.record_timings) {
      rec.runtime_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();
    }
  });

  ExperimentReport report{config, std::move(records), {}};
  report.aggregates = aggregate_records(report.records, config.T_grid);
  return report;
}

double concentration_bound(double x, std::size_t m, double M, std::size_t n) {
  const double mm = static_cast<double>(m);
  return 4.0 * std::exp(-(x * x) / (8.0 * (8.0 * mm + 5.0) * M * M * static_cast<double>(n)));
}

double uniform_deviation_scale(std::size_t m, double M, std::size_t T) {
  return 4.0 * std::sqrt(2.0) * M *
         std::sqrt((8.0 * static_cast<double>(m) + 5.0) * std::log(static_cast<double>(T)));
}

ConcentrationReport concentration_check(const ConcentrationConfig& config) {
  if (config.replicates < 2) {
    throw ValidationError("concentration check needs at least two replicates");
  }
  if (config.n < 2) {
    throw ValidationError("block length n must be at least 2");
  }
  for (double x : config.x_grid) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw ValidationError("x grid values must be finite and nonnegative");
    }
  }
  SimConfig sim;
  sim.T = config.n;
  sim.d = config.d;
  sim.m = config.m;
  sim.K = 0;
  sim.min_spacing = config.n;
  sim.mean_shift = 0.0;
  sim.noise_sigma = config.sigma;
  sim.validate();

  std::vector<double> costs(config.replicates);
  for (std::size_t r = 0; r < config.replicates; ++r) {
    SimConfig rep = sim;
    rep.seed = replicate_seed(config.seed, config.n, r);
    const GeneratedSequence gen = generate_m_dependent(rep);
    const EmbeddingSequence seq =
        config.kernel.kind == KernelKind::Cosine ? normalize_rows(gen.seq) : gen.seq;
    const GramPrefix prefix = build_prefix(compute_gram(seq, config.kernel));
    costs[r] = block_cost(prefix, 1, config.n);
  }

  const Summary summary = summarize(costs);
  std::vector<double> deviations(costs.size());
  for (std::size_t r = 0; r < costs.size(); ++r) deviations[r] = std::abs(costs[r] - summary.mean);

  std::vector<double> grid = config.x_grid;
  if (grid.empty()) {
    const double top = *std::max_element(deviations.begin(), deviations.end());
    for (std::size_t j = 0; j < 8; ++j) grid.push_back(top * static_cast<double>(j) / 7.0);
  }

  const double M = config.kernel.bound;
  const double R = static_cast<double>(config.replicates);
  ConcentrationReport report{config, M, summary.mean, summary.std, grid, {}, {}, {}, {},
                             uniform_deviation_scale(config.m, M, config.n)};
  for (double x : grid) {
    const auto exceed = std::count_if(deviations.begin(), deviations.end(),
                                      [x](double dev) { return dev > x; });
    const double p = static_cast<double>(exceed) / R;
    report.empirical_tail.push_back(p);
    report.stderr_tail.push_back(std::sqrt(p * (1.0 - p) / R));
    const double b = concentration_bound(x, config.m, M, config.n);
    report.bound.push_back(b);
    report.bound_display.push_back(std::min(1.0, b));
  }
  return report;
}

void check_c_grid(const std::vector<double>& C_grid) {
  if (C_grid.empty()) {
    throw ValidationError("C grid must not be empty");
  }
  for (std::size_t i = 0; i < C_grid.size(); ++i) {
    if (!(C_grid[i] >= 0.0) || !std::isfinite(C_grid[i])) {
      throw ValidationError("C grid values must be finite and nonnegative");
    }
    if (i > 0 && C_grid[i] < C_grid[i - 1]) {
      throw ValidationError("C grid must be sorted ascending");
    }
  }
}

namespace {

bool nonincreasing(const std::vector<SweepRow>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].k_est > rows[i - 1].k_est) return false;
  }
  return true;
}

}  // namespace

SweepTable sweep_penalty(const GramPrefix& prefix, const std::vector<double>& C_grid,
                         SolverOptions solver) {
  check_c_grid(C_grid);
  SweepTable table;
  for (double C : C_grid) {
    const double beta = penalty_value({C}, prefix.length());
    const SegmentationResult result = pelt_penalized(prefix, beta, solver);
    table.rows.push_back(
        {C, beta, static_cast<double>(result.segmentation.num_change_points()), result.objective});
  }
  table.monotone = nonincreasing(table.rows);
  return table;
}

SweepTable sweep_penalty(const SimConfig& config, const std::vector<double>& C_grid,
                         const KernelSpec& kernel, std::size_t replicates, SolverOptions solver) {
  check_c_grid(C_grid);
  if (replicates == 0) {
    throw ValidationError("sweep needs at least one replicate");
  }
  config.validate();
  SweepTable table;
  for (double C : C_grid) table.rows.push_back({C, penalty_value({C}, config.T), 0.0, 0.0});
  bool each_monotone = true;
  for (std::size_t r = 0; r < replicates; ++r) {
    SimConfig rep = config;
    rep.seed = replicate_seed(config.seed, config.T, r);
    const GeneratedSequence gen = generate_m_dependent(rep);
    const EmbeddingSequence seq =
        kernel.kind == KernelKind::Cosine ? normalize_rows(gen.seq) : gen.seq;
    const SweepTable one = sweep_penalty(build_prefix(compute_gram(seq, kernel)), C_grid, solver);
    each_monotone = each_monotone && one.monotone;
    for (std::size_t i = 0; i < one.rows.size(); ++i) {
      table.rows[i].k_est += one.rows[i].k_est / static_cast<double>(replicates);
      table.rows[i].objective += one.rows[i].objective / static_cast<double>(replicates);
    }
  }
  table.monotone = each_monotone && nonincreasing(table.rows);
  return table;
}

}  // namespace kcpd
