// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and budgets are fixed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "kcpd/cost.hpp"
#include "kcpd/embed_client.hpp"
#include "kcpd/error.hpp"
#include "kcpd/ingest.hpp"
#include "kcpd/metrics.hpp"
#include "kcpd/segmentation.hpp"
#include "kcpd/simulate.hpp"
#include "oracles.hpp"
#include "stub_server.hpp"

using namespace kcpd;

namespace {

constexpr double kExactTol = 1e-10;       // criteria 1, 2
constexpr double kCostRelTol = 1e-9;      // criterion 3
constexpr double kSplitTol = 1e-9;        // criterion 4
constexpr double kHandTol = 1e-12;        // criterion 5
constexpr double kTailStderrs = 3.0;      // criterion 6
constexpr double kFloorTol = 1e-9;        // criterion 8
constexpr double kBudget1 = 10.0, kBudget2 = 30.0, kBudget6 = 300.0, kBudget7 = 1200.0;  // seconds

struct Outcome {
  bool pass = true;
  std::string detail;

  // Keeps every distinct failure message so partial results stay visible.
  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) {
      detail = what;
    } else if (failures < 6 && detail.find(what) == std::string::npos) {
      detail += "; " + what;
    }
    ++failures;
    pass = false;
  }
  int failures = 0;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

GramPrefix rbf_prefix(const EmbeddingSequence& seq) {
  return build_prefix(compute_gram(seq, resolve_kernel(KernelSpec::rbf(), seq)));
}

Outcome exact_solver() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> len(2, 12);
  std::size_t checks = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const auto seq = oracle::random_sequence(len(rng), 3, rng);
    const KernelSpec spec = resolve_kernel(KernelSpec::rbf(), seq);
    const GramPrefix prefix = build_prefix(compute_gram(seq, spec));
    const auto cost = oracle::naive_cost_table(oracle::naive_gram(seq, spec));
    for (double beta : {0.0, 0.1, 0.5, 2.0}) {
      const auto dp = dp_penalized(prefix, beta);
      const auto bf = oracle::enumerate_best(cost, beta);
      o.require(std::abs(dp.objective - bf.objective) <= kExactTol,
                "objective gap at instance " + std::to_string(inst));
      o.require(dp.segmentation.change_points() == bf.change_points,
                "boundaries differ at instance " + std::to_string(inst));
      ++checks;
    }
  }
  const double elapsed = seconds_since(start);
  o.require(elapsed < kBudget1, "over time budget");
  if (o.pass) o.detail = std::to_string(checks) + " (instance, beta) pairs in " + fmt(elapsed) + " s";
  return o;
}

Outcome pelt_equivalence() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2002);
  std::uniform_int_distribution<std::size_t> len(2, 200);
  const double betas[] = {0.0, 0.1, 0.5, 2.0, 5.0};
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t T = len(rng);
    const auto seq = inst % 2 ? oracle::random_sequence(T, 4, rng) : oracle::blocky_sequence(T, 4, rng);
    const GramPrefix prefix = rbf_prefix(seq);
    const double beta = betas[inst % 5];
    const auto dp = dp_penalized(prefix, beta);
    const auto pelt = pelt_penalized(prefix, beta);
    o.require(std::abs(dp.objective - pelt.objective) <= kExactTol,
              "objective gap at instance " + std::to_string(inst));
    o.require(dp.segmentation == pelt.segmentation, "boundaries differ at instance " + std::to_string(inst));
  }
  const double elapsed = seconds_since(start);
  o.require(elapsed < kBudget2, "over time budget");
  if (o.pass) o.detail = "100 instances in " + fmt(elapsed) + " s";
  return o;
}

Outcome cost_oracle() {
  Outcome o;
  std::mt19937_64 rng(3003);
  std::uniform_int_distribution<std::size_t> len(1, 64);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto seq = oracle::random_sequence(len(rng), 5, rng);
    for (const KernelSpec& raw : {KernelSpec::rbf(), KernelSpec::cosine()}) {
      if (raw.kind == KernelKind::Rbf && seq.length() < 2) continue;  // median needs a pair
      const KernelSpec spec = resolve_kernel(raw, seq);
      const GramPrefix prefix = build_prefix(compute_gram(seq, spec));
      const auto g = oracle::naive_gram(seq, spec);
      const std::size_t T = seq.length();
      for (std::size_t s = 1; s <= T; ++s) {
        for (std::size_t e = s; e <= T; ++e) {
          const double fast = block_cost(prefix, s, e);
          const double naive = oracle::naive_block_cost(g, s, e);
          const double gap = std::abs(fast - naive);
          const bool ok = naive == 0.0 ? gap == 0.0 : gap <= kCostRelTol * std::abs(naive);
          if (naive != 0.0) worst = std::max(worst, gap / std::abs(naive));
          o.require(ok, "(s, e) = (" + std::to_string(s) + ", " + std::to_string(e) + ") at instance " +
                            std::to_string(inst) + ", relative gap " + fmt(gap / std::abs(naive)));
        }
      }
    }
  }
  if (o.pass) o.detail = "worst relative gap " + fmt(worst, 3);
  return o;
}

Outcome split_monotonicity() {
  Outcome o;
  std::mt19937_64 rng(4004);
  std::uniform_int_distribution<std::size_t> len(2, 64);
  std::size_t triples = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto seq = oracle::random_sequence(len(rng), 3, rng);
    for (const KernelSpec& raw : {KernelSpec::rbf(), KernelSpec::cosine()}) {
      const GramPrefix prefix = build_prefix(compute_gram(seq, resolve_kernel(raw, seq)));
      const std::size_t T = seq.length();
      for (std::size_t s = 1; s <= T; ++s) {
        for (std::size_t e = s + 1; e <= T; ++e) {
          const double whole = block_cost(prefix, s, e);
          for (std::size_t t = s; t < e; ++t) {
            ++triples;
            o.require(whole >= block_cost(prefix, s, t) + block_cost(prefix, t + 1, e) - kSplitTol,
                      "violated at instance " + std::to_string(inst));
          }
        }
      }
    }
  }
  if (o.pass) o.detail = std::to_string(triples) + " (s, t, e) triples";
  return o;
}

Outcome metric_fidelity() {
  Outcome o;
  std::mt19937_64 rng(5005);
  std::uniform_int_distribution<std::size_t> len(2, 200);
  std::uniform_real_distribution<double> density(0.0, 0.2);
  for (int pair = 0; pair < 500; ++pair) {
    const std::size_t T = len(rng);
    const auto ref = oracle::random_segmentation(T, rng, density(rng));
    const auto hyp = oracle::random_segmentation(T, rng, density(rng));
    const std::size_t w = pair % 3 == 0 ? std::min(default_window(ref), T - 1)
                                        : std::uniform_int_distribution<std::size_t>(1, T - 1)(rng);
    o.require(pk(ref, hyp, w) == oracle::naive_pk(ref, hyp, w), "pk differs at pair " + std::to_string(pair));
    o.require(window_diff(ref, hyp, w) == oracle::naive_window_diff(ref, hyp, w),
              "window_diff differs at pair " + std::to_string(pair));
  }
  const Segmentation ref(20, {10});
  o.require(std::abs(pk(ref, Segmentation(20), 5) - 1.0 / 3.0) <= kHandTol, "pk hand value");
  o.require(std::abs(window_diff(ref, Segmentation(20, {11}), 5) - 2.0 / 15.0) <= kHandTol,
            "window_diff hand value");
  o.require(std::abs(window_diff(Segmentation(60, {20}), Segmentation(60, {20, 45}), 5) - 5.0 / 55.0) <= kHandTol,
            "window_diff extra-boundary value");
  o.require(pk(ref, ref, 5) == 0.0 && window_diff(ref, ref, 5) == 0.0, "identity case");
  o.require(default_window(Segmentation(100, {20, 40, 60, 80})) == 10 &&
                default_window(Segmentation(10, {1, 2, 3, 4, 5, 6, 7, 8, 9})) == 1 &&
                default_window(Segmentation(70, {10, 20, 30, 40, 50, 60})) == 5,
            "default window");
  if (o.pass) o.detail = "500 random pairs exact, hand values within 1e-12";
  return o;
}

Outcome concentration() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  double worst_margin = -1.0;
  for (std::size_t n : {50u, 100u}) {
    for (std::size_t m : {0u, 2u, 5u}) {
      ConcentrationConfig c;
      c.n = n;
      c.m = m;
      c.d = 8;
      c.sigma = 1.0;
      c.replicates = 10000;
      c.seed = 6006 + 10 * n + m;
      const auto r = concentration_check(c);
      o.require(r.x_grid.size() == 8, "x grid is not 8 points");
      for (std::size_t i = 0; i < r.x_grid.size(); ++i) {
        const double excess = r.empirical_tail[i] - (r.bound[i] + kTailStderrs * r.stderr_tail[i]);
        worst_margin = std::max(worst_margin, excess);
        o.require(excess <= 0.0, "tail above bound at n=" + std::to_string(n) + ", m=" + std::to_string(m) +
                                     ", x=" + fmt(r.x_grid[i]));
      }
    }
  }
  const double elapsed = seconds_since(start);
  o.require(elapsed < kBudget6, "over time budget");
  if (o.pass) o.detail = "6 settings x 8 points, " + fmt(elapsed) + " s";
  return o;
}

struct TrendRow {
  std::size_t T;
  double k_match;
  double pk_mean;
  double loc_median;
};

Outcome consistency() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  SimConfig base;
  base.d = 16;
  base.m = 5;
  base.mean_shift = 2.0;
  base.noise_sigma = 1.0;
  base.min_spacing = 20;

  // Pilot: pick C once at T = 500 on its own seed. Highest K-match
  // frequency wins, then lower mean Pk, then the smaller C.
  double best_C = 0.0, best_match = -1.0, best_pk = 2.0;
  std::string pilot_log;
  for (double C : {0.01, 0.05, 0.1, 0.5}) {
    ExperimentConfig pilot;
    pilot.T_grid = {500};
    pilot.replicates = 50;
    pilot.base = base;
    pilot.base.seed = 7007;
    pilot.schedule.C = C;
    const auto agg = consistency_experiment(pilot).aggregates.front();
    pilot_log += " C=" + fmt(C) + ":" + fmt(agg.k_match_freq, 2);
    if (agg.k_match_freq > best_match || (agg.k_match_freq == best_match && agg.pk.mean < best_pk)) {
      best_C = C;
      best_match = agg.k_match_freq;
      best_pk = agg.pk.mean;
    }
  }

  ExperimentConfig e;
  e.T_grid = {200, 500, 1000, 2000};
  e.replicates = 100;
  e.base = base;
  e.base.seed = 7008;
  e.schedule.C = best_C;
  const auto report = consistency_experiment(e);
  std::vector<TrendRow> rows;
  for (const TAggregate& a : report.aggregates) rows.push_back({a.T, a.k_match_freq, a.pk.mean, a.loc_est_to_true.median});

  // (a) frequency at the largest T, and deficits 1 - freq nonincreasing in T
  // with at most one inversion no larger than one standard error.
  const double n = static_cast<double>(e.replicates);
  auto se = [n](double p) { return std::sqrt(p * (1.0 - p) / n); };
  o.require(rows.back().k_match >= 0.9, "(a) K-match frequency " + fmt(rows.back().k_match) + " < 0.9 at T=2000");
  int inversions = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double rise = (1.0 - rows[i].k_match) - (1.0 - rows[i - 1].k_match);
    if (rise > 0.0) {
      ++inversions;
      o.require(rise <= std::hypot(se(rows[i].k_match), se(rows[i - 1].k_match)),
                "(a) deficit rises by more than one stderr at T=" + std::to_string(rows[i].T));
    }
  }
  o.require(inversions <= 1, "(a) more than one deficit inversion");
  // (b) mean Pk halves from the smallest to the largest T.
  o.require(rows.back().pk_mean <= 0.5 * rows.front().pk_mean,
            "(b) mean Pk " + fmt(rows.back().pk_mean) + " > 0.5 x " + fmt(rows.front().pk_mean));
  // (c) median normalised est-to-true location error halves likewise.
  o.require(rows.back().loc_median <= 0.5 * rows.front().loc_median,
            "(c) median location error " + fmt(rows.back().loc_median) + " > 0.5 x " + fmt(rows.front().loc_median));
  const double elapsed = seconds_since(start);
  o.require(elapsed < kBudget7, "over time budget");

  std::string table = "C=" + fmt(best_C) + " (pilot" + pilot_log + ");";
  for (const TrendRow& r : rows) {
    table += " T=" + std::to_string(r.T) + ": match " + fmt(r.k_match, 2) + ", Pk " + fmt(r.pk_mean, 3) +
             ", loc " + fmt(r.loc_median, 3) + ";";
  }
  table += " " + fmt(elapsed) + " s";
  o.detail = o.pass ? table : o.detail + " | " + table;
  return o;
}

Outcome penalty_behavior() {
  Outcome o;
  const std::vector<double> grid{0.001, 0.01, 0.1, 1.0, 10.0};
  std::size_t instances = 0;
  for (std::size_t T : {100u, 300u, 600u}) {
    for (std::size_t m : {0u, 3u}) {
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        SimConfig c;
        c.T = T;
        c.d = 6;
        c.m = m;
        c.K = 3;
        c.seed = 8008 + seed;
        const auto g = generate_m_dependent(c);
        for (const KernelSpec& raw : {KernelSpec::rbf(), KernelSpec::cosine()}) {
          const auto seq = raw.kind == KernelKind::Cosine ? normalize_rows(g.seq) : g.seq;
          const auto table = sweep_penalty(build_prefix(compute_gram(seq, resolve_kernel(raw, seq))), grid);
          ++instances;
          bool monotone = true;
          for (std::size_t i = 1; i < table.rows.size(); ++i) {
            monotone = monotone && table.rows[i].k_est <= table.rows[i - 1].k_est;
          }
          o.require(monotone && table.monotone, "K_hat increases along the grid at T=" + std::to_string(T));
        }
      }
    }
  }
  for (std::size_t m : {0u, 1u, 5u}) {
    for (double M : {0.5, 1.0, 2.0}) {
      for (std::size_t T : {2u, 3u, 100u, 2000u}) {
        const double mm = static_cast<double>(m);
        const double closed = 16.0 * M * std::sqrt(2.0 * (8.0 * mm + 5.0) * T * std::log(static_cast<double>(T))) +
                              2.0 * M * (1.0 + 6.0 * mm);
        o.require(std::abs(penalty_floor_a5(m, M, T) - closed) <= kFloorTol * std::max(1.0, closed),
                  "floor mismatch at m=" + std::to_string(m) + ", T=" + std::to_string(T));
      }
    }
  }
  if (o.pass) o.detail = std::to_string(instances) + " swept instances monotone, floor closed form exact";
  return o;
}

int run_cli(std::vector<std::string> args, std::string& out) {
  args.insert(args.begin(), "kcpd");
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  out = o.str();
  return code;
}

Outcome determinism_io() {
  Outcome o;
  for (const std::string& format : {"json", "csv"}) {
    std::string a, b;
    const std::vector<std::string> args{"simulate", "--T", "200,300", "--replicates", "3", "--seed", "9009",
                                        "--threads", "2", "--format", format};
    o.require(run_cli(args, a) == 0 && run_cli(args, b) == 0, "simulate failed");
    o.require(!a.empty() && a == b, "simulate " + format + " output differs between runs");
  }

  const auto dir = std::filesystem::temp_directory_path() / ("kcpd_accept_" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(9010);
  for (int rep = 0; rep < 20; ++rep) {
    const auto seq = oracle::random_sequence(40, 7, rng, std::pow(10.0, rep % 7 - 3));
    save_csv_matrix(dir / "x.csv", seq);
    o.require(load_csv_matrix(dir / "x.csv") == seq, "CSV round trip lost data");
    const Segmentation gold(40, {5, 17, 33});
    const std::vector<std::string> texts(40, "téxt, \"quoted\"");
    save_jsonl(dir / "x.jsonl", seq, gold, texts);
    const auto back = load_jsonl(dir / "x.jsonl");
    o.require(back.seq == seq && back.gold == gold && back.texts == texts, "JSONL round trip lost data");
  }
  std::filesystem::remove_all(dir);

  ::setenv("KCPD_ACCEPT_TOKEN", "token", 1);
  auto config_for = [](const testing::StubServer& s) {
    EmbedServiceConfig c;
    c.endpoint = s.endpoint();
    c.token_env = "KCPD_ACCEPT_TOKEN";
    c.backoff_base_seconds = 0.001;
    c.timeout_seconds = 5.0;
    return c;
  };
  std::vector<std::string> texts;
  for (int i = 0; i < 250; ++i) texts.push_back("text " + std::to_string(i));
  {
    testing::StubServer server;
    EmbedStats stats;
    const auto rows = fetch_embeddings(config_for(server), texts, &stats);
    bool ordered = rows.size() == texts.size();
    for (std::size_t i = 0; ordered && i < rows.size(); ++i) ordered = rows[i] == testing::stub_vector(texts[i]);
    o.require(ordered && stats.requests == 3 && server.requests() == 3, "batch order fixture");
  }
  {
    testing::StubServer server(2);
    EmbedStats stats;
    const auto rows = fetch_embeddings(config_for(server), {"a", "b"}, &stats);
    o.require(rows.size() == 2 && stats.retries == 2, "429-twice fixture");
  }
  {
    auto config = EmbedServiceConfig{};
    testing::StubServer server(6);
    config = config_for(server);
    config.max_retries = 5;
    bool threw = false;
    try {
      fetch_embeddings(config, {"a"});
    } catch (const ServiceError&) {
      threw = true;
    }
    o.require(threw && server.requests() == 6, "429-exhaustion fixture");
  }
  if (o.pass) o.detail = "simulate byte-identical, 40 round trips lossless, 3 stub fixtures";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {"exact solver vs enumeration", exact_solver},
      {"PELT/DP equivalence", pelt_equivalence},
      {"prefix cost vs naive cost", cost_oracle},
      {"split monotonicity", split_monotonicity},
      {"metric fidelity", metric_fidelity},
      {"concentration bound", concentration},
      {"consistency trends", consistency},
      {"penalty behavior", penalty_behavior},
      {"determinism and I/O", determinism_io},
  };
  // An optional argument runs a single criterion (1-based).
  std::size_t only = 0;
  if (argc > 1) {
    only = std::strtoul(argv[1], nullptr, 10);
    if (only < 1 || only > criteria.size()) {
      std::cerr << "usage: kcpd_acceptance [criterion 1.." << criteria.size() << "]\n";
      return 2;
    }
  }
  int failures = 0;
  std::size_t ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && i + 1 != only) continue;
    ++ran;
    Outcome o;
    try {
      o = criteria[i].check();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].name << ": " << o.detail
              << std::endl;
  }
  std::cout << (ran - failures) << "/" << ran << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
