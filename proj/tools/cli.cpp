#include "cli.hpp"

#include <chrono>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kcpd/embed_client.hpp"
#include "kcpd/error.hpp"
#include "kcpd/ingest.hpp"
#include "kcpd/metrics.hpp"
#include "kcpd/report_io.hpp"
#include "kcpd/segmentation.hpp"
#include "kcpd/simulate.hpp"
#include "kcpd/version.hpp"

namespace kcpd::cli {

namespace {

using nlohmann::json;

// Penalty constants tuned for sentence embeddings, per kernel.
constexpr double kDefaultCRbf = 0.05;
constexpr double kDefaultCCosine = 0.088;

struct KernelFlags {
  std::string kind = "rbf";
  std::string bandwidth = "median";
  bool normalize = false;

  KernelSpec spec() const {
    KernelSpec out;
    out.kind = parse_kernel_kind(kind);
    if (out.kind == KernelKind::Rbf && bandwidth != "median") {
      double value = 0.0;
      std::size_t used = 0;
      try {
        value = std::stod(bandwidth, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != bandwidth.size() || !(value > 0.0)) {
        throw ValidationError("--bandwidth must be 'median' or a positive number");
      }
      out.bandwidth = value;
    }
    return out;
  }

  void add_to(CLI::App* app) {
    app->add_option("--kernel", kind, "Kernel: rbf or cosine")->check(CLI::IsMember({"rbf", "cosine"}));
    app->add_option("--bandwidth", bandwidth, "RBF bandwidth: 'median' or a positive number");
  }
};

struct SimFlags {
  std::size_t T = 500;
  std::size_t d = 16;
  std::size_t m = 0;
  std::optional<std::size_t> K;
  std::size_t ell = 20;
  double delta = 2.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;

  void add_to(CLI::App* app, bool with_T) {
    if (with_T) app->add_option("--T", T, "Sequence length");
    app->add_option("--d", d, "Observation dimension");
    app->add_option("--m", m, "Dependence lag of the MA(m) noise");
    app->add_option("--K", K, "Number of change points (default ceil(2 ln T))");
    app->add_option("--ell", ell, "Minimum block length (floor when spacing is scaled)");
    app->add_option("--delta", delta, "Distance between consecutive block means");
    app->add_option("--sigma", sigma, "Noise standard deviation per coordinate");
    app->add_option("--seed", seed, "Random seed");
  }

  SimConfig config() const {
    SimConfig c;
    c.T = T;
    c.d = d;
    c.m = m;
    c.K = K;
    c.min_spacing = ell;
    c.mean_shift = delta;
    c.noise_sigma = sigma;
    c.seed = seed;
    return c;
  }
};

// Writes `text` to --out if given, otherwise to `out`.
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ValidationError("cannot write '" + path + "'");
  file << text;
}

std::string dump(json j) {
  j["version"] = kVersion;
  return j.dump(2) + "\n";
}

EmbeddingSequence prepare(const EmbeddingSequence& seq, const KernelSpec& spec, bool normalize) {
  if (spec.kind == KernelKind::Cosine || normalize) return normalize_rows(seq);
  return seq;
}

Segmentation load_segmentation(const std::string& path) {
  const std::filesystem::path p(path);
  const std::string ext = p.extension().string();
  if (ext == ".jsonl" || ext == ".ndjson") {
    DatasetEntry entry = load_jsonl(p);
    if (!entry.gold) {
      throw ValidationError(path + ": no boundary_after flags, so no segmentation to read");
    }
    return *entry.gold;
  }
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": malformed JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("T") || !j.contains("change_points")) {
    throw ValidationError(path + ": expected an object with \"T\" and \"change_points\"");
  }
  try {
    return Segmentation(j["T"].get<std::size_t>(), j["change_points"].get<std::vector<std::size_t>>());
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::vector<std::string> load_texts(const std::string& path) {
  const std::filesystem::path p(path);
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::vector<std::string> texts;
  const bool jsonl = p.extension() == ".jsonl" || p.extension() == ".ndjson";
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!jsonl) {
      if (!line.empty()) texts.push_back(line);
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const json row = json::parse(line);
      texts.push_back(row.at("text").get<std::string>());
    } catch (const json::exception&) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": expected an object with a \"text\" string");
    }
  }
  return texts;
}

// ---------------------------------------------------------------- segment

struct SegmentCmd {
  std::string input;
  KernelFlags kernel;
  std::optional<double> C;
  std::optional<double> beta;
  std::size_t min_size = 1;
  std::string solver = "pelt";
  std::size_t m_hint = 0;
  bool skip_header = false;
  bool quiet = false;
  std::uint64_t seed = 0;
  std::string out_path;

  void add_to(CLI::App* app) {
    app->add_option("--input", input, "Embedding file (.jsonl or .csv)")->required();
    kernel.add_to(app);
    app->add_flag("--normalize", kernel.normalize, "L2-normalise rows before an RBF kernel");
    app->add_option("--C", C, "Penalty constant in beta = C sqrt(T ln T)");
    app->add_option("--beta", beta, "Use this penalty directly, ignoring --C");
    app->add_option("--min-size", min_size, "Minimum segment length");
    app->add_option("--solver", solver, "pelt or dp")->check(CLI::IsMember({"pelt", "dp"}));
    app->add_option("--m", m_hint, "Dependence lag assumed by the penalty-floor warning");
    app->add_flag("--skip-header", skip_header, "Skip the first CSV row");
    app->add_flag("--quiet", quiet, "Suppress warnings");
    app->add_option("--seed", seed, "Accepted for uniformity; segmentation is deterministic");
    app->add_option("--out", out_path, "Write the JSON result here instead of stdout");
  }

  int run(std::ostream& out, std::ostream& err) const {
    const auto started = std::chrono::steady_clock::now();
    const DatasetEntry entry = load_sequence_file(input, skip_header);
    const KernelSpec requested = kernel.spec();
    const EmbeddingSequence seq = prepare(entry.seq, requested, kernel.normalize);
    const std::size_t T = seq.length();
    const double c = C.value_or(requested.kind == KernelKind::Rbf ? kDefaultCRbf : kDefaultCCosine);
    const double penalty = beta ? *beta : penalty_value({c}, T);
    const SolverOptions options{min_size};

    const GramMatrix gram = compute_gram(seq, requested);
    const GramPrefix prefix = build_prefix(gram);
    const SegmentationResult result =
        solver == "dp" ? dp_penalized(prefix, penalty, options) : pelt_penalized(prefix, penalty, options);

    if (!quiet && T >= 2) {
      const double floor = penalty_floor_a5(m_hint, gram.kernel().bound, T);
      if (penalty < floor) {
        err << "warning: beta = " << penalty << " is below the theoretical floor " << floor
            << " for m = " << m_hint << "; this is normal in practice\n";
      }
    }

    json j = result;
    j["config"] = {{"input", input},
                   {"kernel", gram.kernel()},
                   {"normalize", kernel.normalize || requested.kind == KernelKind::Cosine},
                   {"C", beta ? json(nullptr) : json(c)},
                   {"beta", penalty},
                   {"min_size", min_size},
                   {"solver", solver},
                   {"m", m_hint},
                   {"seed", seed}};
    if (entry.gold) j["gold_metrics"] = evaluate(*entry.gold, result.segmentation);
    j["runtime_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    emit(out_path, dump(j), out);
    return kExitOk;
  }
};

// ---------------------------------------------------------------- eval

struct EvalCmd {
  std::string ref;
  std::string hyp;
  std::optional<std::size_t> window;
  std::optional<std::size_t> ell;
  std::string out_path;

  void add_to(CLI::App* app) {
    app->add_option("--ref", ref, "Reference segmentation (.json or .jsonl)")->required();
    app->add_option("--hyp", hyp, "Hypothesis segmentation (.json or .jsonl)")->required();
    app->add_option("--window", window, "Window (default: half the mean reference block length)");
    app->add_option("--ell", ell, "Location-error normaliser (default: shortest reference block)");
    app->add_option("--out", out_path, "Write the JSON result here instead of stdout");
  }

  int run(std::ostream& out, std::ostream&) const {
    const Segmentation r = load_segmentation(ref);
    const Segmentation h = load_segmentation(hyp);
    json j = evaluate(r, h, window, ell);
    j["config"] = {{"ref", ref},
                   {"hyp", hyp},
                   {"window", window ? json(*window) : json("default")},
                   {"ell", ell ? json(*ell) : json("default")}};
    emit(out_path, dump(j), out);
    return kExitOk;
  }
};

// ---------------------------------------------------------------- simulate

struct SimulateCmd {
  std::vector<std::size_t> T_grid;
  std::size_t replicates = 100;
  SimFlags sim;
  KernelFlags kernel;
  double C = 0.1;
  std::size_t min_size = 1;
  std::string spacing = "scaled";
  std::size_t threads = 1;
  bool timings = false;
  std::string format = "json";
  std::string out_path;

  void add_to(CLI::App* app) {
    app->add_option("--T,--T-grid", T_grid, "Sequence lengths, comma separated")
        ->delimiter(',')
        ->required();
    app->add_option("--replicates", replicates, "Replicates per length");
    sim.add_to(app, false);
    kernel.add_to(app);
    app->add_option("--C", C, "Penalty constant in beta = C sqrt(T ln T)");
    app->add_option("--min-size", min_size, "Minimum segment length for the solver");
    app->add_option("--spacing", spacing, "fixed: use --ell; scaled: max(ell, T/(4K))")
        ->check(CLI::IsMember({"fixed", "scaled"}));
    app->add_option("--threads", threads, "Worker threads for replicates");
    app->add_flag("--timings", timings, "Record per-replicate wall time (breaks byte-identity)");
    app->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    app->add_option("--out", out_path, "Write the report here instead of stdout");
  }

  int run(std::ostream& out, std::ostream&) const {
    ExperimentConfig config;
    config.T_grid = T_grid;
    config.replicates = replicates;
    config.base = sim.config();
    config.kernel = kernel.spec();
    config.schedule.C = C;
    config.solver.min_size = min_size;
    config.spacing = spacing == "fixed" ? SpacingRule::Fixed : SpacingRule::Scaled;
    config.threads = threads;
    config.record_timings = timings;
    const ExperimentReport report = consistency_experiment(config);
    if (format == "csv") {
      std::ostringstream csv;
      write_records_csv(csv, report);
      emit(out_path, csv.str(), out);
    } else {
      emit(out_path, dump(report), out);
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------- sweep

struct SweepCmd {
  std::string input;
  bool skip_header = false;
  std::vector<double> C_grid{0.001, 0.01, 0.1, 1.0, 10.0};
  SimFlags sim;
  std::size_t replicates = 1;
  KernelFlags kernel;
  std::size_t min_size = 1;
  std::string format = "csv";
  std::string out_path;

  void add_to(CLI::App* app) {
    app->add_option("--input", input, "Embedding file; omit to sweep simulated data");
    app->add_flag("--skip-header", skip_header, "Skip the first CSV row");
    app->add_option("--C-grid", C_grid, "Ascending penalty constants, comma separated")
        ->delimiter(',');
    sim.add_to(app, true);
    app->add_option("--replicates", replicates, "Simulated replicates to average over");
    kernel.add_to(app);
    app->add_flag("--normalize", kernel.normalize, "L2-normalise rows before an RBF kernel");
    app->add_option("--min-size", min_size, "Minimum segment length");
    app->add_option("--format", format, "csv or json")->check(CLI::IsMember({"json", "csv"}));
    app->add_option("--out", out_path, "Write the table here instead of stdout");
  }

  int run(std::ostream& out, std::ostream&) const {
    check_c_grid(C_grid);
    const KernelSpec spec = kernel.spec();
    const SolverOptions options{min_size};
    SweepTable table;
    json config;
    if (!input.empty()) {
      const DatasetEntry entry = load_sequence_file(input, skip_header);
      const GramMatrix gram = compute_gram(prepare(entry.seq, spec, kernel.normalize), spec);
      table = sweep_penalty(build_prefix(gram), C_grid, options);
      config = {{"input", input}, {"kernel", gram.kernel()}};
    } else {
      const SimConfig sc = sim.config();
      table = sweep_penalty(sc, C_grid, spec, replicates, options);
      config = {{"sim", sc}, {"replicates", replicates}, {"kernel", spec}};
    }
    config["C_grid"] = C_grid;
    config["min_size"] = min_size;
    if (format == "json") {
      json j = table;
      j["config"] = config;
      emit(out_path, dump(j), out);
    } else {
      std::ostringstream csv;
      write_sweep_csv(csv, table);
      emit(out_path, csv.str(), out);
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------- embed

struct EmbedCmd {
  std::string input;
  EmbedServiceConfig service;
  std::string out_path;

  void add_to(CLI::App* app) {
    app->add_option("--input", input, "Texts: .jsonl with \"text\" fields, or one per line")
        ->required();
    app->add_option("--endpoint", service.endpoint, "Embedding endpoint URL")->required();
    app->add_option("--model", service.model, "Model name sent with each request");
    app->add_option("--token-env", service.token_env, "Environment variable holding the API token");
    app->add_option("--batch-size", service.batch_size, "Texts per request");
    app->add_option("--max-retries", service.max_retries, "Retries on 429/5xx");
    app->add_option("--timeout", service.timeout_seconds, "Per-request timeout in seconds");
    app->add_option("--vector-path", service.vector_path, "Location of each vector in the response");
    app->add_option("--backoff-base", service.backoff_base_seconds, "First retry delay in seconds");
    app->add_option("--parallel", service.parallel_connections, "Concurrent requests");
    app->add_option("--out", out_path, "Write JSONL here instead of stdout");
  }

  int run(std::ostream& out, std::ostream&) const {
    const std::vector<std::string> texts = load_texts(input);
    const auto rows = fetch_embeddings(service, texts);
    std::ostringstream jsonl;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      jsonl << json{{"vec", rows[i]}, {"text", texts[i]}}.dump() << '\n';
    }
    emit(out_path, jsonl.str(), out);
    return kExitOk;
  }
};

// ---------------------------------------------------------------- concentration

struct ConcentrationCmd {
  ConcentrationConfig config;
  KernelFlags kernel;
  std::string format = "json";
  std::string out_path;

  void add_to(CLI::App* app) {
    app->add_option("--n", config.n, "Block length");
    app->add_option("--m", config.m, "Dependence lag");
    app->add_option("--d", config.d, "Observation dimension");
    app->add_option("--sigma", config.sigma, "Noise standard deviation");
    app->add_option("--replicates", config.replicates, "Monte-Carlo replicates");
    app->add_option("--x-grid", config.x_grid, "Deviation thresholds, comma separated")
        ->delimiter(',');
    app->add_option("--seed", config.seed, "Random seed");
    kernel.add_to(app);
    app->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    app->add_option("--out", out_path, "Write the report here instead of stdout");
  }

  int run(std::ostream& out, std::ostream&) {
    config.kernel = kernel.spec();
    const ConcentrationReport report = concentration_check(config);
    if (format == "csv") {
      std::ostringstream csv;
      write_concentration_csv(csv, report);
      emit(out_path, csv.str(), out);
    } else {
      emit(out_path, dump(report), out);
    }
    return kExitOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kernel change-point detection"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SegmentCmd segment;
  EvalCmd eval;
  SimulateCmd simulate;
  SweepCmd sweep;
  EmbedCmd embed;
  ConcentrationCmd concentration;
  auto* segment_app = app.add_subcommand("segment", "Segment an embedding sequence");
  auto* eval_app = app.add_subcommand("eval", "Score a hypothesis segmentation against a reference");
  auto* simulate_app = app.add_subcommand("simulate", "Run the growth experiment on MA(m) data");
  auto* sweep_app = app.add_subcommand("sweep", "Number of change points across a C grid");
  auto* embed_app = app.add_subcommand("embed", "Fetch embeddings from an HTTP service");
  auto* concentration_app =
      app.add_subcommand("concentration", "Compare block-cost tails with the analytic bound");
  segment.add_to(segment_app);
  eval.add_to(eval_app);
  simulate.add_to(simulate_app);
  sweep.add_to(sweep_app);
  embed.add_to(embed_app);
  concentration.add_to(concentration_app);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*segment_app) return segment.run(out, err);
    if (*eval_app) return eval.run(out, err);
    if (*simulate_app) return simulate.run(out, err);
    if (*sweep_app) return sweep.run(out, err);
    if (*embed_app) return embed.run(out, err);
    if (*concentration_app) return concentration.run(out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace kcpd::cli
