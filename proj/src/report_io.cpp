#include "kcpd/report_io.hpp"

#include <charconv>
#include <cmath>

namespace kcpd {

using nlohmann::json;

namespace {

json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

const char* spacing_name(SpacingRule rule) {
  return rule == SpacingRule::Fixed ? "fixed" : "scaled";
}

}  // namespace

void to_json(json& j, const KernelSpec& spec) {
  j = json{{"kind", std::string(to_string(spec.kind))}, {"bound", spec.bound}};
  if (spec.kind == KernelKind::Rbf) {
    j["bandwidth"] = spec.bandwidth ? json(*spec.bandwidth) : json("median");
  }
}

void to_json(json& j, const Segmentation& seg) {
  j = json{{"T", seg.length()}, {"change_points", seg.change_points()}};
}

void to_json(json& j, const SegmentationResult& result) {
  j = json{{"T", result.segmentation.length()},
           {"change_points", result.segmentation.change_points()},
           {"K", result.segmentation.num_change_points()},
           {"objective", result.objective},
           {"per_segment_costs", result.per_segment_costs},
           {"beta", result.beta_used}};
}

void to_json(json& j, const MetricReport& r) {
  j = json{{"pk", r.pk},
           {"window_diff", r.window_diff},
           {"window", r.window},
           {"k_true", r.k_true},
           {"k_est", r.k_est},
           {"k_match", r.k_match},
           {"loc_err_true_to_est", real(r.loc_err_true_to_est)},
           {"loc_err_est_to_true", real(r.loc_err_est_to_true)},
           {"ell_T", r.ell}};
}

void to_json(json& j, const SimConfig& c) {
  j = json{{"T", c.T},
           {"d", c.d},
           {"m", c.m},
           {"K", c.K ? json(*c.K) : json("auto")},
           {"min_spacing", c.min_spacing},
           {"mean_shift", c.mean_shift},
           {"noise_sigma", c.noise_sigma},
           {"seed", c.seed}};
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"T_grid", c.T_grid},
           {"replicates", c.replicates},
           {"base", c.base},
           {"kernel", c.kernel},
           {"C", c.schedule.C},
           {"min_size", c.solver.min_size},
           {"spacing", spacing_name(c.spacing)},
           {"threads", c.threads}};
}

void to_json(json& j, const ReplicateRecord& r) {
  j = json{{"T", r.T},
           {"replicate", r.replicate},
           {"seed", r.seed},
           {"ell", r.ell},
           {"beta", r.beta},
           {"k_true", r.k_true},
           {"k_est", r.k_est},
           {"pk", r.pk},
           {"wd", r.wd},
           {"loc_est_to_true", real(r.loc_est_to_true)},
           {"loc_true_to_est", real(r.loc_true_to_est)}};
  if (r.runtime_ms) j["runtime_ms"] = *r.runtime_ms;
}

void to_json(json& j, const Summary& s) {
  j = json{{"mean", real(s.mean)}, {"std", real(s.std)}, {"median", real(s.median)}};
}

void to_json(json& j, const TAggregate& a) {
  j = json{{"T", a.T},
           {"K", a.K},
           {"ell", a.ell},
           {"beta", a.beta},
           {"count", a.count},
           {"k_match_freq", a.k_match_freq},
           {"k_est", a.k_est},
           {"pk", a.pk},
           {"wd", a.wd},
           {"loc_est_to_true", a.loc_est_to_true},
           {"loc_true_to_est", a.loc_true_to_est}};
}

void to_json(json& j, const ExperimentReport& r) {
  j = json{{"config", r.config}, {"records", r.records}, {"aggregates", r.aggregates}};
}

void to_json(json& j, const ConcentrationConfig& c) {
  j = json{{"n", c.n},
           {"m", c.m},
           {"d", c.d},
           {"sigma", c.sigma},
           {"kernel", c.kernel},
           {"x_grid", c.x_grid.empty() ? json("auto") : json(c.x_grid)},
           {"replicates", c.replicates},
           {"seed", c.seed}};
}

void to_json(json& j, const ConcentrationReport& r) {
  j = json{{"config", r.config},
           {"n", r.config.n},
           {"m", r.config.m},
           {"M", r.bound_M},
           {"cost_mean", r.cost_mean},
           {"cost_std", r.cost_std},
           {"x_grid", r.x_grid},
           {"empirical_tail", r.empirical_tail},
           {"stderr", r.stderr_tail},
           {"bound", r.bound},
           {"bound_display", r.bound_display},
           {"lambda_T", r.lambda_T}};
}

void to_json(json& j, const SweepTable& t) {
  json rows = json::array();
  for (const SweepRow& r : t.rows) {
    rows.push_back({{"C", r.C}, {"beta", r.beta}, {"k_est", r.k_est}, {"objective", r.objective}});
  }
  j = json{{"rows", rows}, {"monotone", t.monotone}};
}

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_records_csv(std::ostream& out, const ExperimentReport& report) {
  const bool timed = report.config.record_timings;
  out << "T,replicate,seed,ell,beta,k_true,k_est,pk,wd,loc_est_to_true,loc_true_to_est";
  if (timed) out << ",runtime_ms";
  out << '\n';
  for (const ReplicateRecord& r : report.records) {
    out << r.T << ',' << r.replicate << ',' << r.seed << ',' << r.ell << ',' << format_real(r.beta)
        << ',' << r.k_true << ',' << r.k_est << ',' << format_real(r.pk) << ','
        << format_real(r.wd) << ',' << format_real(r.loc_est_to_true) << ','
        << format_real(r.loc_true_to_est);
    if (timed) out << ',' << format_real(r.runtime_ms.value_or(0.0));
    out << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const SweepTable& table) {
  out << "C,beta,k_est,objective\n";
  for (const SweepRow& r : table.rows) {
    out << format_real(r.C) << ',' << format_real(r.beta) << ',' << format_real(r.k_est) << ','
        << format_real(r.objective) << '\n';
  }
  out << "# monotone: " << (table.monotone ? "true" : "false") << '\n';
}

void write_concentration_csv(std::ostream& out, const ConcentrationReport& report) {
  out << "x,empirical_tail,stderr,bound,bound_display\n";
  for (std::size_t i = 0; i < report.x_grid.size(); ++i) {
    out << format_real(report.x_grid[i]) << ',' << format_real(report.empirical_tail[i]) << ','
        << format_real(report.stderr_tail[i]) << ',' << format_real(report.bound[i]) << ','
        << format_real(report.bound_display[i]) << '\n';
  }
}

}  // namespace kcpd
