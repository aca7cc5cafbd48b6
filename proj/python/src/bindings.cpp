#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kcpd/cost.hpp"
#include "kcpd/embed_client.hpp"
#include "kcpd/error.hpp"
#include "kcpd/ingest.hpp"
#include "kcpd/metrics.hpp"
#include "kcpd/segmentation.hpp"
#include "kcpd/simulate.hpp"
#include "kcpd/version.hpp"

namespace py = pybind11;
using namespace kcpd;

namespace {

using Matrix = py::array_t<double, py::array::c_style | py::array::forcecast>;

EmbeddingSequence to_sequence(const Matrix& x) {
  if (x.ndim() != 2) throw ValidationError("expected a 2-D array of shape (T, d)");
  const auto rows = static_cast<std::size_t>(x.shape(0));
  const auto cols = static_cast<std::size_t>(x.shape(1));
  return {rows, cols, std::vector<double>(x.data(), x.data() + rows * cols)};
}

py::array_t<double> to_array(const EmbeddingSequence& seq) {
  py::array_t<double> out({seq.length(), seq.dim()});
  std::copy(seq.values().begin(), seq.values().end(), out.mutable_data());
  return out;
}

KernelSpec make_kernel(const std::string& kernel, std::optional<double> bandwidth) {
  KernelSpec spec{parse_kernel_kind(kernel), bandwidth, 1.0};
  if (spec.kind == KernelKind::Cosine && bandwidth) {
    throw ValidationError("the cosine kernel takes no bandwidth");
  }
  return spec;
}

GramPrefix prefix_for(const Matrix& x, const std::string& kernel, std::optional<double> bandwidth) {
  EmbeddingSequence seq = to_sequence(x);
  const KernelSpec spec = make_kernel(kernel, bandwidth);
  if (spec.kind == KernelKind::Cosine) seq = normalize_rows(seq);
  return build_prefix(compute_gram(seq, resolve_kernel(spec, seq)));
}

py::dict result_dict(const SegmentationResult& r) {
  py::dict d;
  d["T"] = r.segmentation.length();
  d["change_points"] = r.segmentation.change_points();
  d["K"] = r.segmentation.num_change_points();
  d["objective"] = r.objective;
  d["per_segment_costs"] = r.per_segment_costs;
  d["beta"] = r.beta_used;
  return d;
}

}  // namespace

PYBIND11_MODULE(_kcpd, m) {
  m.doc() = "Kernel change-point detection core";
  m.attr("__version__") = std::string(kVersion);

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ServiceError>(m, "ServiceError", PyExc_RuntimeError);

  m.def("penalty", [](double C, std::size_t T) { return penalty_value({C}, T); }, py::arg("C"), py::arg("T"),
        "beta = C sqrt(T ln T)");
  m.def("penalty_floor", &penalty_floor_a5, py::arg("m"), py::arg("M"), py::arg("T"));
  m.def("median_bandwidth", [](const Matrix& x) { return median_heuristic_bandwidth(to_sequence(x)); },
        py::arg("X"));

  m.def(
      "segment",
      [](const Matrix& x, const std::string& kernel, std::optional<double> bandwidth, std::optional<double> C,
         std::optional<double> beta, const std::string& solver, std::size_t min_size) {
        const GramPrefix prefix = prefix_for(x, kernel, bandwidth);
        const double c = C.value_or(kernel == "cosine" ? 0.088 : 0.05);
        const double b = beta ? *beta : penalty_value({c}, prefix.length());
        py::gil_scoped_release release;
        SolverOptions options{min_size};
        if (solver == "dp") return dp_penalized(prefix, b, options);
        if (solver != "pelt") throw ValidationError("solver must be 'pelt' or 'dp'");
        return pelt_penalized(prefix, b, options);
      },
      py::arg("X"), py::arg("kernel") = "rbf", py::arg("bandwidth") = py::none(), py::arg("C") = py::none(),
      py::arg("beta") = py::none(), py::arg("solver") = "pelt", py::arg("min_size") = 1);

  m.def(
      "segment_fixed_k",
      [](const Matrix& x, std::size_t K, const std::string& kernel, std::optional<double> bandwidth) {
        return result_dict(dp_fixed_k(prefix_for(x, kernel, bandwidth), K));
      },
      py::arg("X"), py::arg("K"), py::arg("kernel") = "rbf", py::arg("bandwidth") = py::none());

  m.def(
      "block_cost",
      [](const Matrix& x, std::size_t s, std::size_t e, const std::string& kernel, std::optional<double> bandwidth) {
        return block_cost(prefix_for(x, kernel, bandwidth), s, e);
      },
      py::arg("X"), py::arg("s"), py::arg("e"), py::arg("kernel") = "rbf", py::arg("bandwidth") = py::none(),
      "Block cost over 1-based inclusive positions s..e.");

  m.def(
      "sweep",
      [](const Matrix& x, const std::vector<double>& C_grid, const std::string& kernel,
         std::optional<double> bandwidth) {
        const SweepTable table = sweep_penalty(prefix_for(x, kernel, bandwidth), C_grid);
        py::list rows;
        for (const SweepRow& r : table.rows) {
          rows.append(py::dict(py::arg("C") = r.C, py::arg("beta") = r.beta, py::arg("k_est") = r.k_est,
                               py::arg("objective") = r.objective));
        }
        return py::make_tuple(rows, table.monotone);
      },
      py::arg("X"), py::arg("C_grid"), py::arg("kernel") = "rbf", py::arg("bandwidth") = py::none());

  m.def(
      "evaluate",
      [](std::size_t T, std::vector<std::size_t> ref, std::vector<std::size_t> hyp,
         std::optional<std::size_t> window, std::optional<std::size_t> ell) {
        const MetricReport r = kcpd::evaluate(Segmentation(T, std::move(ref)), Segmentation(T, std::move(hyp)),
                                              window, ell);
        py::dict d;
        d["pk"] = r.pk;
        d["window_diff"] = r.window_diff;
        d["window"] = r.window;
        d["k_true"] = r.k_true;
        d["k_est"] = r.k_est;
        d["k_match"] = r.k_match;
        d["loc_err_true_to_est"] = r.loc_err_true_to_est;
        d["loc_err_est_to_true"] = r.loc_err_est_to_true;
        d["ell"] = r.ell;
        return d;
      },
      py::arg("T"), py::arg("ref"), py::arg("hyp"), py::arg("window") = py::none(), py::arg("ell") = py::none());

  m.def(
      "simulate",
      [](std::size_t T, std::size_t d, std::size_t m_lag, std::optional<std::size_t> K, std::size_t ell,
         double delta, double sigma, std::uint64_t seed) {
        SimConfig c;
        c.T = T;
        c.d = d;
        c.m = m_lag;
        c.K = K;
        c.min_spacing = ell;
        c.mean_shift = delta;
        c.noise_sigma = sigma;
        c.seed = seed;
        const GeneratedSequence g = generate_m_dependent(c);
        return py::make_tuple(to_array(g.seq), g.truth.change_points());
      },
      py::arg("T"), py::arg("d") = 16, py::arg("m") = 0, py::arg("K") = py::none(), py::arg("ell") = 20,
      py::arg("delta") = 2.0, py::arg("sigma") = 1.0, py::arg("seed") = 0,
      "Returns (X, change_points) for a piecewise-mean MA(m) sequence.");

  m.def("concentration_bound", &concentration_bound, py::arg("x"), py::arg("m"), py::arg("M"), py::arg("n"));

  m.def(
      "load_sequence",
      [](const std::filesystem::path& path, bool skip_header) {
        DatasetEntry e = load_sequence_file(path, skip_header);
        py::object gold = py::none();
        if (e.gold) gold = py::cast(e.gold->change_points());
        return py::make_tuple(to_array(e.seq), gold, e.texts);
      },
      py::arg("path"), py::arg("skip_header") = false,
      "Returns (X, gold change points or None, texts) from a .jsonl or .csv file.");

  m.def(
      "save_jsonl",
      [](const std::filesystem::path& path, const Matrix& x, std::optional<std::vector<std::size_t>> gold,
         const std::vector<std::string>& texts) {
        const EmbeddingSequence seq = to_sequence(x);
        std::optional<Segmentation> g;
        if (gold) g = Segmentation(seq.length(), *gold);
        save_jsonl(path, seq, g, texts);
      },
      py::arg("path"), py::arg("X"), py::arg("gold") = py::none(), py::arg("texts") = std::vector<std::string>{});

  m.def(
      "embed",
      [](const std::vector<std::string>& texts, const std::string& endpoint, const std::string& model,
         const std::string& token_env, std::size_t batch_size, std::size_t max_retries) {
        EmbedServiceConfig c;
        c.endpoint = endpoint;
        c.model = model;
        c.token_env = token_env;
        c.batch_size = batch_size;
        c.max_retries = max_retries;
        py::gil_scoped_release release;
        return fetch_embeddings(c, texts);
      },
      py::arg("texts"), py::arg("endpoint"), py::arg("model") = "text-embedding-3-small",
      py::arg("token_env") = "OPENAI_API_KEY", py::arg("batch_size") = 100, py::arg("max_retries") = 5);

  py::class_<SegmentationResult>(m, "SegmentationResult")
      .def_property_readonly("change_points", [](const SegmentationResult& r) { return r.segmentation.change_points(); })
      .def_property_readonly("K", [](const SegmentationResult& r) { return r.segmentation.num_change_points(); })
      .def_readonly("objective", &SegmentationResult::objective)
      .def_readonly("per_segment_costs", &SegmentationResult::per_segment_costs)
      .def_readonly("beta", &SegmentationResult::beta_used)
      .def("to_dict", &result_dict)
      .def("__repr__", [](const SegmentationResult& r) {
        return "SegmentationResult(K=" + std::to_string(r.segmentation.num_change_points()) +
               ", objective=" + std::to_string(r.objective) + ")";
      });
}
