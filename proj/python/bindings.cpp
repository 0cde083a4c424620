// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "scalaw/checkpoint.hpp"
#include "scalaw/cli.hpp"
#include "scalaw/errors.hpp"
#include "scalaw/evaluation.hpp"
#include "scalaw/fit.hpp"
#include "scalaw/law.hpp"
#include "scalaw/meta.hpp"
#include "scalaw/report.hpp"
#include "scalaw/subset.hpp"
#include "scalaw/synth.hpp"

namespace py = pybind11;
using namespace scalaw;

namespace {

SubsetSpec make_spec(std::optional<int> num_models, std::optional<double> train_fraction,
                     std::optional<std::int64_t> cutoff_tokens, double target_fraction) {
  SubsetSpec s;
  s.num_models = num_models;
  s.train_fraction_max = train_fraction;
  s.cutoff_tokens = cutoff_tokens;
  s.target_fraction = target_fraction;
  s.validate();
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Scaling-law estimation from checkpoint logs";

  static py::exception<UsageError> usage_exc(m, "UsageError", PyExc_ValueError);
  static py::exception<DataError> data_exc(m, "DataError", PyExc_ValueError);
  static py::exception<NumericError> numeric_exc(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const UsageError& e) {
      usage_exc(e.what());
    } catch (const DataError& e) {
      data_exc(e.what());
    } catch (const NumericError& e) {
      numeric_exc(e.what());
    }
  });

  py::class_<LawParams>(m, "LawParams")
      .def(py::init<>())
      .def(py::init([](double E, double A, double alpha, double B, double beta) {
             return LawParams{E, A, alpha, B, beta};
           }),
           py::arg("E"), py::arg("A"), py::arg("alpha"), py::arg("B"), py::arg("beta"))
      .def_readwrite("E", &LawParams::E)
      .def_readwrite("A", &LawParams::A)
      .def_readwrite("alpha", &LawParams::alpha)
      .def_readwrite("B", &LawParams::B)
      .def_readwrite("beta", &LawParams::beta)
      .def("to_list", [](const LawParams& p) {
        auto a = p.to_array();
        return std::vector<double>(a.begin(), a.end());
      })
      .def("__eq__", [](const LawParams& a, const LawParams& b) { return a == b; })
      .def("__repr__", [](const LawParams& p) { return to_json(p).dump(); });

  py::class_<CheckpointRecord>(m, "CheckpointRecord")
      .def(py::init<>())
      .def_readwrite("family_id", &CheckpointRecord::family_id)
      .def_readwrite("model_id", &CheckpointRecord::model_id)
      .def_readwrite("num_params", &CheckpointRecord::num_params)
      .def_readwrite("tokens_seen", &CheckpointRecord::tokens_seen)
      .def_readwrite("total_tokens", &CheckpointRecord::total_tokens)
      .def_readwrite("seed", &CheckpointRecord::seed)
      .def_readwrite("loss", &CheckpointRecord::loss)
      .def_readwrite("flops", &CheckpointRecord::flops)
      .def_readwrite("loss_corpus", &CheckpointRecord::loss_corpus);

  py::class_<ScaledFamily>(m, "ScaledFamily")
      .def(py::init<std::string, std::vector<CheckpointRecord>>(), py::arg("family_id"),
           py::arg("records"))
      .def_property_readonly("family_id", &ScaledFamily::family_id)
      .def_property_readonly("records",
                             [](const ScaledFamily& f) {
                               auto r = f.records();
                               return std::vector<CheckpointRecord>(r.begin(), r.end());
                             })
      .def("sizes", &ScaledFamily::sizes)
      .def("corpora", &ScaledFamily::corpora)
      .def("__len__", &ScaledFamily::size);

  m.def(
      "ingest_string",
      [](const std::string& text, const std::string& format) {
        if (format != "csv" && format != "jsonl") throw UsageError("format must be csv or jsonl");
        return ingest_string(text, format == "csv" ? TableFormat::kCsv : TableFormat::kJsonl);
      },
      py::arg("text"), py::arg("format") = "csv");
  m.def(
      "ingest_file", [](const std::string& path) { return ingest_file(path); }, py::arg("path"));
  m.def(
      "serialize",
      [](const std::vector<ScaledFamily>& families, const std::string& format) {
        if (format != "csv" && format != "jsonl") throw UsageError("format must be csv or jsonl");
        return serialize_string(families,
                                format == "csv" ? TableFormat::kCsv : TableFormat::kJsonl);
      },
      py::arg("families"), py::arg("format") = "csv");

  m.def("eval_law", &eval_law, py::arg("params"), py::arg("num_params"), py::arg("tokens"));

  m.def(
      "synthesize",
      [](const LawParams& truth, std::vector<std::int64_t> sizes,
         std::vector<std::int64_t> tokens, int checkpoints, double noise_sigma,
         double seed_sigma, int runs_per_size, std::uint64_t rng_seed, std::string family_id) {
        SynthSpec s;
        s.family_id = std::move(family_id);
        s.truth = truth;
        s.sizes = std::move(sizes);
        s.tokens_per_run = std::move(tokens);
        s.checkpoints_per_run = checkpoints;
        s.noise_sigma = noise_sigma;
        s.seed_sigma = seed_sigma;
        s.runs_per_size = runs_per_size;
        s.rng_seed = rng_seed;
        return generate(s);
      },
      py::arg("truth"), py::arg("sizes"), py::arg("tokens"), py::arg("checkpoints") = 20,
      py::arg("noise_sigma") = 0.0, py::arg("seed_sigma") = 0.0, py::arg("runs_per_size") = 1,
      py::arg("rng_seed") = 0, py::arg("family_id") = "synthetic");
  m.def("log_spaced_sizes", &log_spaced_sizes, py::arg("lo"), py::arg("hi"), py::arg("count"));

  m.def(
      "split",
      [](const ScaledFamily& f, std::optional<int> num_models,
         std::optional<double> train_fraction, std::optional<std::int64_t> cutoff_tokens,
         double target_fraction) {
        auto s = select_train_target(
            f, make_spec(num_models, train_fraction, cutoff_tokens, target_fraction));
        return py::make_tuple(s.train, s.target);
      },
      py::arg("family"), py::arg("num_models") = py::none(),
      py::arg("train_fraction") = py::none(), py::arg("cutoff_tokens") = py::none(),
      py::arg("target_fraction") = kDefaultTargetFraction);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("params", &FitResult::params)
      .def_readonly("objective", &FitResult::objective)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("restarts_tried", &FitResult::restarts_tried)
      .def_readonly("n_points", &FitResult::n_points)
      .def_readonly("iterations", &FitResult::iterations);

  m.def(
      "fit",
      [](const ScaledFamily& data, const std::string& loss, double delta, int restarts,
         std::optional<double> freeze_A, std::optional<double> freeze_alpha,
         std::uint64_t rng_seed) {
        FitConfig c;
        if (loss == "huber")
          c.loss = LossKind::huber(delta);
        else if (loss != "square")
          throw UsageError("loss must be 'square' or 'huber'");
        c.restarts = restarts;
        c.frozen.A = freeze_A;
        c.frozen.alpha = freeze_alpha;
        c.rng_seed = rng_seed;
        c.validate();
        py::gil_scoped_release release;
        return fit(data, c);
      },
      py::arg("data"), py::arg("loss") = "square", py::arg("delta") = kDefaultHuberDelta,
      py::arg("restarts") = 32, py::arg("freeze_A") = py::none(),
      py::arg("freeze_alpha") = py::none(), py::arg("rng_seed") = 0);

  m.def(
      "are", [](const LawParams& p, const ScaledFamily& t) { return are(p, t).are; },
      py::arg("params"), py::arg("targets"));
  m.def(
      "baseline_best_performance",
      [](const ScaledFamily& tr, const ScaledFamily& t) {
        return baseline_best_performance(tr, t).are;
      },
      py::arg("train"), py::arg("targets"));
  m.def(
      "baseline_most_trained",
      [](const ScaledFamily& tr, const ScaledFamily& t) {
        return baseline_most_trained(tr, t).are;
      },
      py::arg("train"), py::arg("targets"));

  m.def(
      "pca",
      [](const std::vector<LawParams>& fits, bool standardize) {
        auto r = pca_params(fits, standardize);
        py::dict d;
        d["eigenvalues"] = r.eigenvalues;
        d["explained_variance_ratio"] = r.explained_variance_ratio;
        d["components"] = r.components;
        d["scores"] = r.scores;
        return d;
      },
      py::arg("fits"), py::arg("standardize") = true);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
