#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "confcal/commands.hpp"
#include "confcal/losses.hpp"
#include "confcal/metrics.hpp"
#include "confcal/posthoc.hpp"
#include "confcal/report_io.hpp"

namespace py = pybind11;
using namespace confcal;

namespace {

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

ProbDist dist(const std::vector<double>& probs) { return ProbDist(probs); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Calibration metrics, calibration-aware losses, debate runs and temperature scaling";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<InputError> input(m, "InputError", base.ptr());
  static py::exception<TransportError> transport(m, "TransportError", base.ptr());
  static py::exception<InvariantError> invariant(m, "InvariantError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InputError& e) {
      py::set_error(input, e.what());
    } catch (const TransportError& e) {
      py::set_error(transport, e.what());
    } catch (const InvariantError& e) {
      py::set_error(invariant, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  py::class_<PredictionRecord>(m, "PredictionRecord")
      .def(py::init([](std::string id, std::string predicted, std::string truth, double confidence) {
             return PredictionRecord{std::move(id), std::move(predicted), std::move(truth), confidence};
           }),
           py::arg("id"), py::arg("predicted_answer"), py::arg("true_answer"), py::arg("confidence"))
      .def_readwrite("id", &PredictionRecord::id)
      .def_readwrite("predicted_answer", &PredictionRecord::predicted_answer)
      .def_readwrite("true_answer", &PredictionRecord::true_answer)
      .def_readwrite("confidence", &PredictionRecord::confidence)
      .def_property_readonly("correct", &PredictionRecord::correct)
      .def("__repr__", [](const PredictionRecord& r) { return "PredictionRecord(" + to_json(r).dump() + ")"; });

  m.def("normalize_answer", &normalize_answer);
  m.def("load_predictions", &load_predictions, py::arg("path"));
  m.def("save_predictions", &save_predictions, py::arg("path"), py::arg("records"));

  m.def("ece", [](const std::vector<PredictionRecord>& r, int bins) { return ece(r, bins); },
        py::arg("records"), py::arg("bins") = kDefaultNumBins);
  m.def("mce", [](const std::vector<PredictionRecord>& r, int bins) { return mce(r, bins); },
        py::arg("records"), py::arg("bins") = kDefaultNumBins);
  m.def("ace", [](const std::vector<PredictionRecord>& r, int bins) { return ace(r, bins); },
        py::arg("records"), py::arg("bins") = kDefaultNumBins);
  m.def("ubce", [](const std::vector<PredictionRecord>& r) { return ubce_empirical(r); },
        py::arg("records"));
  m.def("compute_metrics",
        [](const std::vector<PredictionRecord>& r, int bins) { return to_py(to_json(compute_metrics(r, bins))); },
        py::arg("records"), py::arg("bins") = kDefaultNumBins);

  m.def("softmax", [](const std::vector<double>& z) {
    const auto p = softmax(z);
    return std::vector<double>(p.values().begin(), p.values().end());
  });
  m.def("aligncal_loss", [](const std::vector<double>& p, std::size_t y) { return aligncal_loss(dist(p), y); },
        py::arg("probs"), py::arg("label"));
  m.def("focal_loss",
        [](const std::vector<double>& p, std::size_t y, double gamma) { return focal_loss(dist(p), y, gamma); },
        py::arg("probs"), py::arg("label"), py::arg("gamma") = 2.0);
  m.def("label_smoothing_loss",
        [](const std::vector<double>& p, std::size_t y, double alpha) {
          return label_smoothing_loss(dist(p), y, alpha);
        },
        py::arg("probs"), py::arg("label"), py::arg("alpha") = 0.1);
  m.def("aligncal_grad", [](const std::vector<double>& z, std::size_t y) { return aligncal_grad(z, y); },
        py::arg("logits"), py::arg("label"));
  m.def("total_loss",
        [](const std::vector<double>& z, std::size_t y, double gamma, double lambda) {
          return total_loss(z, y, LossConfig{gamma, lambda});
        },
        py::arg("logits"), py::arg("label"), py::arg("gamma") = 2.0, py::arg("lambda_") = 2.0);
  m.def("total_grad",
        [](const std::vector<double>& z, std::size_t y, double gamma, double lambda) {
          return total_grad(z, y, LossConfig{gamma, lambda});
        },
        py::arg("logits"), py::arg("label"), py::arg("gamma") = 2.0, py::arg("lambda_") = 2.0);

  m.def("fit_temperature",
        [](const std::vector<PredictionRecord>& r, double lo, double hi, double step) {
          return fit_temperature(r, TemperatureGrid{lo, hi, step});
        },
        py::arg("holdout"), py::arg("t_min") = 0.1, py::arg("t_max") = 10.0, py::arg("t_step") = 0.1);
  m.def("apply_temperature",
        [](const std::vector<PredictionRecord>& r, double t) { return apply_temperature(r, t); },
        py::arg("records"), py::arg("temperature"));
  m.def("scale_confidence", &scale_confidence, py::arg("confidence"), py::arg("temperature"));

  m.def("train_demo",
        [](std::vector<std::uint64_t> seeds, int epochs) {
          TrainDemoOptions o;
          o.seeds = std::move(seeds);
          o.epochs = epochs;
          py::gil_scoped_release release;
          auto j = cmd_train_demo(o);
          py::gil_scoped_acquire acquire;
          return to_py(j);
        },
        py::arg("seeds") = std::vector<std::uint64_t>{1, 2, 3, 4, 5}, py::arg("epochs") = 50);

  m.def("debate",
        [](const std::filesystem::path& queries, const std::filesystem::path& roster, std::uint64_t seed,
           int rounds, bool skip_unanimous) {
          DebateOptions o;
          o.queries = queries;
          o.roster = roster;
          o.config.seed = seed;
          o.config.rounds = rounds;
          o.config.skip_unanimous = skip_unanimous;
          const auto batch = cmd_debate(o);
          py::list results;
          for (const auto& r : batch.results) results.append(to_py(r.to_json()));
          return py::make_tuple(results, to_py(batch.report), static_cast<int>(batch.status));
        },
        py::arg("queries"), py::arg("roster"), py::arg("seed") = 0, py::arg("rounds") = 1,
        py::arg("skip_unanimous") = true);
}
