#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sosflow/data.hpp"
#include "sosflow/error.hpp"
#include "sosflow/flow.hpp"
#include "sosflow/oracle.hpp"
#include "sosflow/sospoly.hpp"
#include "sosflow/train.hpp"

namespace py = pybind11;
using namespace sosflow;

namespace {

std::vector<double> as_vector(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace

PYBIND11_MODULE(_sosflow, m) {
  m.doc() = "Sum-of-squares polynomial flows";

  py::enum_<ErrorKind> kinds(m, "ErrorKind");
  for (int i = 0; i <= static_cast<int>(ErrorKind::kUnsupported); ++i) {
    const auto k = static_cast<ErrorKind>(i);
    kinds.value(to_string(k), k);
  }

  static py::exception<Error> sos_error(m, "SosflowError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = sos_error;
      py::object inst = err(e.what());
      inst.attr("kind") = py::cast(e.kind());
      PyErr_SetObject(sos_error.ptr(), inst.ptr());
    }
  });

  // sospoly
  py::class_<SosCoeffs>(m, "SosCoeffs")
      .def(py::init([](Eigen::MatrixXd a, double c) { return SosCoeffs{std::move(a), c}; }),
           py::arg("a"), py::arg("c") = 0.0)
      .def_readwrite("a", &SosCoeffs::a)
      .def_readwrite("c", &SosCoeffs::c)
      .def_property_readonly("k", &SosCoeffs::k)
      .def_property_readonly("r", &SosCoeffs::r)
      .def_static("identity", &SosCoeffs::identity, py::arg("k") = 1, py::arg("r") = 0);
  py::class_<MonoPoly>(m, "MonoPoly")
      .def_readonly("b", &MonoPoly::b)
      .def_readonly("c", &MonoPoly::c);
  m.def("expand", &expand);
  m.def(
      "eval",
      [](const MonoPoly& p, const py::array_t<double>& z) {
        return py::vectorize([&p](double v) { return eval(p, v); })(z);
      },
      py::arg("poly"), py::arg("z"));
  m.def(
      "deriv",
      [](const SosCoeffs& c, const py::array_t<double>& z) {
        return py::vectorize([&c](double v) { return deriv(c, v); })(z);
      },
      py::arg("coeffs"), py::arg("z"));
  m.def("invert",
        py::overload_cast<const SosCoeffs&, double, double, int>(&invert),
        py::arg("coeffs"), py::arg("x"), py::arg("tol") = 1e-12,
        py::arg("max_iter") = kDefaultInvertIterations);

  // flow
  py::enum_<SourceKind>(m, "SourceKind")
      .value("normal", SourceKind::kNormal)
      .value("uniform", SourceKind::kUniform);
  py::class_<FlowSpec>(m, "FlowSpec")
      .def(py::init<>())
      .def_readwrite("dim", &FlowSpec::dim)
      .def_readwrite("blocks", &FlowSpec::blocks)
      .def_readwrite("k", &FlowSpec::k)
      .def_readwrite("r", &FlowSpec::r)
      .def_readwrite("hidden_sizes", &FlowSpec::hidden_sizes)
      .def_readwrite("alternate_orderings", &FlowSpec::alternate_orderings)
      .def_readwrite("source", &FlowSpec::source)
      .def_readwrite("seed", &FlowSpec::seed);
  py::class_<FlowModel>(m, "FlowModel")
      .def_static("build", &FlowModel::build)
      .def_property_readonly("dim", &FlowModel::dim)
      .def_property_readonly("num_blocks", &FlowModel::num_blocks)
      .def_property_readonly("num_params", &FlowModel::num_params)
      .def("log_prob", &FlowModel::log_prob_rows, py::arg("rows"),
           "Log-density of each row of an n x d array.")
      .def(
          "normalize",
          [](const FlowModel& f, const Eigen::VectorXd& x) {
            const auto n = f.normalize(as_vector(x));
            return py::make_tuple(n.z, n.logdet);
          },
          py::arg("x"))
      .def(
          "inverse", [](const FlowModel& f, const Eigen::MatrixXd& z, double tol) {
            return f.inverse_rows(z, tol);
          },
          py::arg("z"), py::arg("tol") = 1e-12)
      .def("sample", &FlowModel::sample, py::arg("n"), py::arg("seed"))
      .def_property("params", &FlowModel::params, [](FlowModel& f, const Eigen::VectorXd& v) {
        f.set_params(as_vector(v));
      });
  m.def("param_count", &param_count, py::arg("blocks"), py::arg("k"), py::arg("r"));

  // train
  py::enum_<OptimizerKind>(m, "OptimizerKind")
      .value("adam", OptimizerKind::kAdam)
      .value("sgd", OptimizerKind::kSgd);
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("blocks", &TrainConfig::blocks)
      .def_readwrite("k", &TrainConfig::k)
      .def_readwrite("r", &TrainConfig::r)
      .def_readwrite("hidden_sizes", &TrainConfig::hidden_sizes)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("val_fraction", &TrainConfig::val_fraction)
      .def_readwrite("optimizer", &TrainConfig::optimizer)
      .def_readwrite("clip_gradients", &TrainConfig::clip_gradients)
      .def_readwrite("clip_value", &TrainConfig::clip_value)
      .def_readwrite("alternate_orderings", &TrainConfig::alternate_orderings)
      .def_readwrite("shards", &TrainConfig::shards)
      .def("validate", &TrainConfig::validate);
  py::class_<EpochMetrics>(m, "EpochMetrics")
      .def_readonly("epoch", &EpochMetrics::epoch)
      .def_readonly("train_nll", &EpochMetrics::train_nll)
      .def_readonly("val_nll", &EpochMetrics::val_nll);
  py::class_<FitResult>(m, "FitResult")
      .def_readonly("model", &FitResult::model)
      .def_readonly("history", &FitResult::history)
      .def_readonly("best_epoch", &FitResult::best_epoch);
  m.def("fit", &fit, py::arg("data"), py::arg("config"),
        py::arg("on_epoch") = EpochCallback{}, py::call_guard<py::gil_scoped_release>());
  m.def("mean_nll", &mean_nll, py::arg("model"), py::arg("rows"));
  m.def("save", &save, py::arg("model"), py::arg("path"));
  m.def("load", &load, py::arg("path"));
  m.def("serialize", [](const FlowModel& f) { return py::bytes(serialize(f)); });
  m.def("deserialize", [](const py::bytes& b) { return deserialize(std::string(b)); });

  // data
  m.def("dataset_names", &dataset_names);
  m.def("gen", [](const std::string& name, int n, std::uint64_t seed) {
    return gen(name, n, seed).rows;
  }, py::arg("name"), py::arg("n"), py::arg("seed"));
  m.def(
      "true_log_density",
      [](const std::string& name, const Eigen::MatrixXd& rows) {
        const auto f = true_log_density(name);
        Eigen::VectorXd out(rows.rows());
        for (Eigen::Index i = 0; i < rows.rows(); ++i) {
          const Eigen::VectorXd x = rows.row(i).transpose();
          out(i) = f(as_vector(x));
        }
        return out;
      },
      py::arg("name"), py::arg("rows"));
  m.def(
      "load_csv",
      [](const std::filesystem::path& path, char delimiter) {
        auto r = load_csv(path, delimiter);
        return py::make_tuple(r.dataset.rows, r.header, r.rejected_lines);
      },
      py::arg("path"), py::arg("delimiter") = ',');
  m.def(
      "write_csv",
      [](const std::filesystem::path& path, const Eigen::MatrixXd& rows,
         const std::vector<std::string>& header) { write_csv(path, rows, header); },
      py::arg("path"), py::arg("rows"), py::arg("header") = std::vector<std::string>{});

  // oracle
  py::class_<GmmSpec>(m, "GmmSpec")
      .def_readwrite("weights", &GmmSpec::weights)
      .def_readwrite("means", &GmmSpec::means)
      .def_readwrite("sds", &GmmSpec::sds)
      .def_static("three_component", &GmmSpec::three_component)
      .def_static("five_component", &GmmSpec::five_component)
      .def("pdf", py::vectorize(&GmmSpec::pdf))
      .def("cdf", py::vectorize(&GmmSpec::cdf));
  m.def("erf_coeffs", &erf_coeffs, py::arg("K"));
  m.def("uniform_to_normal", &uniform_to_normal, py::arg("mu"), py::arg("sigma"), py::arg("z"),
        py::arg("K") = 30);
  m.def("normal_to_uniform", &normal_to_uniform, py::arg("mu"), py::arg("sigma"), py::arg("x"),
        py::arg("K") = 40);
  m.def(
      "kr_map_gmm",
      [](const GmmSpec& target, const std::vector<double>& z) {
        const auto src = Cdf1D::normal(0.0, 1.0);
        const auto dst = Cdf1D::gaussian_mixture(target);
        std::vector<double> out;
        for (double v : z) out.push_back(kr_map_1d(src, dst, v));
        return out;
      },
      py::arg("target"), py::arg("z"), "Increasing map from N(0, 1) to the mixture.");
}
