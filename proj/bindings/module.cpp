#include "misre/bench.hpp"
#include "misre/engine.hpp"
#include "misre/io.hpp"
#include "misre/models.hpp"
#include "misre/pipeline.hpp"
#include "misre/synth.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>

namespace py = pybind11;

namespace {

using namespace misre;

std::vector<Eigen::VectorXd> points_from_array(const py::array_t<double>& arr,
                                               int expected_dim = -1) {
  const py::buffer_info buf = arr.request();
  if (buf.ndim != 2)
    throw std::invalid_argument("points must be an [n, l] float64 array");
  const auto n = static_cast<int>(buf.shape[0]);
  const auto l = static_cast<int>(buf.shape[1]);
  if (expected_dim > 0 && l != expected_dim)
    throw std::invalid_argument("points must have " +
                                std::to_string(expected_dim) + " columns");
  const double* ptr = static_cast<const double*>(buf.ptr);
  const auto s0 = buf.strides[0] / static_cast<py::ssize_t>(sizeof(double));
  const auto s1 = buf.strides[1] / static_cast<py::ssize_t>(sizeof(double));
  std::vector<Eigen::VectorXd> points(n, Eigen::VectorXd(l));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < l; ++j) points[i](j) = ptr[i * s0 + j * s1];
  return points;
}

py::object json_to_py(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null:
      return py::none();
    case nlohmann::json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer:
      return py::int_(j.get<std::int64_t>());
    case nlohmann::json::value_t::number_unsigned:
      return py::int_(j.get<std::uint64_t>());
    case nlohmann::json::value_t::number_float:
      return py::float_(j.get<double>());
    case nlohmann::json::value_t::string:
      return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& item : j) out.append(json_to_py(item));
      return out;
    }
    case nlohmann::json::value_t::object: {
      py::dict out;
      for (auto it = j.begin(); it != j.end(); ++it)
        out[py::str(it.key())] = json_to_py(it.value());
      return out;
    }
    default:
      return py::none();
  }
}

py::dict fit(const py::array_t<double>& points, const std::string& model,
             int trials, double epsilon, std::uint64_t seed, int threads,
             bool trajectory_classification) {
  EstimationConfig config;
  config.model = model_from_string(model);
  config.trials = trials;
  config.epsilon = epsilon;
  config.seed = seed;
  config.threads = threads;
  config.trajectory_classification = trajectory_classification;
  const ModelSpec& spec = spec_for(config.model);
  const auto pts = points_from_array(points, spec.input_dim);
  EstimationResult result;
  {
    py::gil_scoped_release release;
    result = run(pts, config);
  }
  return json_to_py(result_to_json(result, config));
}

py::tuple generate_py(const py::object& scenario, std::uint64_t seed) {
  ScenarioSpec spec;
  if (py::isinstance<py::str>(scenario)) {
    spec = preset_scenario(scenario.cast<std::string>());
  } else {
    const std::string dumped =
        py::module_::import("json").attr("dumps")(scenario).cast<std::string>();
    spec = scenario_from_json(nlohmann::json::parse(dumped));
  }
  const LabeledDataset data = generate(spec, seed);
  const int n = static_cast<int>(data.points.size());
  const int l = spec.dim();
  py::array_t<double> pts({n, l});
  py::array_t<int> labels(n);
  double* p = static_cast<double*>(pts.request().ptr);
  int* lab = static_cast<int*>(labels.request().ptr);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < l; ++j) p[i * l + j] = data.points[i](j);
    lab[i] = data.labels[i];
  }
  return py::make_tuple(pts, labels);
}

py::array_t<double> distances_py(const py::array_t<double>& points,
                                 const std::string& model,
                                 const py::array_t<double>& theta,
                                 double alpha) {
  const ModelSpec& spec = spec_for(model_from_string(model));
  const auto pts = points_from_array(points, spec.input_dim);
  const py::buffer_info tb = theta.request();
  if (tb.ndim != 1 || tb.shape[0] != spec.carrier_dim)
    throw std::invalid_argument("theta must have length " +
                                std::to_string(spec.carrier_dim));
  Eigen::VectorXd th(spec.carrier_dim);
  const double* tp = static_cast<const double*>(tb.ptr);
  for (int i = 0; i < spec.carrier_dim; ++i) th(i) = tp[i];

  const CarrierTable table(spec, pts);
  std::vector<double> d(table.size());
  table.distances(th, alpha, d);
  py::array_t<double> out(d.size());
  std::copy(d.begin(), d.end(), static_cast<double*>(out.request().ptr));
  return out;
}

py::list models_py() {
  py::list out;
  for (ModelId id :
       {ModelId::Line2d, ModelId::Plane3d, ModelId::Ellipse2d, ModelId::Sphere3d,
        ModelId::Cylinder3d, ModelId::Fundamental, ModelId::Homography}) {
    const ModelSpec& spec = spec_for(id);
    py::dict d;
    d["name"] = to_string(id);
    d["input_dim"] = spec.input_dim;
    d["carrier_dim"] = spec.carrier_dim;
    d["channels"] = spec.channel_count;
    d["elemental_size"] = spec.elemental_size;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiple-inlier-structure robust estimation";

  py::register_exception<misre::InvalidInputError>(m, "InvalidInputError",
                                                   PyExc_ValueError);
  py::register_exception<misre::Error>(m, "EstimationError", PyExc_RuntimeError);

  m.def("fit", &fit, py::arg("points"), py::arg("model"),
        py::arg("trials") = 1000, py::arg("epsilon") = 5.0, py::arg("seed") = 0,
        py::arg("threads") = 0, py::arg("trajectory_classification") = false,
        "Segment points into structures; returns the result document as a dict");
  m.def("generate", &generate_py, py::arg("scenario"), py::arg("seed") = 0,
        "Sample a synthetic scenario (preset name or spec dict); returns "
        "(points, labels)");
  m.def("distances", &distances_py, py::arg("points"), py::arg("model"),
        py::arg("theta"), py::arg("alpha"),
        "Largest Mahalanobis distance per point under a fixed estimate");
  m.def("models", &models_py, "Model catalogue with linear-space dimensions");
  m.def("presets", []() { return misre::preset_names(); },
        "Named synthetic scenario presets");
  m.attr("__version__") = "0.1.0";
}
