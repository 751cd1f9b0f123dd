#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "nhdnls/cli.hpp"
#include "nhdnls/errors.hpp"
#include "nhdnls/fields.hpp"
#include "nhdnls/geometry.hpp"
#include "nhdnls/nhd.hpp"
#include "nhdnls/solvers.hpp"
#include "nhdnls/spin_chain.hpp"

namespace py = pybind11;
using namespace nhdnls;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;

py::array_t<cplx> to_array(const GridField& f) {
  const auto s = f.samples();
  py::array_t<cplx> out(static_cast<py::ssize_t>(s.size()));
  std::copy(s.begin(), s.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_nhdnls, m) {
  m.doc() = "Inhomogeneous and deformed NLS solvers, Hasimoto maps and deformation scans";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<NumericalBlowup>(m, "NumericalBlowup", PyExc_ArithmeticError);

  m.def("version", &cli::version);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one command line invocation; returns (exit_code, stdout, stderr).");

  py::class_<GridField>(m, "Field", "Samples on a uniform grid plus the value at the right end (the seam).")
      .def(py::init([](const CArray& a, double dx, std::optional<cplx> seam) {
             if (a.ndim() != 1) throw py::value_error("expected a one-dimensional array");
             std::vector<cplx> v(a.data(), a.data() + a.size());
             return seam ? GridField(std::move(v), *seam, dx) : GridField(std::move(v), dx);
           }),
           py::arg("values"), py::arg("dx"), py::arg("seam") = py::none())
      .def_property_readonly("values", &to_array)
      .def_property_readonly("seam", [](const GridField& f) { return f.seam(); })
      .def_property_readonly("dx", &GridField::dx)
      .def_property_readonly("length", &GridField::length)
      .def("__len__", &GridField::size);

  m.def("deriv", [](const GridField& f, int order) { return deriv(f, order); }, py::arg("f"), py::arg("order") = 1);
  m.def("cumint", [](const GridField& f) { return cumint(f); }, py::arg("f"));
  m.def(
      "rhs_standard", [](const GridField& q, double eta) { return rhs_standard(q, GridField::constant(q.size(), q.dx(), eta)); },
      py::arg("q"), py::arg("eta") = 1.0, "q_t = i q_xx + 2i eta |q|^2 q.");
  m.def("rhs_inhomogeneous", [](const GridField& q, const GridField& rho) { return rhs_inhomogeneous(q, rho); },
        py::arg("q"), py::arg("rho"));
  m.def("hasimoto_forward", &hasimoto_forward, py::arg("kappa"), py::arg("tau"));
  m.def(
      "hasimoto_inverse",
      [](const GridField& q, double kappa_floor) {
        HasimotoInverse r = hasimoto_inverse(q, kappa_floor);
        return py::make_tuple(std::move(r.kappa), std::move(r.tau), std::move(r.masked));
      },
      py::arg("q"), py::arg("kappa_floor"));

  m.def(
      "magnon_frequency",
      [](std::size_t sites, double spacing, double coupling, double k, double amplitude) {
        const MagnonMeasurement r = magnon_dispersion(sites, spacing, coupling, k, amplitude);
        return py::dict(py::arg("omega") = r.omega, py::arg("predicted") = r.predicted,
                        py::arg("continuum") = r.continuum);
      },
      py::arg("sites"), py::arg("spacing"), py::arg("coupling"), py::arg("k"), py::arg("amplitude") = 1e-3);

  m.def(
      "continuum_scan_json",
      [](std::size_t n, double length, std::uint64_t seed, int lo, int hi) {
        const ScanSample s = random_scan_sample(n, length, seed);
        return scan_report_json(continuum_spectral_scan(s.q, s.rho, s.eta, lo, hi));
      },
      py::arg("n") = 64, py::arg("length") = 6.283185307179586, py::arg("seed") = 1, py::arg("lo") = -3,
      py::arg("hi") = 3);
}
