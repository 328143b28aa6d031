#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "epdiff/commutator_lab.hpp"
#include "epdiff/conjugation.hpp"
#include "epdiff/errors.hpp"
#include "epdiff/field_io.hpp"
#include "epdiff/geodesic.hpp"
#include "epdiff/random.hpp"
#include "epdiff/runner.hpp"
#include "epdiff/verify.hpp"

namespace py = pybind11;
using namespace epdiff;

namespace {

py::array_t<double> samples_array(const SpectralField& f) {
  const auto s = f.samples();
  const auto& g = f.grid();
  std::vector<py::ssize_t> shape{f.components()};
  for (int a = 0; a < g.dim(); ++a) shape.push_back(g.n());
  py::array_t<double> out(shape);
  std::copy(s.begin(), s.end(), out.mutable_data());
  return out;
}

SpectralField field_from_array(const TorusGrid& g, py::array_t<double, py::array::c_style | py::array::forcecast> a) {
  const std::size_t per = g.size();
  if (a.size() == 0 || static_cast<std::size_t>(a.size()) % per != 0) {
    throw ShapeMismatch("sample array size must be a multiple of N^d");
  }
  const int comps = static_cast<int>(a.size() / per);
  return SpectralField::from_samples(g, comps, std::span<const double>(a.data(), a.size()));
}

py::dict check_dict(const CheckResult& r) {
  py::dict d;
  d["suite"] = r.suite;
  d["name"] = r.name;
  d["residual"] = r.residual;
  d["tolerance"] = r.tolerance;
  d["pass"] = r.pass;
  return d;
}

}  // namespace

PYBIND11_MODULE(_epdiff, m) {
  m.doc() = "Spectral EPDiff laboratory on the flat torus";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  py::class_<TorusGrid>(m, "TorusGrid")
      .def(py::init<int, int>(), py::arg("dim"), py::arg("n"))
      .def_property_readonly("dim", &TorusGrid::dim)
      .def_property_readonly("n", &TorusGrid::n)
      .def_property_readonly("max_frequency", &TorusGrid::max_frequency)
      .def("points", [](const TorusGrid& g) {
        py::array_t<double> out({static_cast<py::ssize_t>(g.size()), static_cast<py::ssize_t>(g.dim())});
        auto v = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < g.size(); ++i) {
          for (int a = 0; a < g.dim(); ++a) v(i, a) = g.point(i)[a];
        }
        return out;
      })
      .def("__eq__", &TorusGrid::operator==)
      .def("__repr__", [](const TorusGrid& g) {
        return "TorusGrid(dim=" + std::to_string(g.dim()) + ", n=" + std::to_string(g.n()) + ")";
      });

  py::class_<SpectralField>(m, "SpectralField")
      .def(py::init<TorusGrid, int>(), py::arg("grid"), py::arg("components") = 1)
      .def_static("from_samples", &field_from_array, py::arg("grid"), py::arg("samples"),
                  "Samples shaped (components, N[, N]) or flat.")
      .def_static("scalar_constant", &SpectralField::scalar_constant)
      .def_property_readonly("grid", &SpectralField::grid)
      .def_property_readonly("components", &SpectralField::components)
      .def("samples", &samples_array)
      .def("coefficient", &SpectralField::coefficient, py::arg("component"), py::arg("k"))
      .def("set_mode", &SpectralField::set_mode)
      .def("reality_defect", &SpectralField::reality_defect)
      .def("max_abs_coefficient", &SpectralField::max_abs_coefficient)
      .def("component", &SpectralField::component)
      .def(py::self + py::self)
      .def(py::self - py::self)
      .def(double() * py::self)
      .def(py::self * double())
      .def(-py::self);

  m.def("sobolev_norm", &sobolev_norm, py::arg("f"), py::arg("q"));
  m.def("l2_inner", &l2_inner);
  m.def("pointwise_multiply", &pointwise_multiply);
  m.def("partial_derivative", &partial_derivative, py::arg("f"), py::arg("axis"));
  m.def("random_field", [](const TorusGrid& g, int c, std::uint64_t seed, std::uint64_t stream, double decay,
                           int max_mode) {
    return random_field(g, c, seed, stream, {.decay = decay, .max_mode = max_mode});
  }, py::arg("grid"), py::arg("components"), py::arg("seed"), py::arg("stream") = 0, py::arg("decay") = 2.0,
        py::arg("max_mode") = -1);
  m.def("save_field", &save_field);
  m.def("load_field", &load_field);

  py::class_<Diffeo>(m, "Diffeo")
      .def(py::init<SpectralField>())
      .def_static("identity", &Diffeo::identity)
      .def_static("translation", &Diffeo::translation)
      .def_property_readonly("displacement", &Diffeo::displacement)
      .def_property_readonly("min_jacobian", &Diffeo::min_jacobian);
  m.def("compose", &compose);
  m.def("invert_diffeo", py::overload_cast<const Diffeo&, double>(&invert_diffeo), py::arg("phi"),
        py::arg("tol") = 1e-12);
  m.def("inversion_residual", &inversion_residual);

  py::class_<SymbolSpec>(m, "SymbolSpec")
      .def_static("bessel_power", &SymbolSpec::bessel_power, py::arg("s"), py::arg("dim") = 1,
                  py::arg("components") = 1)
      .def_static("load", &load_symbol)
      .def_readonly("order", &SymbolSpec::order)
      .def_readonly("dim", &SymbolSpec::dim)
      .def_readonly("components", &SymbolSpec::components);

  py::class_<SpectralOperator>(m, "SpectralOperator")
      .def_static("identity", &SpectralOperator::identity, py::arg("grid"), py::arg("components") = 1)
      .def_static("derivative", &SpectralOperator::derivative, py::arg("grid"), py::arg("axis"),
                  py::arg("components") = 1)
      .def_static("multiplication", &SpectralOperator::multiplication, py::arg("f"), py::arg("components") = 1)
      .def_property_readonly("order", &SpectralOperator::order)
      .def_property_readonly("is_multiplier", &SpectralOperator::is_multiplier)
      .def("apply", py::overload_cast<const SpectralField&>(&SpectralOperator::apply, py::const_))
      .def("solve", &SpectralOperator::solve)
      .def("to_dense", &SpectralOperator::to_dense)
      .def("frobenius_norm", &SpectralOperator::frobenius_norm)
      .def(py::self + py::self)
      .def(py::self - py::self)
      .def(py::self * py::self);
  m.def("realize", &realize);
  m.def("commutator", &commutator);
  m.def("nested_commutator", [](const std::vector<SpectralField>& fs, const SpectralOperator& p) {
    return nested_commutator(fs, p);
  });
  m.def("a_n", [](const std::vector<SpectralField>& us, const SpectralOperator& a) { return a_n(us, a); });
  m.def("window_gap", &window_gap, py::arg("a"), py::arg("b"), py::arg("window"), py::arg("spectral") = false);

  py::class_<TermDescriptor>(m, "TermDescriptor")
      .def_property_readonly("is_type_one", [](const TermDescriptor& t) { return t.type == TermDescriptor::Type::I; })
      .def_readonly("coefficient", &TermDescriptor::coefficient)
      .def_readonly("base_order", &TermDescriptor::base_order)
      .def("describe", &TermDescriptor::describe)
      .def("__repr__", &TermDescriptor::describe);
  m.def("split_terms", &split_terms, py::arg("n"), py::arg("r"), py::arg("dim"));
  m.def("evaluate_terms", [](const std::vector<TermDescriptor>& ts, const std::vector<SpectralField>& us,
                             const SpectralOperator& a) { return evaluate_terms(ts, us, a); });
  m.def("symbol_formula_check", [](const SymbolSpec& spec, const TorusGrid& g, const std::vector<Frequency>& modes,
                                   const Frequency& w, int comp) {
    return symbol_formula_check(spec, g, modes, w, comp);
  }, py::arg("spec"), py::arg("grid"), py::arg("modes"), py::arg("w"), py::arg("w_component") = 0);

  py::class_<ProbeReport>(m, "ProbeReport")
      .def_readonly("max_ratio", &ProbeReport::max_ratio)
      .def_readonly("median_ratio", &ProbeReport::median_ratio)
      .def_readonly("skips", &ProbeReport::skips)
      .def_readonly("samples", &ProbeReport::samples)
      .def("to_json", &ProbeReport::to_json);
  m.def("boundedness_probe", &boundedness_probe, py::arg("p"), py::arg("n"), py::arg("q"), py::arg("r"),
        py::arg("samples"), py::arg("seed"), py::arg("field_amplitude") = 1.0);

  m.def("derivative_formula", &derivative_formula);
  m.def("gateaux_fd", &gateaux_fd);

  py::enum_<Integrator>(m, "Integrator").value("rk4", Integrator::rk4).value("midpoint", Integrator::midpoint);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("dt", &SolverConfig::dt)
      .def_readwrite("t_end", &SolverConfig::t_end)
      .def_readwrite("integrator", &SolverConfig::integrator)
      .def_readwrite("inertia", &SolverConfig::inertia)
      .def_readwrite("grid", &SolverConfig::grid)
      .def_readwrite("cadence", &SolverConfig::cadence)
      .def_readwrite("q", &SolverConfig::q)
      .def_readwrite("growth_limit", &SolverConfig::growth_limit)
      .def_readwrite("cfl_limit", &SolverConfig::cfl_limit)
      .def("validate", &SolverConfig::validate);

  py::class_<GeodesicTrajectory>(m, "GeodesicTrajectory")
      .def("to_csv", &GeodesicTrajectory::to_csv)
      .def_property_readonly("times", [](const GeodesicTrajectory& t) {
        std::vector<double> v;
        for (const auto& d : t.diagnostics) v.push_back(d.t);
        return v;
      })
      .def_property_readonly("energy", [](const GeodesicTrajectory& t) {
        std::vector<double> v;
        for (const auto& d : t.diagnostics) v.push_back(d.energy);
        return v;
      })
      .def_property_readonly("final_u", [](const GeodesicTrajectory& t) { return *t.final_state().u; })
      .def_property_readonly("final_phi", [](const GeodesicTrajectory& t) { return t.final_state().phi; });

  m.def("momentum", &momentum);
  m.def("euler_arnold_rhs", &euler_arnold_rhs);
  m.def("spray", &spray);
  m.def("kinetic_energy", &kinetic_energy);
  m.def("integrate_eulerian", &integrate_eulerian);
  m.def("integrate_lagrangian", &integrate_lagrangian);
  m.def("metric_eval", &metric_eval);

  m.def("verify_suite_names", &verify_suite_names);
  m.def("run_verify_suite", [](const std::string& suite, std::uint64_t seed, int n, int order, int instances) {
    py::list out;
    for (const auto& r : run_verify_suite(suite, {.seed = seed, .n = n, .order = order, .instances = instances})) {
      out.append(check_dict(r));
    }
    return out;
  }, py::arg("suite"), py::arg("seed") = 42, py::arg("n") = 32, py::arg("order") = 2, py::arg("instances") = 5);
  m.def("run_experiment", [](const std::filesystem::path& p) {
    const auto out = run_experiment(p);
    return py::make_tuple(out.exit_code, out.output_dir, out.json);
  });
}
