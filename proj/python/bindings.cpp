#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "elhom/cell.hpp"
#include "elhom/harness.hpp"
#include "elhom/oracles.hpp"

namespace py = pybind11;
using namespace elhom;

namespace {

// Results cross the boundary as JSON text; the package decodes them.
std::string cell_text(const std::string &coefficient, const std::string &params, Index n) {
    const auto field = make_coefficient<2>(coefficient, nlohmann::json::parse(params));
    return cell_json<2>(run_cell_pipeline<2>(field, n)).dump();
}

std::string rates_text(const std::string &config_text, const std::string &out_dir) {
    const RateStudy study = run_rate_study(parse_config(config_text));
    if (!out_dir.empty()) emit_report(study, out_dir);
    return study.summary().dump();
}

std::string laminate_text(const std::string &params) {
    const auto field = make_coefficient<2>("laminate", nlohmann::json::parse(params));
    return tensor_to_json<2>(laminate_cell_oracle(LaminateProfile<2>::from_field(field)).a_hat).dump();
}

std::string verify_text(std::uint64_t seed) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto &c : run_verification(seed))
        j.push_back({{"name", c.name}, {"value", c.value}, {"tol", c.tol}, {"pass", c.pass}});
    return j.dump();
}

py::dict fit(const std::vector<std::pair<double, double>> &points) {
    const RateFit f = fit_rate(points);
    py::dict d;
    d["slope"] = f.slope;
    d["intercept"] = f.intercept;
    d["r2"] = f.r_squared;
    d["residuals"] = f.residuals;
    return d;
}

} // namespace

PYBIND11_MODULE(_elhom, m) {
    m.doc() = "periodic homogenization of 2D linear elasticity";
    py::register_exception<Error>(m, "ElhomError", PyExc_RuntimeError);
    m.def("cell_json", &cell_text, py::arg("coefficient"), py::arg("params") = "{}",
          py::arg("n") = 64);
    m.def("rates_json", &rates_text, py::arg("config_text"), py::arg("out_dir") = "");
    m.def("laminate_oracle_json", &laminate_text, py::arg("params") = "{}");
    m.def("verify_json", &verify_text, py::arg("seed") = 0);
    m.def("fit_rate", &fit, py::arg("points"));
    m.def("harmonic_mean", &harmonic_mean, py::arg("values"), py::arg("fractions"));
    m.def("validate_config", [](const std::string &text) { return parse_config(text).to_json().dump(); },
          py::arg("config_text"));
}
