#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "viscomem/experiments.hpp"

namespace py = pybind11;
using namespace viscomem;

namespace {

ExperimentConfig parse(const std::string& text, const std::string& base_dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config(j, base_dir);
}

py::array_t<double> rows(const std::vector<ModalField>& fields, std::size_t n) {
    py::array_t<double> a({fields.size(), n});
    auto m = a.mutable_unchecked<2>();
    for (std::size_t i = 0; i < fields.size(); ++i) {
        for (std::size_t k = 0; k < n; ++k) m(i, k) = fields[i][k];
    }
    return a;
}

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw std::invalid_argument("expected a one-dimensional array");
    return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native core of viscomem";
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def("effective_config", [](const std::string& cfg, const std::string& base_dir) {
        return to_json(parse(cfg, base_dir)).dump();
    }, py::arg("config"), py::arg("base_dir") = "");

    m.def("eigenvalues", [](double length, std::size_t modes) {
        return SpectralBasis(length, modes).eigenvalues();
    }, py::arg("length"), py::arg("modes"));

    m.def("simulate", [](const std::string& cfg, const std::string& base_dir) {
        const ExperimentConfig c = parse(cfg, base_dir);
        SimulateResult r;
        {
            py::gil_scoped_release release;
            r = run_simulate(c);
        }
        const Trajectory& tr = r.coarse.traj;
        py::dict out;
        out["report"] = to_json(r).dump();
        out["t"] = py::array_t<double>(tr.t.size(), tr.t.data());
        out["u"] = rows(tr.u, c.basis.modes);
        out["v"] = rows(tr.v, c.basis.modes);
        std::vector<double> ts, E;
        for (const auto& s : r.coarse.series.snapshots()) {
            ts.push_back(s.t);
            E.push_back(s.E);
        }
        out["energy_t"] = py::array_t<double>(ts.size(), ts.data());
        out["energy"] = py::array_t<double>(E.size(), E.data());
        return out;
    }, py::arg("config"), py::arg("base_dir") = "");

    m.def("check_kernel", [](const std::string& spec) {
        const KernelPtr k = make_kernel(nlohmann::json::parse(spec));
        nlohmann::json j = certify_axioms(*k).to_json();
        j["delta_convergence"] = certify_delta_convergence(*k, KvCompareConfig{}.certification_times).to_json();
        return j.dump();
    }, py::arg("kernel"));

    m.def("decay", [](const std::string& cfg, const std::string& base_dir) {
        const ExperimentConfig c = parse(cfg, base_dir);
        py::gil_scoped_release release;
        return to_json(run_decay(c)).dump();
    }, py::arg("config"), py::arg("base_dir") = "");

    m.def("attractor", [](const std::string& cfg, const std::string& base_dir) {
        const ExperimentConfig c = parse(cfg, base_dir);
        py::gil_scoped_release release;
        return to_json(run_attractor(c)).dump();
    }, py::arg("config"), py::arg("base_dir") = "");

    m.def("kv_compare", [](const std::string& cfg, const std::string& base_dir) {
        const ExperimentConfig c = parse(cfg, base_dir);
        py::gil_scoped_release release;
        return to_json(run_kv_compare(c)).dump();
    }, py::arg("config"), py::arg("base_dir") = "");

    m.def("gronwall", [](const std::string& cfg, const std::string& base_dir) {
        const ExperimentConfig c = parse(cfg, base_dir);
        py::gil_scoped_release release;
        return to_json(run_gronwall(c)).dump();
    }, py::arg("config"), py::arg("base_dir") = "");

    m.def("gronwall_check", [](py::array_t<double, py::array::c_style | py::array::forcecast> Lambda,
                               py::array_t<double, py::array::c_style | py::array::forcecast> q1,
                               py::array_t<double, py::array::c_style | py::array::forcecast> q2, double dt,
                               double eps, double c1, double c2, double tau) {
        GronwallInstance g;
        g.Lambda = to_vector(Lambda);
        g.q1 = to_vector(q1);
        g.q2 = to_vector(q2);
        g.dt = dt;
        g.eps = eps;
        g.c1 = c1;
        g.c2 = c2;
        g.tau = tau;
        const HypothesisReport h = verify_hypothesis(g);
        return nlohmann::json{{"hypothesis", to_json(h)}, {"conclusion", to_json(check_conclusion(g, h))}}.dump();
    }, py::arg("Lambda"), py::arg("q1"), py::arg("q2"), py::arg("dt"), py::arg("eps"), py::arg("c1") = 0.0,
       py::arg("c2") = 0.0, py::arg("tau") = 0.0);

    m.def("minimal_c1", [](py::array_t<double, py::array::c_style | py::array::forcecast> q1, double dt, double eps) {
        return minimal_c1(to_vector(q1), dt, eps);
    }, py::arg("q1"), py::arg("dt"), py::arg("eps"));

    m.def("window_mass", [](py::array_t<double, py::array::c_style | py::array::forcecast> q2, double dt) {
        return window_mass(to_vector(q2), dt);
    }, py::arg("q2"), py::arg("dt"));
}
