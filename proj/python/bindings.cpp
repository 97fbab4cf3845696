#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "momentflow/flow.hpp"
#include "momentflow/operator.hpp"
#include "momentflow/runner.hpp"

namespace py = pybind11;
using namespace momentflow;

namespace {

py::array_t<double> to_array(const GridFunction& f) {
    py::array_t<double> out(static_cast<py::ssize_t>(f.size()));
    std::copy(f.data().begin(), f.data().end(), out.mutable_data());
    return out;
}

// Columns in CSV order: t, mu0, mu1, mun, lp_energy, hy_norm_sq, dissipation_residual.
py::array_t<double> records_array(const std::vector<FlowRecord>& records) {
    py::array_t<double> out({static_cast<py::ssize_t>(records.size()), py::ssize_t{7}});
    auto view = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const double row[7] = {r.t, r.mu0, r.mu1, r.mun, r.lp_energy, r.hy_norm_sq, r.dissipation_residual};
        for (py::ssize_t c = 0; c < 7; ++c) view(static_cast<py::ssize_t>(i), c) = row[c];
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Moment-constrained H^-1 gradient flows on (0,1)";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ProxFailure>(m, "ProxFailure", PyExc_RuntimeError);

    m.def(
        "resolve_manifest", [](const std::string& text) { return manifest_json(parse_manifest(text)); },
        py::arg("json_text"), "Parse a manifest and return it with every default filled in.");

    m.def(
        "run", [](const std::string& text, const std::filesystem::path& out_dir) {
            const RunManifest manifest = parse_manifest(text);
            py::gil_scoped_release release;
            return run_manifest(manifest, out_dir);
        },
        py::arg("json_text"), py::arg("out_dir"), "Run a manifest; returns the written paths.");

    m.def(
        "identity_suite",
        [](std::uint64_t seed, int samples, int max_degree) {
            py::list rows;
            for (const auto& r : identity_suite(seed, samples, max_degree).rows) {
                py::dict d;
                d["name"] = r.name;
                d["n"] = r.n;
                d["max_residual"] = r.max_residual;
                d["tolerance"] = r.tolerance;
                d["pass"] = r.pass;
                rows.append(d);
            }
            return rows;
        },
        py::arg("seed") = 42, py::arg("samples") = 200, py::arg("max_degree") = 6);

    m.def(
        "spectrum",
        [](int n, const std::string& y, std::size_t points, std::size_t count) {
            return spectrum(assemble(n, ConstraintSpace::parse(y), points), count);
        },
        py::arg("n"), py::arg("y"), py::arg("points"), py::arg("count") = 10);

    m.def(
        "flow",
        [](const std::string& text) {
            RunManifest manifest = parse_manifest(text);
            if (!manifest.n) throw ConfigError("n", "missing");
            const FlowConfig cfg = manifest.flow_config();
            const GridFunction u0 =
                project_initial(poly_to_grid(manifest.initial.polynomial(), cfg.n_points) * manifest.initial.amplitude,
                                cfg.n, cfg.y);
            FlowRun run;
            {
                py::gil_scoped_release release;
                run = run_flow(u0, cfg);
            }
            return py::make_tuple(records_array(run.records), to_array(run.final_state));
        },
        py::arg("json_text"),
        "Nonlinear flow from a manifest; returns (records[steps+1, 7], final_state[N]).");
}
